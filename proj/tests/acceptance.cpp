// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "chunk_oracle.hpp"
#include "golden_support.hpp"
#include "reat/chunker.hpp"
#include "reat/decomposer.hpp"
#include "reat/evaluator.hpp"
#include "reat/model_store.hpp"
#include "test_support.hpp"
#include "toy_pipeline.hpp"

#ifndef REAT_GOLDEN_DIR
#error "REAT_GOLDEN_DIR must point at tests/golden"
#endif

namespace {

using namespace reat;
using reat::testing::close_rel;
using reat::testing::kArchitectures;
using reat::testing::random_model;
using reat::testing::random_tokens;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

constexpr double kRel = 1e-6;
constexpr double kAbs = 1e-9;

bool within(double got, double want) { return close_rel(got, want, kRel, kAbs); }

double rel_err(double got, double want) {
    return std::abs(got - want) / std::max(kAbs, std::max(std::abs(got), std::abs(want)));
}

// ---------------------------------------------------------------------------

Outcome completeness() {
    std::size_t cases = 0, clamped = 0, bad = 0;
    double worst = 0.0;
    for (Architecture arch : kArchitectures) {
        Rng rng(100 + static_cast<std::uint64_t>(arch));
        for (std::uint64_t seed = 0; cases < 210 * (static_cast<std::size_t>(arch) + 1); ++seed) {
            const RnnModel model = random_model(arch, 1000 * static_cast<std::uint64_t>(arch) + seed);
            const auto tokens = random_tokens(rng, 1 + rng.below(12), model.embedding.rows());
            const ForwardTrace trace = forward(model, tokens);
            const AlphaTrace alpha = extract_alpha(trace);
            if (alpha.clamped()) {
                ++clamped;
                continue;
            }
            const ClassIndex c = rng.below(model.output.rows());
            const double total = reat_word_scores(model, trace, alpha, c).total();
            worst = std::max(worst, rel_err(total, trace.logits[c]));
            bad += !within(total, trace.logits[c]);
            ++cases;
        }
    }
    return {bad == 0, fmt("%zu cases (%zu LSTM clamp cases skipped), worst rel err %.2e", cases, clamped, worst)};
}

void for_each_partition(std::size_t length, const std::function<void(const std::vector<Span>&)>& fn) {
    // bit k of mask set = a cut after token k+1
    for (std::size_t mask = 0; mask < (std::size_t{1} << (length - 1)); ++mask) {
        std::vector<Span> spans;
        std::size_t first = 1;
        for (std::size_t t = 1; t <= length; ++t) {
            if (t == length || (mask >> (t - 1) & 1u)) {
                spans.push_back({first, t});
                first = t + 1;
            }
        }
        fn(spans);
    }
}

Outcome partition_additivity() {
    std::size_t partitions = 0, bad = 0;
    double worst = 0.0;
    for (Architecture arch : kArchitectures) {
        Rng rng(200 + static_cast<std::uint64_t>(arch));
        std::size_t traces = 0;
        for (std::uint64_t seed = 0; traces < 24; ++seed) {
            const RnnModel model = random_model(arch, 2000 + seed);
            const auto tokens = random_tokens(rng, 1 + traces % 6, model.embedding.rows());
            const ForwardTrace trace = forward(model, tokens);
            const AlphaTrace alpha = extract_alpha(trace);
            if (alpha.clamped()) continue;
            ++traces;
            const ClassIndex c = rng.below(model.output.rows());
            for_each_partition(tokens.size(), [&](const std::vector<Span>& spans) {
                const double total = reat_span_scores(model, trace, alpha, spans, c).total();
                worst = std::max(worst, rel_err(total, trace.logits[c]));
                bad += !within(total, trace.logits[c]);
                ++partitions;
            });
        }
    }
    return {bad == 0, fmt("%zu partitions over 72 traces, worst rel err %.2e", partitions, worst)};
}

Outcome phrase_is_word_sum() {
    std::size_t spans = 0, bad = 0;
    double worst = 0.0;
    for (Architecture arch : kArchitectures) {
        Rng rng(300 + static_cast<std::uint64_t>(arch));
        for (std::size_t length = 1; length <= 8; ++length) {
            for (std::uint64_t k = 0; k < 4; ++k) {
                const RnnModel model = random_model(arch, 3000 + 10 * length + k);
                const auto tokens = random_tokens(rng, length, model.embedding.rows());
                const ForwardTrace trace = forward(model, tokens);
                const AlphaTrace alpha = extract_alpha(trace);
                const ClassIndex c = rng.below(model.output.rows());
                const auto words = reat_word_scores(model, trace, alpha, c).scores();
                for (std::size_t a = 1; a <= length; ++a) {
                    double sum = 0.0;
                    for (std::size_t b = a; b <= length; ++b) {
                        sum += words[b - 1];
                        const double phrase = reat_phrase_score(model, trace, alpha, {a, b}, c).score;
                        worst = std::max(worst, std::abs(phrase - sum));
                        bad += std::abs(phrase - sum) > 1e-9;
                        ++spans;
                    }
                }
            }
        }
    }
    return {bad == 0, fmt("%zu spans, worst abs err %.2e", spans, worst)};
}

Outcome gradient_check() {
    std::size_t checks = 0, bad = 0;
    double worst = 0.0;
    for (Architecture arch : kArchitectures) {
        Rng rng(400 + static_cast<std::uint64_t>(arch));
        for (std::uint64_t k = 0; k < 50; ++k) {
            const RnnModel model = random_model(arch, 4000 + k);
            const auto tokens = random_tokens(rng, 1 + rng.below(6), model.embedding.rows());
            std::vector<Vector> inputs = embed(model, tokens);
            const ClassIndex c = rng.below(model.output.rows());
            const auto grad = grad_wrt_inputs(model, inputs, c);
            const std::size_t t = rng.below(inputs.size());
            const std::size_t i = rng.below(inputs[t].size());
            const double saved = inputs[t][i];
            const double h = 1e-5;
            inputs[t][i] = saved + h;
            const double up = forward_inputs(model, inputs).logits[c];
            inputs[t][i] = saved - h;
            const double down = forward_inputs(model, inputs).logits[c];
            inputs[t][i] = saved;
            const double numeric = (up - down) / (2 * h);
            const double e = std::abs(grad[t][i] - numeric) / std::max(1e-6, std::abs(numeric));
            worst = std::max(worst, e);
            bad += !close_rel(grad[t][i], numeric, 1e-4, 1e-8);
            ++checks;
        }
    }
    return {bad == 0, fmt("%zu embedding-gradient checks, worst rel err %.2e", checks, worst)};
}

Outcome naive_degeneracy() {
    std::size_t compared = 0;
    double worst = 0.0;
    for (Architecture arch : kArchitectures) {
        Rng rng(500 + static_cast<std::uint64_t>(arch));
        for (std::uint64_t k = 0; k < 40; ++k) {
            const RnnModel model = random_model(arch, 5000 + k);
            const auto tokens = random_tokens(rng, 1 + rng.below(12), model.embedding.rows());
            const ForwardTrace trace = forward(model, tokens);
            const ClassIndex c = rng.below(model.output.rows());
            const auto reat = reat_word_scores(model, trace, unit_alpha(trace), c).scores();
            const auto naive = naive_scores(model, trace, c).scores();
            for (std::size_t t = 0; t < reat.size(); ++t) {
                worst = std::max(worst, std::abs(reat[t] - naive[t]));
                ++compared;
            }
        }
    }
    return {worst <= 1e-12, fmt("%zu word scores, worst abs diff %.2e", compared, worst)};
}

Outcome chunker() {
    const std::vector<std::string> words{"The", "movie", "does", "n't", "serve", "up", "lot", "of", "laughs"};
    const PhrasePartition p = chunk(tag(words));
    const bool worked = p.spans() == std::vector<Span>{{1, 2}, {3, 6}, {7, 9}} &&
                        p.chunks[0].label == ChunkLabel::noun_chunk && p.chunks[1].label == ChunkLabel::verb_chunk &&
                        p.chunks[2].label == ChunkLabel::noun_chunk;
    reat::testing::RegexChunkOracle oracle;
    Rng rng(600);
    std::size_t mismatches = 0;
    const std::size_t trials = 100000;
    for (std::size_t k = 0; k < trials; ++k) {
        const auto tags = reat::testing::random_tags(rng, 1 + rng.below(8));
        mismatches += chunk(tags).chunks != oracle(tags);
    }
    return {worked && mismatches == 0,
            fmt("worked example %s; %zu/%zu random tag strings differ from the regex oracle",
                worked ? "{The movie}{does n't serve up}{lot of laughs}" : "WRONG", mismatches, trials)};
}

Outcome desk_scale() {
    const auto& run = reat::testing::toy_run();
    const RnnModel& model = run.trained.model;
    const auto texts = make_eval_texts(run.vocab, run.corpus.test);
    const auto lex = make_lexicons(run.corpus.positive_words, run.corpus.negative_words);
    const double reat_i =
        interpretability(model, texts, lex, method_attributor(Method::reat), kPositiveClass).score("interpretability");
    const double naive_i =
        interpretability(model, texts, lex, method_attributor(Method::naive), kPositiveClass).score("interpretability");
    const double reat_f =
        faithfulness(model, texts, method_attributor(Method::reat), DeletionUnit::clause).score("faithfulness");
    double random_f = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s)
        random_f += faithfulness(model, texts, random_attributor(s), DeletionUnit::clause).score("faithfulness") / 10.0;
    const bool pass = run.train_accuracy >= 0.95 && reat_i >= naive_i && reat_i >= 0.8 && reat_f > random_f;
    return {pass, fmt("train acc %.4f (best epoch %d); interpretability reat %.4f vs naive %.4f; "
                      "faithfulness reat %.4f vs random %.4f",
                      run.train_accuracy, run.trained.best_epoch, reat_i, naive_i, reat_f, random_f)};
}

Outcome metric_arithmetic() {
    // drops 0.5, 0.5, 0.125 -> 1.125 / 3
    const std::vector<double> before{1.0, 0.75, 0.5}, after{0.5, 0.25, 0.375};
    const double f = faithfulness_score(before, after);
    const double i = interpretability_score(2, 1);
    const double i_all = interpretability_score(3, 0);
    const bool pass = f == 0.375 && i == 2.0 / 3.0 && i_all == 1.0 && interpretability_score(0, 3) == 0.0;
    return {pass, fmt("faithfulness %.17g (want 0.375), interpretability %.17g (want 2/3)", f, i)};
}

Outcome model_file() {
    std::size_t roundtrips = 0;
    bool ok = true;
    for (Architecture arch : kArchitectures) {
        Vocabulary vocab;
        for (int k = 0; k < 9; ++k) vocab.add("w" + std::to_string(k));
        vocab.freeze();
        const RnnModel model = random_model(arch, 9, {vocab.size(), 5, 6, 3});
        const auto bytes = encode_model(model, vocab);
        const StoredModel back = decode_model(bytes);
        ok = ok && back.model == model && back.vocab == vocab && encode_model(back.model, back.vocab) == bytes;
        ++roundtrips;

        auto expect_kind = [&](std::vector<std::uint8_t> b, ModelFileErrorKind kind) {
            try {
                decode_model(b);
                ok = false;
            } catch (const ModelFileError& e) {
                ok = ok && e.kind() == kind;
            }
        };
        auto flipped = bytes;
        flipped[bytes.size() / 3] ^= 0x40;
        expect_kind(flipped, ModelFileErrorKind::crc_mismatch);
        expect_kind({bytes.begin(), bytes.end() - 5}, ModelFileErrorKind::crc_mismatch);
        auto magic = bytes;
        magic[1] = '?';
        expect_kind(magic, ModelFileErrorKind::bad_magic);
    }
    return {ok, fmt("%zu architectures round-trip bit-exact; flipped, truncated and bad-magic files rejected",
                    roundtrips)};
}

Outcome golden() {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "reat_acceptance_golden";
    std::ostringstream err;
    const std::string first = reat::testing::render_golden(dir / "a", err);
    const std::string second = reat::testing::render_golden(dir / "b", err);
    const std::string want = reat::testing::slurp(fs::path(REAT_GOLDEN_DIR) / "heatmap.html");
    fs::remove_all(dir);
    if (first.empty()) return {false, "CLI failed: " + err.str()};
    const bool pass = !want.empty() && first == want && second == want;
    return {pass, fmt("%zu-byte heatmap %s the golden snapshot", first.size(), pass ? "matches" : "DIFFERS FROM")};
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        Outcome (*run)();
        double limit_seconds;  // 0: no limit
    };
    const Criterion criteria[] = {
        {"completeness", completeness, 10.0},
        {"partition additivity", partition_additivity, 30.0},
        {"phrase = sum of words", phrase_is_word_sum, 0.0},
        {"gradient correctness", gradient_check, 0.0},
        {"naive degeneracy", naive_degeneracy, 0.0},
        {"chunker", chunker, 0.0},
        {"desk-scale end-to-end", desk_scale, 300.0},
        {"metric arithmetic", metric_arithmetic, 0.0},
        {"model file", model_file, 0.0},
        {"heatmap golden file", golden, 0.0},
    };
    int failed = 0;
    int n = 0;
    for (const Criterion& c : criteria) {
        ++n;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.limit_seconds > 0 && seconds >= c.limit_seconds) {
            o.pass = false;
            o.detail += fmt(" [over the %.0f s limit]", c.limit_seconds);
        }
        failed += !o.pass;
        std::printf("%s %2d %-24s %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", n, c.name, o.detail.c_str(), seconds);
        std::fflush(stdout);
    }
    std::printf("%d/%d criteria passed\n", n - failed, n);
    return failed == 0 ? 0 : 1;
}
