#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "reat/evaluator.hpp"
#include "test_support.hpp"

namespace reat {
namespace {

// Vocabulary shared by the fixtures: ids follow this list after <pad>, <unk>.
const std::vector<std::string> kWords{"the", "film", "is", "good", "bad", "but", ".", "great", "dull", "plot"};

Vocabulary fixture_vocab() { return Vocabulary::build({kWords}); }

EvalText text_of(const Vocabulary& vocab, const std::string& line) {
    LabeledText t;
    std::istringstream in(line);
    for (std::string w; in >> w;) t.tokens.push_back(w);
    return make_eval_text(vocab, t);
}

// Scores each word by a fixed per-word table and each span by the sum.
Attributor table_attributor(const Vocabulary& vocab, std::map<std::string, double> table) {
    std::map<TokenId, double> by_id;
    for (const auto& [w, s] : table) by_id[vocab.lookup(w)] = s;
    return {"table", [by_id](const RnnModel&, std::span<const TokenId> ids, std::span<const Span> spans, ClassIndex) {
                std::vector<double> out;
                for (const Span& s : spans) {
                    double sum = 0;
                    for (std::size_t t = s.first; t <= s.last; ++t) {
                        const auto it = by_id.find(ids[t - 1]);
                        sum += it == by_id.end() ? 0.0 : it->second;
                    }
                    out.push_back(sum);
                }
                return out;
            }};
}

RnnModel fixture_model(Architecture arch = Architecture::gru, std::uint64_t seed = 1) {
    return testing::random_model(arch, seed, {fixture_vocab().size(), 4, 5, 2});
}

TEST(MetricArithmetic, Faithfulness) {
    EXPECT_DOUBLE_EQ(faithfulness_score(std::vector<double>{0.9}, std::vector<double>{0.4}), 0.5);
    // (0.75 - 0.25) + (0.5 - 0.5) + (1 - 0.375) = 1.125 over 3 items
    EXPECT_EQ(faithfulness_score(std::vector<double>{0.75, 0.5, 1.0}, std::vector<double>{0.25, 0.5, 0.375}),
              0.375);
    EXPECT_THROW(faithfulness_score(std::vector<double>{}, std::vector<double>{}), EvalError);
}

TEST(MetricArithmetic, Interpretability) {
    EXPECT_EQ(interpretability_score(3, 1), 0.75);
    EXPECT_EQ(interpretability_score(2, 1), 2.0 / 3.0);
    EXPECT_EQ(interpretability_score(0, 3), 0.0);
    EXPECT_THROW(interpretability_score(0, 0), EvalError);
}

TEST(Faithfulness, ThreeTextFixtureMatchesDirectForwardPasses) {
    const Vocabulary vocab = fixture_vocab();
    const RnnModel model = fixture_model();
    const std::vector<EvalText> texts{text_of(vocab, "the film is good but the plot is dull"),
                                      text_of(vocab, "the plot is bad . the film is great"),
                                      text_of(vocab, "good , bad , dull")};
    // "dull" dominates, so the unit holding it is deleted.
    const Attributor attributor = table_attributor(vocab, {{"dull", 5.0}, {"good", 1.0}});
    const EvalReport report = faithfulness(model, texts, attributor, DeletionUnit::clause, Execution::serial);

    const std::vector<std::vector<std::string>> remaining{
        {"the", "film", "is", "good", "but"}, {"the", "film", "is", "great"}, {"good", ",", "bad", ","}};
    const std::vector<Span> deleted{{6, 9}, {1, 5}, {5, 5}};
    ASSERT_EQ(report.processed, 3u);
    double sum = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const ForwardTrace full = forward(model, texts[i].ids);
        const ClassIndex c = full.predicted();
        const double after = forward(model, vocab.encode(remaining[i])).probabilities[c];
        EXPECT_EQ(report.items[i].field("y_before"), full.probabilities[c]);
        EXPECT_EQ(report.items[i].field("y_after"), after);
        EXPECT_EQ(report.items[i].field("deleted_first"), static_cast<double>(deleted[i].first));
        EXPECT_EQ(report.items[i].field("deleted_last"), static_cast<double>(deleted[i].last));
        sum += full.probabilities[c] - after;
    }
    EXPECT_EQ(report.score("faithfulness"), sum / 3.0);
}

TEST(Faithfulness, InputIgnoringModelScoresZero) {
    const Vocabulary vocab = fixture_vocab();
    RnnModel model = fixture_model();
    std::fill(model.embedding.values().begin(), model.embedding.values().end(), 0.0);
    for (auto block : model.parameter_blocks()) std::fill(block.begin(), block.end(), 0.0);
    model.output(0, 0) = 1.0;
    const std::vector<EvalText> texts{text_of(vocab, "good . bad"), text_of(vocab, "the film . is dull")};
    const EvalReport report = faithfulness(model, texts, constant_attributor(), DeletionUnit::sentence);
    EXPECT_EQ(report.score("faithfulness"), 0.0);
    for (const auto& item : report.items) EXPECT_EQ(item.field("deleted_first"), 1.0);
}

TEST(Faithfulness, SkipsSingleUnitTextsAndRejectsEmptyEligibleSet) {
    const Vocabulary vocab = fixture_vocab();
    const RnnModel model = fixture_model();
    const std::vector<EvalText> texts{text_of(vocab, "the film is good"), text_of(vocab, "good . bad")};
    const EvalReport report = faithfulness(model, texts, random_attributor(3), DeletionUnit::sentence);
    EXPECT_EQ(report.processed, 1u);
    EXPECT_EQ(report.skipped, 1u);
    EXPECT_FALSE(report.items[0].skipped.empty());
    const std::vector<EvalText> single{texts[0]};
    EXPECT_THROW(faithfulness(model, single, random_attributor(3), DeletionUnit::sentence), EvalError);
}

std::vector<EvalText> random_texts(const Vocabulary& vocab, std::uint64_t seed, std::size_t n) {
    Rng rng(seed);
    std::vector<EvalText> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::string line;
        const std::size_t len = 2 + rng.below(12);
        for (std::size_t k = 0; k < len; ++k) line += kWords[rng.below(kWords.size())] + " ";
        out.push_back(text_of(vocab, line));
    }
    return out;
}

TEST(Faithfulness, ReportMeanEqualsItemMean) {
    const Vocabulary vocab = fixture_vocab();
    for (Architecture arch : testing::kArchitectures) {
        const RnnModel model = fixture_model(arch, 9);
        const auto texts = random_texts(vocab, 4, 60);
        const EvalReport report = faithfulness(model, texts, method_attributor(Method::reat), DeletionUnit::clause);
        double sum = 0;
        std::size_t n = 0;
        for (const auto& item : report.items) {
            if (!item.skipped.empty()) continue;
            EXPECT_NEAR(item.field("drop"), item.field("y_before") - item.field("y_after"), 1e-15);
            sum += item.field("drop");
            ++n;
        }
        EXPECT_EQ(n, report.processed);
        EXPECT_NEAR(report.score("faithfulness"), sum / static_cast<double>(n), 1e-12);
    }
}

TEST(Interpretability, ThreeTextFixture) {
    const Vocabulary vocab = fixture_vocab();
    const RnnModel model = fixture_model();
    const SentimentLexicons lex = make_lexicons({"good", "great"}, {"bad", "dull"});
    const std::vector<EvalText> texts{
        text_of(vocab, "good but bad"),              // 2 > -1: match
        text_of(vocab, "the film is great but dull"),  // (0.5) vs (0.5): tie, mismatch
        text_of(vocab, "good great bad dull"),       // mean(2, 0.5)=1.25 > mean(-1, 0.5)=-0.25: match
        text_of(vocab, "the film is good"),          // no negative word: skipped
    };
    const Attributor attributor =
        table_attributor(vocab, {{"good", 2.0}, {"great", 0.5}, {"bad", -1.0}, {"dull", 0.5}});
    const EvalReport report = interpretability(model, texts, lex, attributor, 1, Execution::serial);
    EXPECT_EQ(report.processed, 3u);
    EXPECT_EQ(report.skipped, 1u);
    EXPECT_EQ(report.items[0].field("match"), 1.0);
    EXPECT_EQ(report.items[1].field("match"), 0.0);
    EXPECT_EQ(report.items[2].field("positive_mean"), 1.25);
    EXPECT_EQ(report.items[2].field("negative_mean"), -0.25);
    EXPECT_EQ(report.score("interpretability"), 2.0 / 3.0);
    const std::vector<EvalText> none{texts[3]};
    EXPECT_THROW(interpretability(model, none, lex, attributor, 1), EvalError);
}

TEST(Interpretability, BoundedAndDeterministic) {
    const Vocabulary vocab = fixture_vocab();
    const RnnModel model = fixture_model(Architecture::lstm, 2);
    const SentimentLexicons lex = make_lexicons({"good", "great"}, {"bad", "dull"});
    const auto texts = random_texts(vocab, 8, 80);
    const auto a = interpretability(model, texts, lex, method_attributor(Method::reat), 1);
    const auto b = interpretability(model, texts, lex, method_attributor(Method::reat), 1);
    EXPECT_GE(a.score("interpretability"), 0.0);
    EXPECT_LE(a.score("interpretability"), 1.0);
    EXPECT_EQ(a.score("interpretability"), b.score("interpretability"));
}

TEST(Lexicons, OverlapRejectedAndFilesLoaded) {
    EXPECT_THROW(make_lexicons({"good"}, {"Good"}), EvalError);
    const auto dir = std::filesystem::temp_directory_path() / "reat_lexicon_test";
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "pos.txt") << "# positive\nGood\n\n  great \n";
    std::ofstream(dir / "neg.txt") << "bad\n";
    const SentimentLexicons lex = load_lexicons(dir / "pos.txt", dir / "neg.txt");
    EXPECT_EQ(lex.positive, (std::unordered_set<std::string>{"good", "great"}));
    EXPECT_EQ(lex.negative, (std::unordered_set<std::string>{"bad"}));
    EXPECT_THROW(load_lexicons(dir / "missing.txt", dir / "neg.txt"), EvalError);
    std::filesystem::remove_all(dir);
}

void expect_same_reports(const EvalReport& a, const EvalReport& b) {
    ASSERT_EQ(a.items.size(), b.items.size());
    EXPECT_EQ(a.scores, b.scores);
    EXPECT_EQ(a.processed, b.processed);
    for (std::size_t i = 0; i < a.items.size(); ++i) {
        EXPECT_EQ(a.items[i].skipped, b.items[i].skipped);
        EXPECT_EQ(a.items[i].fields, b.items[i].fields);
    }
}

TEST(Execution, ParallelMatchesSerialBitwise) {
    const Vocabulary vocab = fixture_vocab();
    const SentimentLexicons lex = make_lexicons({"good", "great"}, {"bad", "dull"});
    for (Architecture arch : testing::kArchitectures) {
        const RnnModel model = fixture_model(arch, 12);
        const auto texts = random_texts(vocab, 13, 120);
        for (const Attributor& attr : {method_attributor(Method::reat), method_attributor(Method::occlusion),
                                       random_attributor(7)}) {
            expect_same_reports(faithfulness(model, texts, attr, DeletionUnit::clause, Execution::serial),
                                faithfulness(model, texts, attr, DeletionUnit::clause, Execution::parallel));
            expect_same_reports(interpretability(model, texts, lex, attr, 1, Execution::serial),
                                interpretability(model, texts, lex, attr, 1, Execution::parallel));
            const auto ps = pos_distribution(model, texts, attr, Execution::serial);
            const auto pp = pos_distribution(model, texts, attr, Execution::parallel);
            expect_same_reports(ps.report, pp.report);
        }
        const auto bs = attribute_batch(model, texts, Method::reat, Execution::serial);
        const auto bp = attribute_batch(model, texts, Method::reat, Execution::parallel);
        for (std::size_t i = 0; i < bs.size(); ++i) EXPECT_EQ(bs[i].scores(), bp[i].scores());
    }
}

TEST(Execution, ParallelRethrowsLowestIndexError) {
    const Vocabulary vocab = fixture_vocab();
    const RnnModel model = fixture_model();
    auto texts = random_texts(vocab, 1, 30);
    Attributor bad{"bad", [](const RnnModel&, std::span<const TokenId>, std::span<const Span>, ClassIndex) {
                       return std::vector<double>{};
                   }};
    EXPECT_THROW(faithfulness(model, texts, bad, DeletionUnit::clause, Execution::parallel), EvalError);
}

TEST(Quantile, MatchesSortOracle) {
    Rng rng(17);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> v(1 + rng.below(40));
        for (double& x : v) x = rng.below(4) == 0 ? std::round(rng.uniform(-3, 3)) : rng.uniform(-5, 5);
        std::vector<double> sorted = v;
        std::sort(sorted.begin(), sorted.end());
        for (double p : {0.0, 0.25, 0.5, 0.75, 1.0, rng.uniform()}) {
            const double h = static_cast<double>(sorted.size() - 1) * p;
            const auto lo = static_cast<std::size_t>(std::floor(h));
            const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
            const double expect = sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
            EXPECT_NEAR(quantile(v, p), expect, 1e-14);
        }
    }
    EXPECT_EQ(quantile({4.0}, 0.5), 4.0);
    EXPECT_EQ(quantile({1.0, 2.0, 3.0, 4.0}, 0.25), 1.75);
    EXPECT_THROW(quantile({}, 0.5), std::invalid_argument);
}

TEST(PosDistribution, SingleWordAndOutliers) {
    const Vocabulary vocab = fixture_vocab();
    const RnnModel model = fixture_model();
    const std::vector<EvalText> one{text_of(vocab, "film")};
    const Attributor attr = table_attributor(vocab, {{"film", 0.7}});
    const auto d = pos_distribution(model, one, attr);
    ASSERT_EQ(d.ranked.size(), 1u);
    EXPECT_EQ(d.ranked[0].tag, CoarseTag::noun);
    EXPECT_EQ(d.ranked[0].median, 0.7);
    EXPECT_EQ(d.ranked[0].count, 1u);

    // nouns: 0, 0, 0, 5, 0 -> q1 = q3 = 0, 5 is an outlier
    const std::vector<EvalText> many{text_of(vocab, "film film"), text_of(vocab, "film plot film")};
    const auto e = pos_distribution(model, many, table_attributor(vocab, {{"plot", 5.0}}));
    ASSERT_EQ(e.ranked.size(), 1u);
    EXPECT_EQ(e.ranked[0].median, 0.0);
    EXPECT_EQ(e.ranked[0].outliers, 1u);
    EXPECT_EQ(e.ranked[0].upper_fence, 0.0);
}

TEST(PosDistribution, RankedByMedianAndPermutationInvariant) {
    const Vocabulary vocab = fixture_vocab();
    const RnnModel model = fixture_model(Architecture::bigru, 6);
    auto texts = random_texts(vocab, 21, 50);
    const auto a = pos_distribution(model, texts, method_attributor(Method::reat));
    for (std::size_t i = 1; i < a.ranked.size(); ++i) EXPECT_GE(a.ranked[i - 1].median, a.ranked[i].median);
    Rng rng(2);
    for (std::size_t i = texts.size(); i > 1; --i) std::swap(texts[i - 1], texts[rng.below(i)]);
    const auto b = pos_distribution(model, texts, method_attributor(Method::reat));
    ASSERT_EQ(a.ranked.size(), b.ranked.size());
    for (std::size_t i = 0; i < a.ranked.size(); ++i) {
        EXPECT_EQ(a.ranked[i].tag, b.ranked[i].tag);
        EXPECT_EQ(a.ranked[i].count, b.ranked[i].count);
        EXPECT_EQ(a.ranked[i].median, b.ranked[i].median);
        EXPECT_EQ(a.ranked[i].q1, b.ranked[i].q1);
        EXPECT_EQ(a.ranked[i].q3, b.ranked[i].q3);
        EXPECT_EQ(a.ranked[i].outliers, b.ranked[i].outliers);
        EXPECT_NEAR(a.ranked[i].mean, b.ranked[i].mean, 1e-12);
    }
}

TEST(PosDistribution, UsesExternalTags) {
    const Vocabulary vocab = fixture_vocab();
    const RnnModel model = fixture_model();
    EvalText t = text_of(vocab, "film good");
    t.pos_tags = std::vector<std::string>{"VB", "RB"};
    const std::vector<EvalText> texts{t};
    const auto d = pos_distribution(model, texts, random_attributor(1));
    ASSERT_EQ(d.ranked.size(), 2u);
    EXPECT_TRUE(d.ranked[0].tag == CoarseTag::verb || d.ranked[0].tag == CoarseTag::adv);
}

TEST(Swap, IdentityAbsentAndOutOfVocabulary) {
    const Vocabulary vocab = fixture_vocab();
    const RnnModel model = fixture_model(Architecture::lstm, 5);
    const std::vector<std::string> words{"the", "film", "is", "bad"};

    const SwapReport same = adversarial_swap(model, vocab, words, "bad", {"bad"});
    ASSERT_TRUE(same.applied);
    EXPECT_EQ(same.position, 4u);
    EXPECT_EQ(same.outcomes[0].original_class_probability, same.original_probability);
    EXPECT_FALSE(same.outcomes[0].flipped);
    EXPECT_EQ(same.outcomes[0].score_before, same.outcomes[0].score_after);

    const SwapReport absent = adversarial_swap(model, vocab, words, "terribly", {"extremely"});
    EXPECT_FALSE(absent.applied);
    EXPECT_NE(absent.note.find("does not occur"), std::string::npos);
    EXPECT_TRUE(absent.outcomes.empty());

    const SwapReport oov = adversarial_swap(model, vocab, words, "bad", {"extremely", "good"});
    ASSERT_EQ(oov.outcomes.size(), 2u);
    EXPECT_TRUE(oov.outcomes[0].out_of_vocabulary);
    EXPECT_FALSE(oov.outcomes[1].out_of_vocabulary);
    EXPECT_EQ(oov.warnings.size(), 1u);
    const auto unk = forward(model, std::vector<TokenId>{vocab.lookup("the"), vocab.lookup("film"),
                                                         vocab.lookup("is"), Vocabulary::kUnk});
    EXPECT_EQ(oov.outcomes[0].original_class_probability, unk.probabilities[oov.original_predicted]);
}

TEST(Swap, AfterProbabilityMatchesDirectForward) {
    const Vocabulary vocab = fixture_vocab();
    for (Architecture arch : testing::kArchitectures) {
        const RnnModel model = fixture_model(arch, 8);
        const std::vector<std::string> words{"the", "plot", "is", "dull", "but", "good"};
        const SwapReport r = adversarial_swap(model, vocab, words, "dull", {"great", "bad"});
        for (const SwapOutcome& o : r.outcomes) {
            auto swapped = words;
            swapped[3] = o.replacement;
            const ForwardTrace t = forward(model, vocab.encode(swapped));
            EXPECT_NEAR(o.probability, t.probabilities[t.predicted()], 1e-12);
            EXPECT_EQ(o.flipped, t.predicted() != r.original_predicted);
        }
    }
}

TEST(RandomAttributor, DependsOnTextNotOrder) {
    const Attributor a = random_attributor(4);
    const RnnModel model = fixture_model();
    const std::vector<TokenId> x{2, 3, 4}, y{4, 3, 2};
    const auto spans = word_spans(3);
    EXPECT_EQ(a.score(model, x, spans, 0), a.score(model, x, spans, 0));
    EXPECT_NE(a.score(model, x, spans, 0), a.score(model, y, spans, 0));
    EXPECT_NE(a.score(model, x, spans, 0), random_attributor(5).score(model, x, spans, 0));
}

TEST(Output, ReportRecords) {
    const Vocabulary vocab = fixture_vocab();
    const RnnModel model = fixture_model();
    const std::vector<EvalText> texts{text_of(vocab, "good . bad"), text_of(vocab, "good")};
    EvalReport report = faithfulness(model, texts, constant_attributor(), DeletionUnit::sentence);
    report.dataset_id = "fixture";
    std::ostringstream out;
    write_report(out, report);
    const std::string s = out.str();
    EXPECT_EQ(s.rfind("#report\tfaithfulness-sentence\tfixture\t-\tconstant\t1\t1\t0\n", 0), 0u);
    EXPECT_NE(s.find("score\tfaithfulness\t"), std::string::npos);
    EXPECT_NE(s.find("item\t1\tskipped:"), std::string::npos);
    std::ostringstream table;
    write_summary(table, {report});
    EXPECT_NE(table.str().find("faithfulness-sentence"), std::string::npos);
}

}  // namespace
}  // namespace reat
