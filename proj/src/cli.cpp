#include "reat/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "reat/chunker.hpp"
#include "reat/evaluator.hpp"
#include "reat/heatmap.hpp"
#include "reat/model_store.hpp"
#include "reat/toy_corpus.hpp"
#include "reat/trainer.hpp"

namespace reat {

namespace {

namespace fs = std::filesystem;

// Bad flag values or combinations: exit code 1.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<std::string> split_spaces(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

const std::vector<std::string> kMethods{"reat",      "naive",    "vanilla-grad", "integrated-grad",
                                        "grad-input", "occlusion", "omission"};

struct TextInput {
    std::string text;
    std::string tags;
    std::string input;
    std::size_t max_len = 0;

    void add_to(CLI::App* cmd) {
        auto* t = cmd->add_option("--text", text, "Whitespace-tokenized text");
        auto* i = cmd->add_option("--input", input, "TSV dataset (label, text[, tags])");
        t->excludes(i);
        cmd->add_option("--tags", tags, "External POS tags for --text, space-separated");
        cmd->add_option("--max-len", max_len, "Skip dataset texts longer than this (0 keeps all)");
    }

    std::vector<LabeledText> read() const {
        if (!text.empty()) {
            LabeledText t;
            t.tokens = split_spaces(text);
            if (t.tokens.empty()) throw UsageError("--text is empty");
            if (!tags.empty()) {
                t.pos_tags = split_spaces(tags);
                if (t.pos_tags->size() != t.tokens.size())
                    throw UsageError("--tags has " + std::to_string(t.pos_tags->size()) + " tags for " +
                                     std::to_string(t.tokens.size()) + " tokens");
            }
            return {t};
        }
        if (input.empty()) throw UsageError("one of --text or --input is required");
        return load_dataset(input, {max_len}).texts;
    }
};

std::vector<CoarseTag> coarse_tags(const LabeledText& t) {
    if (t.pos_tags) return tag(t.tokens, std::span<const std::string>(*t.pos_tags));
    return tag(t.tokens);
}

std::vector<TokenId> encode_with_warning(const Vocabulary& vocab, const std::vector<std::string>& words,
                                         std::ostream& err) {
    for (const auto& w : words)
        if (!vocab.contains(w)) err << "warning: '" << w << "' is out of vocabulary; using <unk>\n";
    return vocab.encode(words);
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << content;
    if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

std::string join_lines(const std::vector<std::string>& words) {
    std::string s;
    for (const auto& w : words) s += w + "\n";
    return s;
}

// ---------------------------------------------------------------------------

struct GenToy {
    std::uint64_t seed = 0;
    std::string out = ".";
    std::size_t n_train = 2000;
    std::size_t n_test = 400;

    void run(std::ostream& o) const {
        if (n_train == 0 || n_test == 0) throw UsageError("--train and --test must be positive");
        const ToyCorpus corpus = generate_toy_corpus(seed, n_train, n_test);
        fs::create_directories(out);
        save_dataset(fs::path(out) / "train.tsv", corpus.train);
        save_dataset(fs::path(out) / "test.tsv", corpus.test);
        write_text_file(fs::path(out) / "positive.txt", join_lines(corpus.positive_words));
        write_text_file(fs::path(out) / "negative.txt", join_lines(corpus.negative_words));
        o << "wrote " << corpus.train.size() << " train and " << corpus.test.size() << " test texts to " << out
          << "\n";
    }
};

struct Train {
    std::string train_path, dev_path, out_path, embeddings, arch = "gru";
    std::size_t embed_dim = 16, hidden_dim = 32, max_len = 0;
    TrainConfig config;

    void run(std::ostream& o) {
        const Dataset train_data = load_dataset(train_path, {max_len});
        if (train_data.texts.empty()) throw DatasetError(0, "training set '" + train_path + "' has no texts");
        std::vector<std::vector<std::string>> token_lists;
        std::size_t classes = 2;
        for (const auto& t : train_data.texts) {
            token_lists.push_back(t.tokens);
            classes = std::max(classes, t.label + 1);
        }
        const Vocabulary vocab = Vocabulary::build(token_lists);
        auto examples = [&](const std::vector<LabeledText>& texts) {
            std::vector<Example> out;
            for (const auto& t : texts) out.push_back({vocab.encode(t.tokens), t.label});
            return out;
        };
        std::vector<Example> dev;
        if (!dev_path.empty()) dev = examples(load_dataset(dev_path, {max_len}).texts);

        RnnModel init = init_model(parse_architecture(arch), {vocab.size(), embed_dim, hidden_dim, classes}, config.seed);
        if (!embeddings.empty()) o << "loaded " << load_embeddings(embeddings, vocab, init) << " embedding rows\n";
        const TrainResult result = train(init, examples(train_data.texts), dev, config);

        o << "epoch\ttrain_loss\ttrain_acc\tdev_acc\tdev_loss\n";
        char line[160];
        for (const auto& m : result.history) {
            std::snprintf(line, sizeof line, "%d\t%.6g\t%.4f\t%.4f\t%.6g\n", m.epoch, m.train_loss, m.train_accuracy,
                          m.dev_accuracy, m.dev_loss);
            o << line;
        }
        save_model(result.model, vocab, out_path);
        o << "best epoch " << result.best_epoch << "; model written to " << out_path << "\n";
    }
};

struct Attribute {
    std::string model_path, method = "reat", level = "word", target = "predicted", html, out_path;
    std::size_t ig_steps = 50;
    TextInput input;

    void run(std::ostream& o, std::ostream& err) {
        const StoredModel stored = load_model(model_path);
        const Method m = parse_method(method);
        const BaselineOptions options{ig_steps};
        std::ofstream file;
        if (!out_path.empty()) {
            file.open(out_path);
            if (!file) throw std::runtime_error("cannot open '" + out_path + "' for writing");
        }
        std::ostream& records = out_path.empty() ? o : file;
        std::vector<HeatmapSection> sections;

        for (const LabeledText& text : input.read()) {
            const auto ids = encode_with_warning(stored.vocab, text.tokens, err);
            ClassIndex c = 0;
            if (target == "predicted") {
                c = forward(stored.model, ids).predicted();
            } else {
                const auto n = static_cast<std::size_t>(std::stoul(target));
                if (n >= stored.model.output.rows())
                    throw UsageError("--class " + target + " is not below the class count " +
                                     std::to_string(stored.model.output.rows()));
                c = n;
            }
            if (level == "hierarchy") {
                const auto h = hierarchy(stored.model, ids, text.tokens, coarse_tags(text), c, m, true, options);
                for (const AttributionResult* r : h.levels()) write_attribution(records, *r);
                sections.push_back(heatmap_section(h));
                continue;
            }
            std::vector<Span> spans;
            if (level == "word")
                spans = word_spans(ids.size());
            else if (level == "phrase")
                spans = chunk(coarse_tags(text)).spans();
            else
                spans = clauses(text.tokens);
            AttributionResult r = level == "word" ? attribute_words(m, stored.model, ids, c, options)
                                                  : attribute_spans(m, stored.model, ids, spans, c, options);
            label_spans(r, text.tokens);
            write_attribution(records, r);
            sections.push_back(heatmap_section(r, level));
        }
        if (!html.empty()) write_text_file(html, render_heatmap(sections));
    }
};

struct ChunkCommand {
    TextInput input;
    bool show_clauses = false;

    void run(std::ostream& o) {
        bool first = true;
        for (const LabeledText& text : input.read()) {
            if (!first) o << "\n";
            first = false;
            auto print = [&](std::string_view label, const Span& s) {
                o << label << '\t' << s.first << '\t' << s.last << '\t';
                for (std::size_t t = s.first; t <= s.last; ++t) o << (t > s.first ? " " : "") << text.tokens[t - 1];
                o << '\n';
            };
            for (const auto& c : chunk(coarse_tags(text)).chunks) print(to_string(c.label), c.span);
            if (show_clauses)
                for (const Span& s : clauses(text.tokens)) print("CLAUSE", s);
        }
    }
};

struct EvalCommon {
    std::string model_path, data_path, method = "reat", report_path;
    std::size_t max_len = 0, ig_steps = 50;
    std::uint64_t seed = 0;
    bool serial = false;

    void add_to(CLI::App* cmd, bool with_random) {
        cmd->add_option("--model", model_path, "Model file")->required();
        cmd->add_option("--data", data_path, "TSV dataset")->required();
        std::vector<std::string> methods = kMethods;
        if (with_random) {
            methods.push_back("random");
            methods.push_back("constant");
        }
        cmd->add_option("--method", method, "Attribution method")->check(CLI::IsMember(methods));
        cmd->add_option("--report", report_path, "Write line-oriented records here");
        cmd->add_option("--max-len", max_len, "Skip texts longer than this (0 keeps all)");
        cmd->add_option("--ig-steps", ig_steps, "Integrated-gradients steps")->check(CLI::PositiveNumber);
        cmd->add_option("--seed", seed, "Seed for the random attributor");
        cmd->add_flag("--serial", serial, "Disable per-text parallelism");
    }

    Execution execution() const { return serial ? Execution::serial : Execution::parallel; }

    Attributor attributor(std::uint64_t s) const {
        if (method == "random") return random_attributor(s);
        if (method == "constant") return constant_attributor();
        return method_attributor(parse_method(method), {ig_steps});
    }

    void label(EvalReport& r) const {
        r.dataset_id = fs::path(data_path).filename().string();
        r.model_id = fs::path(model_path).filename().string();
    }

    void write_records(const std::vector<EvalReport>& reports) const {
        if (report_path.empty()) return;
        std::ofstream out(report_path);
        if (!out) throw std::runtime_error("cannot open '" + report_path + "' for writing");
        for (const auto& r : reports) write_report(out, r);
    }
};

struct EvalFaithfulness {
    EvalCommon common;
    std::string unit = "clause";
    std::size_t random_seeds = 1;

    void run(std::ostream& o) {
        const StoredModel stored = load_model(common.model_path);
        const auto texts = make_eval_texts(stored.vocab, load_dataset(common.data_path, {common.max_len}).texts);
        const std::size_t runs = common.method == "random" ? random_seeds : 1;
        std::vector<EvalReport> reports;
        double sum = 0.0;
        for (std::size_t k = 0; k < runs; ++k) {
            EvalReport r = faithfulness(stored.model, texts, common.attributor(common.seed + k),
                                        parse_deletion_unit(unit), common.execution());
            common.label(r);
            sum += r.score("faithfulness");
            reports.push_back(std::move(r));
        }
        write_summary(o, reports);
        if (runs > 1) o << "mean faithfulness over " << runs << " seeds: " << sum / static_cast<double>(runs) << "\n";
        common.write_records(reports);
    }
};

struct EvalInterpretability {
    EvalCommon common;
    std::string positive, negative;
    std::size_t positive_class = kPositiveClass;

    void run(std::ostream& o) {
        const StoredModel stored = load_model(common.model_path);
        if (positive_class >= stored.model.output.rows()) throw UsageError("--positive-class out of range");
        const auto texts = make_eval_texts(stored.vocab, load_dataset(common.data_path, {common.max_len}).texts);
        EvalReport r = interpretability(stored.model, texts, load_lexicons(positive, negative),
                                        common.attributor(common.seed), positive_class, common.execution());
        common.label(r);
        write_summary(o, {r});
        common.write_records({r});
    }
};

struct EvalPos {
    EvalCommon common;

    void run(std::ostream& o) {
        const StoredModel stored = load_model(common.model_path);
        const auto texts = make_eval_texts(stored.vocab, load_dataset(common.data_path, {common.max_len}).texts);
        PosDistribution d = pos_distribution(stored.model, texts, common.attributor(common.seed), common.execution());
        common.label(d.report);
        write_pos_table(o, d);
        common.write_records({d.report});
    }
};

struct Attack {
    std::string model_path, text, word;
    std::vector<std::string> replacements;

    void run(std::ostream& o) {
        const StoredModel stored = load_model(model_path);
        const auto words = split_spaces(text);
        if (words.empty()) throw UsageError("--text is empty");
        write_swap_report(o, adversarial_swap(stored.model, stored.vocab, words, word, replacements));
    }
};

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Additive attribution for recurrent text classifiers"};
    app.name("reat");
    app.require_subcommand(1);

    GenToy gen;
    auto* gen_cmd = app.add_subcommand("gen-toy", "Write the synthetic sentiment corpus and its lexicons");
    gen_cmd->add_option("--seed", gen.seed, "Corpus seed");
    gen_cmd->add_option("--out", gen.out, "Output directory");
    gen_cmd->add_option("--train", gen.n_train, "Training texts");
    gen_cmd->add_option("--test", gen.n_test, "Test texts");

    Train tr;
    auto* train_cmd = app.add_subcommand("train", "Train a classifier on a TSV dataset");
    train_cmd->add_option("--train", tr.train_path, "Training TSV")->required();
    train_cmd->add_option("--dev", tr.dev_path, "Development TSV for snapshot selection");
    train_cmd->add_option("--out", tr.out_path, "Model file to write")->required();
    train_cmd->add_option("--arch", tr.arch, "gru, lstm or bigru")->check(CLI::IsMember({"gru", "lstm", "bigru"}));
    train_cmd->add_option("--embed-dim", tr.embed_dim, "Embedding size")->check(CLI::PositiveNumber);
    train_cmd->add_option("--hidden-dim", tr.hidden_dim, "Hidden size")->check(CLI::PositiveNumber);
    train_cmd->add_option("--epochs", tr.config.epochs, "Epochs")->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--lr", tr.config.learning_rate, "Adam learning rate")->check(CLI::PositiveNumber);
    train_cmd->add_option("--clip", tr.config.clip, "Global gradient-norm clip (<= 0 disables)");
    train_cmd->add_option("--seed", tr.config.seed, "Initialization and shuffling seed");
    train_cmd->add_flag("--freeze-embeddings", tr.config.freeze_embeddings, "Keep embeddings fixed");
    train_cmd->add_option("--embeddings", tr.embeddings, "Pretrained vectors: 'token v1 .. vd' per line");
    train_cmd->add_option("--max-len", tr.max_len, "Skip texts longer than this (0 keeps all)");

    Attribute attr;
    auto* attr_cmd = app.add_subcommand("attribute", "Attribute predictions to words, phrases or clauses");
    attr_cmd->add_option("--model", attr.model_path, "Model file")->required();
    attr_cmd->add_option("--method", attr.method, "Attribution method")->check(CLI::IsMember(kMethods));
    attr_cmd->add_option("--level", attr.level, "word, phrase, clause or hierarchy")
        ->check(CLI::IsMember({"word", "phrase", "clause", "hierarchy"}));
    attr_cmd->add_option("--class", attr.target, "Class index or 'predicted'")
        ->check([](const std::string& v) -> std::string {
            if (v == "predicted") return {};
            if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos || v.size() > 9)
                return "expected a class index or 'predicted'";
            return {};
        });
    attr_cmd->add_option("--html", attr.html, "Write an HTML heatmap here");
    attr_cmd->add_option("--out", attr.out_path, "Write attribution records here instead of stdout");
    attr_cmd->add_option("--ig-steps", attr.ig_steps, "Integrated-gradients steps")->check(CLI::PositiveNumber);
    attr.input.add_to(attr_cmd);

    ChunkCommand ch;
    auto* chunk_cmd = app.add_subcommand("chunk", "Print noun/verb chunks (and optionally clauses)");
    ch.input.add_to(chunk_cmd);
    chunk_cmd->add_flag("--clauses", ch.show_clauses, "Also print the clause partition");

    EvalFaithfulness faith;
    auto* faith_cmd = app.add_subcommand("eval-faithfulness", "Delete the top unit and measure the probability drop");
    faith.common.add_to(faith_cmd, true);
    faith_cmd->add_option("--unit", faith.unit, "sentence or clause")->check(CLI::IsMember({"sentence", "clause"}));
    faith_cmd->add_option("--random-seeds", faith.random_seeds, "Seeds to average for --method random")
        ->check(CLI::PositiveNumber);

    EvalInterpretability interp;
    auto* interp_cmd = app.add_subcommand("eval-interpretability", "Compare positive and negative lexicon scores");
    interp.common.add_to(interp_cmd, true);
    interp_cmd->add_option("--positive", interp.positive, "Positive lexicon")->required();
    interp_cmd->add_option("--negative", interp.negative, "Negative lexicon")->required();
    interp_cmd->add_option("--positive-class", interp.positive_class, "Index of the positive class");

    EvalPos pos;
    auto* pos_cmd = app.add_subcommand("eval-pos", "Score distribution per coarse POS tag");
    pos.common.add_to(pos_cmd, true);

    Attack atk;
    auto* atk_cmd = app.add_subcommand("attack", "Swap a word for alternatives and report the prediction change");
    atk_cmd->add_option("--model", atk.model_path, "Model file")->required();
    atk_cmd->add_option("--text", atk.text, "Whitespace-tokenized text")->required();
    atk_cmd->add_option("--word", atk.word, "Word to replace (first occurrence)")->required();
    atk_cmd->add_option("--replace", atk.replacements, "Comma-separated replacements")->required()->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << "run with --help for usage\n";
        return 1;
    }

    try {
        if (*gen_cmd) gen.run(out);
        if (*train_cmd) tr.run(out);
        if (*attr_cmd) attr.run(out, err);
        if (*chunk_cmd) ch.run(out);
        if (*faith_cmd) faith.run(out);
        if (*interp_cmd) interp.run(out);
        if (*pos_cmd) pos.run(out);
        if (*atk_cmd) atk.run(out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace reat
