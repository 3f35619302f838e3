#include "reat/model_store.hpp"

#include <zlib.h>

#include <bit>
#include <charconv>
#include <fstream>
#include <iterator>

namespace reat {

Vocabulary::Vocabulary() {
    add(std::string(kPadToken));
    add(std::string(kUnkToken));
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& texts) {
    Vocabulary vocab;
    for (const auto& text : texts)
        for (const auto& token : text)
            if (!vocab.contains(token)) vocab.add(token);
    vocab.freeze();
    return vocab;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
    if (tokens.size() < 2 || tokens[0] != kPadToken || tokens[1] != kUnkToken)
        throw std::invalid_argument("vocabulary must start with the reserved <pad> and <unk> tokens");
    Vocabulary vocab;
    for (std::size_t i = 2; i < tokens.size(); ++i) {
        if (vocab.contains(tokens[i])) throw std::invalid_argument("duplicate vocabulary token '" + tokens[i] + "'");
        vocab.add(tokens[i]);
    }
    vocab.freeze();
    return vocab;
}

TokenId Vocabulary::add(const std::string& token) {
    if (frozen_) throw std::logic_error("vocabulary is frozen");
    if (const auto it = index_.find(token); it != index_.end()) return it->second;
    const auto id = static_cast<TokenId>(tokens_.size());
    tokens_.push_back(token);
    index_.emplace(token, id);
    return id;
}

TokenId Vocabulary::lookup(const std::string& token) const {
    const auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
}

std::vector<TokenId> Vocabulary::encode(const std::vector<std::string>& tokens) const {
    std::vector<TokenId> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(lookup(t));
    return ids;
}

namespace {

constexpr char kMagic[4] = {'R', 'E', 'A', 'T'};

class Writer {
public:
    template <typename T>
    void put(T value) {
        using U = std::make_unsigned_t<T>;
        auto bits = static_cast<U>(value);
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            bytes.push_back(static_cast<std::uint8_t>(bits & 0xffu));
            bits = static_cast<U>(bits >> 8);
        }
    }
    void put_f64(double value) { put(std::bit_cast<std::uint64_t>(value)); }
    void put_bytes(std::string_view s) { bytes.insert(bytes.end(), s.begin(), s.end()); }

    std::vector<std::uint8_t> bytes;
};

class Reader {
public:
    Reader(const std::vector<std::uint8_t>& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        std::make_unsigned_t<T> bits = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            bits |= static_cast<std::make_unsigned_t<T>>(static_cast<std::make_unsigned_t<T>>(bytes_[pos_ + i])
                                                          << (8 * i));
        pos_ += sizeof(T);
        return static_cast<T>(bits);
    }
    double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
    std::string get_string(std::size_t n) {
        need(n);
        std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                      bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return s;
    }
    std::size_t remaining() const noexcept { return end_ - pos_; }

private:
    void need(std::size_t n) const {
        if (n > end_ - pos_) throw ModelFileError(ModelFileErrorKind::shape_mismatch, "model payload ends early");
    }

    const std::vector<std::uint8_t>& bytes_;
    std::size_t end_;
    std::size_t pos_ = 0;
};

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks for very large payloads
    while (n > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
        crc = crc32(crc, data, chunk);
        data += chunk;
        n -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::vector<std::uint8_t> encode_model(const RnnModel& model, const Vocabulary& vocab) {
    validate(model);
    const ModelDims dims = model.dims();
    if (vocab.size() != dims.vocab_size)
        throw std::invalid_argument("vocabulary size does not match the embedding table");

    Writer w;
    w.put_bytes(std::string_view(kMagic, 4));
    w.put<std::uint16_t>(kModelFormatVersion);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(model.arch));
    w.put<std::uint8_t>(0);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(dims.embed_dim));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(dims.hidden_dim));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(dims.num_classes));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(dims.vocab_size));
    for (const auto& token : vocab.tokens()) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(token.size()));
        w.put_bytes(token);
    }
    w.put<std::uint64_t>(model.parameter_count());
    for (auto block : model.parameter_blocks())
        for (double x : block) w.put_f64(x);
    w.put<std::uint32_t>(crc_of(w.bytes.data(), w.bytes.size()));
    return std::move(w.bytes);
}

StoredModel decode_model(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4 || !std::equal(kMagic, kMagic + 4, bytes.begin()))
        throw ModelFileError(ModelFileErrorKind::bad_magic, "not a model file (bad magic)");
    if (bytes.size() < 10)
        throw ModelFileError(ModelFileErrorKind::crc_mismatch, "model file truncated");
    const auto version = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
    if (version != kModelFormatVersion)
        throw ModelFileError(ModelFileErrorKind::version_mismatch,
                             "unsupported model format version " + std::to_string(version) + " (expected " +
                                 std::to_string(kModelFormatVersion) + ")");
    const std::size_t payload = bytes.size() - 4;
    const std::uint32_t stored_crc = static_cast<std::uint32_t>(bytes[payload]) |
                                     (static_cast<std::uint32_t>(bytes[payload + 1]) << 8) |
                                     (static_cast<std::uint32_t>(bytes[payload + 2]) << 16) |
                                     (static_cast<std::uint32_t>(bytes[payload + 3]) << 24);
    if (crc_of(bytes.data(), payload) != stored_crc)
        throw ModelFileError(ModelFileErrorKind::crc_mismatch, "model file CRC mismatch (corrupt or truncated)");

    Reader r(bytes, payload);
    r.get_string(4);
    r.get<std::uint16_t>();
    const auto arch_tag = r.get<std::uint8_t>();
    r.get<std::uint8_t>();
    if (arch_tag > static_cast<std::uint8_t>(Architecture::bigru))
        throw ModelFileError(ModelFileErrorKind::shape_mismatch, "unknown architecture tag " + std::to_string(arch_tag));
    ModelDims dims;
    dims.embed_dim = r.get<std::uint32_t>();
    dims.hidden_dim = r.get<std::uint32_t>();
    dims.num_classes = r.get<std::uint32_t>();
    dims.vocab_size = r.get<std::uint32_t>();
    if (dims.embed_dim == 0 || dims.hidden_dim == 0 || dims.num_classes == 0 || dims.vocab_size < 2)
        throw ModelFileError(ModelFileErrorKind::shape_mismatch, "model header declares an empty dimension");

    std::vector<std::string> tokens;
    tokens.reserve(dims.vocab_size);
    for (std::size_t i = 0; i < dims.vocab_size; ++i) {
        const auto len = r.get<std::uint32_t>();
        tokens.push_back(r.get_string(len));
    }

    StoredModel out;
    try {
        out.vocab = Vocabulary::from_tokens(std::move(tokens));
    } catch (const std::invalid_argument& e) {
        throw ModelFileError(ModelFileErrorKind::shape_mismatch, e.what());
    }
    out.model = RnnModel::zeros(static_cast<Architecture>(arch_tag), dims);
    const auto count = r.get<std::uint64_t>();
    if (count != out.model.parameter_count())
        throw ModelFileError(ModelFileErrorKind::shape_mismatch,
                             "weight count " + std::to_string(count) + " does not match declared shapes (" +
                                 std::to_string(out.model.parameter_count()) + ")");
    if (r.remaining() != count * 8)
        throw ModelFileError(ModelFileErrorKind::shape_mismatch, "weight payload length does not match weight count");
    for (auto block : out.model.parameter_blocks())
        for (double& x : block) x = r.get_f64();
    return out;
}

void save_model(const RnnModel& model, const Vocabulary& vocab, const std::filesystem::path& path) {
    const auto bytes = encode_model(model, vocab);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ModelFileError(ModelFileErrorKind::io, "cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ModelFileError(ModelFileErrorKind::io, "write to '" + path.string() + "' failed");
}

StoredModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelFileError(ModelFileErrorKind::io, "cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_model(bytes);
}

namespace {

std::vector<std::string> split_spaces(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\r')) ++i;
        const std::size_t start = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\r') ++i;
        if (i > start) out.emplace_back(s.substr(start, i - start));
    }
    return out;
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += ' ';
        out += parts[i];
    }
    return out;
}

}  // namespace

Dataset parse_dataset(std::istream& in, const DatasetOptions& options) {
    Dataset data;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;

        std::vector<std::string_view> fields;
        std::string_view rest(line);
        for (std::size_t tab; (tab = rest.find('\t')) != std::string_view::npos;) {
            fields.push_back(rest.substr(0, tab));
            rest.remove_prefix(tab + 1);
        }
        fields.push_back(rest);
        if (fields.size() < 2 || fields.size() > 3)
            throw DatasetError(line_no, "expected 'label<TAB>text[<TAB>tags]', got " + std::to_string(fields.size()) +
                                            " field(s)");

        LabeledText text;
        const std::string_view label = fields[0];
        const auto [ptr, ec] = std::from_chars(label.data(), label.data() + label.size(), text.label);
        if (ec != std::errc() || ptr != label.data() + label.size() || label.empty())
            throw DatasetError(line_no, "label '" + std::string(label) + "' is not a non-negative integer");
        text.tokens = split_spaces(fields[1]);
        if (text.tokens.empty()) throw DatasetError(line_no, "empty text");
        if (fields.size() == 3) {
            auto tags = split_spaces(fields[2]);
            if (tags.size() != text.tokens.size())
                throw DatasetError(line_no, std::to_string(tags.size()) + " POS tags for " +
                                                std::to_string(text.tokens.size()) + " tokens");
            text.pos_tags = std::move(tags);
        }
        if (options.max_len > 0 && text.tokens.size() > options.max_len) {
            ++data.skipped_long;
            continue;
        }
        data.texts.push_back(std::move(text));
    }
    return data;
}

Dataset load_dataset(const std::filesystem::path& path, const DatasetOptions& options) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset '" + path.string() + "'");
    return parse_dataset(in, options);
}

void write_dataset(std::ostream& out, const std::vector<LabeledText>& texts) {
    for (const auto& t : texts) {
        out << t.label << '\t' << join(t.tokens);
        if (t.pos_tags) out << '\t' << join(*t.pos_tags);
        out << '\n';
    }
}

void save_dataset(const std::filesystem::path& path, const std::vector<LabeledText>& texts) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    write_dataset(out, texts);
}

std::size_t load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, RnnModel& model) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open embedding file '" + path.string() + "'");
    const std::size_t d = model.embedding.cols();
    std::size_t line_no = 0, loaded = 0;
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        auto parts = split_spaces(line);
        if (parts.empty()) continue;
        if (parts.size() != d + 1)
            throw DatasetError(line_no, "expected a token and " + std::to_string(d) + " values, got " +
                                            std::to_string(parts.size() - 1) + " values");
        if (!vocab.contains(parts[0])) continue;
        auto row = model.embedding.row(vocab.lookup(parts[0]));
        for (std::size_t j = 0; j < d; ++j) {
            const std::string& s = parts[j + 1];
            const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), row[j]);
            if (ec != std::errc() || ptr != s.data() + s.size())
                throw DatasetError(line_no, "bad number '" + s + "'");
        }
        ++loaded;
    }
    return loaded;
}

}  // namespace reat
