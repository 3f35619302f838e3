#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "reat/pos_tags.hpp"
#include "reat/rnn.hpp"

namespace reat {

/// Token <-> index map. Index 0 is <pad>, 1 is <unk>; every other index is
/// dense and assigned in insertion order.
class Vocabulary {
public:
    static constexpr TokenId kPad = 0;
    static constexpr TokenId kUnk = 1;
    static constexpr std::string_view kPadToken = "<pad>";
    static constexpr std::string_view kUnkToken = "<unk>";

    Vocabulary();

    /// Builds from the tokens of `texts` in first-occurrence order and freezes.
    static Vocabulary build(const std::vector<std::vector<std::string>>& texts);
    /// Restores a vocabulary from its index-ordered token list (as stored in
    /// a model file). The first two entries must be the reserved tokens.
    static Vocabulary from_tokens(std::vector<std::string> tokens);

    TokenId add(const std::string& token);
    void freeze() noexcept { frozen_ = true; }
    bool frozen() const noexcept { return frozen_; }

    bool contains(const std::string& token) const { return index_.contains(token); }
    /// Index of `token`, or kUnk.
    TokenId lookup(const std::string& token) const;
    const std::string& token(TokenId id) const { return tokens_.at(id); }
    std::size_t size() const noexcept { return tokens_.size(); }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

    std::vector<TokenId> encode(const std::vector<std::string>& tokens) const;

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
    bool frozen_ = false;
};

// ---------------------------------------------------------------------------
// Model file
//
// All integers little-endian.
//   offset 0   char[4]  magic "REAT"
//          4   u16      format version (kModelFormatVersion)
//          6   u8       architecture (0 GRU, 1 LSTM, 2 BiGRU)
//          7   u8       reserved, 0
//          8   u32      embedding dim d
//         12   u32      hidden dim d'
//         16   u32      class count C
//         20   u32      vocabulary size V
//         24   V x { u32 byte length, UTF-8 bytes }   tokens in index order
//              u64      weight count N
//              N x f64  IEEE-754 binary64 weights in RnnModel::parameter_blocks() order
//              u32      CRC-32 (zlib polynomial) of every preceding byte
// ---------------------------------------------------------------------------

inline constexpr std::uint16_t kModelFormatVersion = 1;

enum class ModelFileErrorKind { io, bad_magic, version_mismatch, crc_mismatch, shape_mismatch };

class ModelFileError : public std::runtime_error {
public:
    ModelFileError(ModelFileErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ModelFileErrorKind kind() const noexcept { return kind_; }

private:
    ModelFileErrorKind kind_;
};

struct StoredModel {
    RnnModel model;
    Vocabulary vocab;
};

std::vector<std::uint8_t> encode_model(const RnnModel& model, const Vocabulary& vocab);
StoredModel decode_model(const std::vector<std::uint8_t>& bytes);

void save_model(const RnnModel& model, const Vocabulary& vocab, const std::filesystem::path& path);
StoredModel load_model(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// TSV datasets: "label<TAB>space-separated tokens[<TAB>space-separated tags]"
// Blank lines are ignored.
// ---------------------------------------------------------------------------

struct LabeledText {
    ClassIndex label = 0;
    std::vector<std::string> tokens;
    std::optional<std::vector<std::string>> pos_tags;  // raw external tags, same length as tokens

    friend bool operator==(const LabeledText&, const LabeledText&) = default;
};

class DatasetError : public std::runtime_error {
public:
    DatasetError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct DatasetOptions {
    std::size_t max_len = 0;  // 0 keeps every text; otherwise longer texts are skipped
};

struct Dataset {
    std::vector<LabeledText> texts;
    std::size_t skipped_long = 0;
};

Dataset parse_dataset(std::istream& in, const DatasetOptions& options = {});
Dataset load_dataset(const std::filesystem::path& path, const DatasetOptions& options = {});
void write_dataset(std::ostream& out, const std::vector<LabeledText>& texts);
void save_dataset(const std::filesystem::path& path, const std::vector<LabeledText>& texts);

/// Loads "token v1 ... vd" lines into the embedding rows of tokens present in
/// `vocab`. Returns the number of rows overwritten.
std::size_t load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, RnnModel& model);

}  // namespace reat
