#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "relgen/corpus.hpp"

namespace relgen {

using TokenId = int32_t;

inline constexpr TokenId kBosToken = 0;
inline constexpr TokenId kEosToken = 1;

// Decoder framing only; never produced by tokenizing corpus text.
inline constexpr const char* kBosText = "<bos>";
inline constexpr const char* kEosText = "<eos>";

using TokenSequence = std::vector<TokenId>;

// Closed-vocabulary whitespace tokenizer. Ids are dense: BOS = 0, EOS = 1,
// then every word of every triple text in first-seen corpus order.
class Vocabulary {
public:
    static Vocabulary build(const Corpus& corpus);

    TokenId id(const std::string& word) const;  // throws on unknown word
    std::optional<TokenId> find(const std::string& word) const;
    const std::string& token(TokenId id) const;
    int size() const { return static_cast<int>(tokens_.size()); }

    std::string to_json() const;  // ordered token list, index = id
    static Vocabulary from_json(const std::string& text);
    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path);

    bool operator==(const Vocabulary&) const = default;

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> ids_;
};

TokenSequence tokenize(const std::string& text, const Vocabulary& vocab);
std::string detokenize(const TokenSequence& seq, const Vocabulary& vocab);

// Whitespace-split words of `text`, in order.
std::vector<std::string> split_words(const std::string& text);

}  // namespace relgen
