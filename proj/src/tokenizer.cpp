#include "relgen/tokenizer.hpp"

#include <json.hpp>

#include "io_util.hpp"
#include "relgen/error.hpp"

namespace relgen {

using nlohmann::json;

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) words.push_back(text.substr(start, i - start));
    }
    return words;
}

Vocabulary Vocabulary::build(const Corpus& corpus) {
    if (corpus.triples.empty()) throw_invalid("empty corpus");
    Vocabulary vocab;
    vocab.tokens_ = {kBosText, kEosText};
    vocab.ids_ = {{kBosText, kBosToken}, {kEosText, kEosToken}};
    // Walk triples in corpus order so word ids follow first-seen order.
    for (const Triple& t : corpus.triples) {
        for (const std::string& word : split_words(corpus.triple_text(t.id))) {
            if (word == kBosText || word == kEosText)
                throw_invalid("corpus word collides with reserved token " + word);
            if (!vocab.ids_.count(word)) {
                vocab.ids_.emplace(word, static_cast<TokenId>(vocab.tokens_.size()));
                vocab.tokens_.push_back(word);
            }
        }
    }
    return vocab;
}

TokenId Vocabulary::id(const std::string& word) const {
    auto it = ids_.find(word);
    if (it == ids_.end()) throw_invalid("unknown word \"" + word + "\"");
    return it->second;
}

std::optional<TokenId> Vocabulary::find(const std::string& word) const {
    auto it = ids_.find(word);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
    if (id < 0 || id >= size()) throw_invalid("token id out of range: " + std::to_string(id));
    return tokens_[static_cast<size_t>(id)];
}

std::string Vocabulary::to_json() const {
    return json(tokens_).dump() + "\n";
}

Vocabulary Vocabulary::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw_parse(std::string("vocab: ") + e.what());
    }
    if (!j.is_array() || j.size() < 3) throw_parse("vocab: expected a token array of size >= 3");
    Vocabulary vocab;
    for (const auto& tok : j) {
        if (!tok.is_string()) throw_parse("vocab: tokens must be strings");
        std::string word = tok.get<std::string>();
        if (vocab.ids_.count(word)) throw_parse("vocab: duplicate token \"" + word + "\"");
        vocab.ids_.emplace(word, static_cast<TokenId>(vocab.tokens_.size()));
        vocab.tokens_.push_back(word);
    }
    if (vocab.tokens_[0] != kBosText || vocab.tokens_[1] != kEosText)
        throw_parse("vocab: ids 0/1 must be the reserved BOS/EOS tokens");
    return vocab;
}

void Vocabulary::save(const std::filesystem::path& path) const { write_file(path, to_json()); }

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    return from_json(read_file(path));
}

TokenSequence tokenize(const std::string& text, const Vocabulary& vocab) {
    TokenSequence seq;
    for (const std::string& word : split_words(text)) seq.push_back(vocab.id(word));
    return seq;
}

std::string detokenize(const TokenSequence& seq, const Vocabulary& vocab) {
    std::string out;
    for (size_t i = 0; i < seq.size(); ++i) {
        if (i) out += ' ';
        out += vocab.token(seq[i]);
    }
    return out;
}

}  // namespace relgen
