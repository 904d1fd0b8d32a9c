#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "relgen/corpus.hpp"
#include "relgen/scoring.hpp"
#include "relgen/trie.hpp"

namespace relgen {

enum class DecodeMode { restricted, unrestricted };

DecodeMode decode_mode_from_string(const std::string& s);
const char* to_string(DecodeMode mode);

struct DecoderConfig {
    int beam_width = 3;
    // 0 resolves to trie max depth + 1; a concrete value is required for
    // unrestricted decoding without a trie.
    int max_len = 0;
    DecodeMode mode = DecodeMode::restricted;
    // Beam scores use the raw masked conditionals by default; this option
    // renormalizes over the allowed set at every step instead.
    bool renormalize_after_mask = false;
    uint64_t seed = 0;  // sampling only
};

struct ScoredSequence {
    TokenSequence tokens;
    double logprob = 0.0;  // sum of the per-step conditionals actually used
    std::optional<TripleId> triple_id;
    bool ended_with_eos = false;
};

// Beam search over the scorer, intersected with the trie's allowed-next sets
// in restricted mode. Returns at most beam_width completed sequences sorted
// by logprob descending, ties broken by ascending lexicographic token order.
// Restricted mode requires a non-empty trie and throws "unreachable
// language" when every allowed root token scores -inf.
std::vector<ScoredSequence> beam_search(const Scorer& scorer, const ImageContext& ctx,
                                        const PrefixTrie* trie, const DecoderConfig& cfg);

struct SampleResult {
    std::vector<ScoredSequence> draws;  // in draw order, duplicates retained
    bool shortfall = false;             // cap hit before k distinct relations
};

inline constexpr int kMaxSampleDraws = 256;

// Ancestral sampling over the masked, renormalized conditionals, restricted
// mode only. Draws until the resolved triples cover `distinct_relations`
// relation classes or kMaxSampleDraws is hit.
SampleResult sample_sequences(const Scorer& scorer, const ImageContext& ctx,
                              const PrefixTrie& trie, const Corpus& corpus,
                              const DecoderConfig& cfg, int distinct_relations);

// True iff `seq` is a complete triple path of the trie.
bool validate_sequence(const PrefixTrie& trie, const TokenSequence& seq);

}  // namespace relgen
