#include "relgen/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "relgen/error.hpp"
#include "relgen/rng.hpp"

namespace relgen {

DecodeMode decode_mode_from_string(const std::string& s) {
    if (s == "restricted") return DecodeMode::restricted;
    if (s == "unrestricted") return DecodeMode::unrestricted;
    throw_invalid("unknown decode mode \"" + s + "\"");
}

const char* to_string(DecodeMode mode) {
    return mode == DecodeMode::restricted ? "restricted" : "unrestricted";
}

namespace {

struct BeamItem {
    TokenSequence tokens;
    double logprob = 0.0;
    PrefixTrie::NodeId node = PrefixTrie::kRoot;
};

// logprob descending, ties by ascending lexicographic token order.
template <typename T>
bool better(const T& a, const T& b) {
    if (a.logprob != b.logprob) return a.logprob > b.logprob;
    return a.tokens < b.tokens;
}

double logsumexp(const LogProbVector& raw, const std::vector<TokenId>& allowed) {
    double hi = kLogZero;
    for (TokenId t : allowed) hi = std::max(hi, raw[static_cast<size_t>(t)]);
    if (is_log_zero(hi)) return kLogZero;
    double sum = 0.0;
    for (TokenId t : allowed) {
        double x = raw[static_cast<size_t>(t)];
        if (!is_log_zero(x)) sum += std::exp(x - hi);
    }
    return hi + std::log(sum);
}

int resolve_max_len(const PrefixTrie* trie, const DecoderConfig& cfg) {
    if (cfg.max_len > 0) return cfg.max_len;
    if (!trie || trie->empty())
        throw_invalid("max_len is required when no trie is available");
    return trie->max_depth() + 1;
}

void check_config(const ImageContext& ctx, const PrefixTrie* trie, const DecoderConfig& cfg) {
    if (cfg.beam_width < 1) throw_invalid("beam_width must be >= 1");
    if (ctx.subject_instance == ctx.object_instance && ctx.subject_instance != 0)
        throw_invalid("subject and object instance must differ");
    if (cfg.mode == DecodeMode::restricted && (trie == nullptr || trie->empty()))
        throw_invalid("restricted decoding requires a non-empty trie");
}

}  // namespace

std::vector<ScoredSequence> beam_search(const Scorer& scorer, const ImageContext& ctx,
                                        const PrefixTrie* trie, const DecoderConfig& cfg) {
    check_config(ctx, trie, cfg);
    const bool restricted = cfg.mode == DecodeMode::restricted;
    const int max_len = resolve_max_len(trie, cfg);
    const int vocab_size = scorer.vocab_size();

    std::vector<TokenId> all_tokens;
    if (!restricted) {
        all_tokens.resize(static_cast<size_t>(vocab_size));
        for (int i = 0; i < vocab_size; ++i) all_tokens[static_cast<size_t>(i)] = i;
    }

    std::vector<BeamItem> live{BeamItem{}};
    std::vector<ScoredSequence> completed;
    bool first_step = true;

    while (!live.empty()) {
        std::vector<BeamItem> extensions;
        for (const BeamItem& item : live) {
            LogProbVector raw = scorer.score_next(ctx, item.tokens);
            if (static_cast<int>(raw.size()) != vocab_size)
                throw_invalid("scorer returned a vector of the wrong size");
            const std::vector<TokenId> allowed =
                restricted ? trie->allowed_next(item.node) : all_tokens;

            double shift = 0.0;
            if (restricted && cfg.renormalize_after_mask) {
                shift = logsumexp(raw, allowed);
                if (is_log_zero(shift)) shift = 0.0;  // no finite candidate; loop skips them all
            }

            bool any_finite = false;
            for (TokenId tok : allowed) {
                double s = raw[static_cast<size_t>(tok)];
                if (is_log_zero(s)) continue;
                any_finite = true;
                s -= shift;
                if (tok == kEosToken) {
                    ScoredSequence seq{item.tokens, item.logprob + s, std::nullopt, true};
                    if (restricted) seq.triple_id = trie->terminal(item.node);
                    completed.push_back(std::move(seq));
                } else {
                    BeamItem next{item.tokens, item.logprob + s, 0};
                    next.tokens.push_back(tok);
                    if (restricted) next.node = *trie->child(item.node, tok);
                    extensions.push_back(std::move(next));
                }
            }
            if (first_step && restricted && !any_finite)
                throw_state("unreachable language: every allowed root token has probability 0");
        }
        first_step = false;

        std::sort(extensions.begin(), extensions.end(), better<BeamItem>);
        if (static_cast<int>(extensions.size()) > cfg.beam_width)
            extensions.resize(static_cast<size_t>(cfg.beam_width));

        live.clear();
        for (BeamItem& item : extensions) {
            if (static_cast<int>(item.tokens.size()) >= max_len) {
                // Length cap: unrestricted sequences finish truncated;
                // restricted prefixes can only finish at a terminal, so they
                // are abandoned.
                if (!restricted)
                    completed.push_back(
                        ScoredSequence{std::move(item.tokens), item.logprob, std::nullopt, false});
            } else {
                live.push_back(std::move(item));
            }
        }
    }

    std::sort(completed.begin(), completed.end(), better<ScoredSequence>);
    if (static_cast<int>(completed.size()) > cfg.beam_width)
        completed.resize(static_cast<size_t>(cfg.beam_width));
    return completed;
}

SampleResult sample_sequences(const Scorer& scorer, const ImageContext& ctx,
                              const PrefixTrie& trie, const Corpus& corpus,
                              const DecoderConfig& cfg, int distinct_relations) {
    if (cfg.mode != DecodeMode::restricted) throw_invalid("sampling is restricted-mode only");
    if (distinct_relations < 1) throw_invalid("distinct relation target must be >= 1");
    if (trie.empty()) throw_invalid("sampling requires a non-empty trie");
    if (ctx.subject_instance == ctx.object_instance && ctx.subject_instance != 0)
        throw_invalid("subject and object instance must differ");

    Lcg64 rng(cfg.seed, "sample");
    SampleResult result;
    std::set<ClassId> seen_relations;

    while (static_cast<int>(result.draws.size()) < kMaxSampleDraws &&
           static_cast<int>(seen_relations.size()) < distinct_relations) {
        TokenSequence tokens;
        double logprob = 0.0;
        PrefixTrie::NodeId node = trie.root();

        for (;;) {
            LogProbVector raw = scorer.score_next(ctx, tokens);
            std::vector<TokenId> allowed = trie.allowed_next(node);
            double shift = logsumexp(raw, allowed);
            if (is_log_zero(shift)) {
                if (tokens.empty())
                    throw_state(
                        "unreachable language: every allowed root token has probability 0");
                throw_state("sampling reached a dead end at prefix of length " +
                            std::to_string(tokens.size()));
            }

            // Ancestral draw over the renormalized allowed set, ascending
            // token id, first bucket whose cumulative mass exceeds u.
            double u = rng.next_double();
            double acc = 0.0;
            TokenId chosen = -1;
            double chosen_logprob = 0.0;
            for (TokenId tok : allowed) {
                double s = raw[static_cast<size_t>(tok)];
                if (is_log_zero(s)) continue;
                double p = std::exp(s - shift);
                acc += p;
                chosen = tok;
                chosen_logprob = s - shift;
                if (u < acc) break;
            }
            logprob += chosen_logprob;
            if (chosen == kEosToken) {
                result.draws.push_back(
                    ScoredSequence{tokens, logprob, trie.terminal(node), true});
                break;
            }
            tokens.push_back(chosen);
            node = *trie.child(node, chosen);
        }

        const ScoredSequence& drawn = result.draws.back();
        seen_relations.insert(corpus.triples[static_cast<size_t>(*drawn.triple_id)].relation);
    }

    result.shortfall = static_cast<int>(seen_relations.size()) < distinct_relations;
    return result;
}

bool validate_sequence(const PrefixTrie& trie, const TokenSequence& seq) {
    return trie.is_terminal_path(seq);
}

}  // namespace relgen
