#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "relgen/corpus.hpp"
#include "relgen/tokenizer.hpp"

namespace relgen {

// Log of probability zero. IEEE -inf saturates under addition, which is the
// behaviour masking needs; sum_logprob guards the one case (-inf + -inf)
// explicitly for clarity.
inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline bool is_log_zero(double x) { return x == kLogZero; }
inline double sum_logprob(double a, double b) {
    if (is_log_zero(a) || is_log_zero(b)) return kLogZero;
    return a + b;
}

// Length-V vector of per-token log-probabilities; entries <= 0 or -inf and
// exp-sum within 1e-6 of 1.
using LogProbVector = std::vector<double>;

bool is_normalized(const LogProbVector& lp, double tol = 1e-6);

// The conditioning side of next-token scoring: which image, which segment
// pair, plus free-form tags (e.g. class names present). Deterministic
// scorers may use any subset of it.
struct ImageContext {
    std::string image_id;
    int subject_instance = 0;
    int object_instance = 0;
    std::vector<std::string> feature_tags;
};

// Next-token scorer contract. Implementations must be total, pure functions
// of (context, prefix, construction state) and immutable after construction.
class Scorer {
public:
    virtual ~Scorer() = default;
    virtual LogProbVector score_next(const ImageContext& ctx, const TokenSequence& prefix) const = 0;
    virtual int vocab_size() const = 0;
};

class UniformScorer final : public Scorer {
public:
    explicit UniformScorer(int vocab_size);
    LogProbVector score_next(const ImageContext&, const TokenSequence&) const override;
    int vocab_size() const override { return vocab_size_; }

private:
    int vocab_size_;
    double log_uniform_;
};

// Analytic scorer whose full-sequence probabilities are known in closed
// form: conditioned on an image, the probability of continuing a prefix with
// token x is the total weight of triples extending prefix+x over the total
// weight of triples extending prefix, and P(triple t) telescopes to
// w_t / sum(w). Images without weights fall back to uniform weights over all
// triples; prefixes outside the corpus language fall back to a uniform
// distribution so the scorer stays total.
class TripleWeightScorer final : public Scorer {
public:
    using ImageWeights = std::map<TripleId, double>;
    using WeightMap = std::map<std::string, ImageWeights>;

    TripleWeightScorer(const Corpus& corpus, const Vocabulary& vocab, WeightMap weights);

    LogProbVector score_next(const ImageContext& ctx, const TokenSequence& prefix) const override;
    int vocab_size() const override { return vocab_size_; }

    // weights.json: {"image_id": {"triple_id": weight}}
    static WeightMap load_weights(const std::filesystem::path& path);
    static void save_weights(const WeightMap& weights, const std::filesystem::path& path);

private:
    const ImageWeights* weights_for(const std::string& image_id) const;

    std::vector<TokenSequence> sequences_;  // tokenized triple text, index = TripleId
    WeightMap weights_;
    ImageWeights uniform_fallback_;
    int vocab_size_;
};

// Additive-smoothed bigram model over corpus sequences framed BOS ... EOS:
//   P(x | prev) = (count(prev, x) + alpha) / (sum_y count(prev, y) + alpha * V)
// Ignores the image context. Stands in for an unconstrained generative
// model: chaining can cross triples and leave the corpus language.
class BigramScorer final : public Scorer {
public:
    BigramScorer(const Corpus& corpus, const Vocabulary& vocab, double alpha = kDefaultAlpha);

    LogProbVector score_next(const ImageContext&, const TokenSequence& prefix) const override;
    int vocab_size() const override { return vocab_size_; }
    double alpha() const { return alpha_; }

    static constexpr double kDefaultAlpha = 0.1;

private:
    std::vector<std::vector<int64_t>> counts_;  // counts_[prev][next]
    std::vector<int64_t> row_totals_;
    double alpha_;
    int vocab_size_;
};

}  // namespace relgen
