#include "relgen/scoring.hpp"

#include <cmath>

#include <json.hpp>

#include "io_util.hpp"
#include "relgen/error.hpp"

namespace relgen {

using nlohmann::json;

bool is_normalized(const LogProbVector& lp, double tol) {
    double sum = 0.0;
    for (double x : lp) {
        if (x > 0.0) return false;
        if (!is_log_zero(x) && std::isnan(x)) return false;
        sum += is_log_zero(x) ? 0.0 : std::exp(x);
    }
    return std::abs(sum - 1.0) <= tol;
}

UniformScorer::UniformScorer(int vocab_size) : vocab_size_(vocab_size) {
    if (vocab_size < 1) throw_invalid("vocabulary must be non-empty");
    log_uniform_ = -std::log(static_cast<double>(vocab_size));
}

LogProbVector UniformScorer::score_next(const ImageContext&, const TokenSequence&) const {
    return LogProbVector(static_cast<size_t>(vocab_size_), log_uniform_);
}

TripleWeightScorer::TripleWeightScorer(const Corpus& corpus, const Vocabulary& vocab,
                                       WeightMap weights)
    : weights_(std::move(weights)), vocab_size_(vocab.size()) {
    sequences_.reserve(corpus.triples.size());
    for (const Triple& t : corpus.triples)
        sequences_.push_back(tokenize(corpus.triple_text(t.id), vocab));
    for (const auto& [image_id, image_weights] : weights_) {
        for (const auto& [triple_id, w] : image_weights) {
            if (triple_id < 0 || triple_id >= static_cast<TripleId>(sequences_.size()))
                throw_invalid("weights for " + image_id + " reference unknown triple " +
                              std::to_string(triple_id));
            if (!(w > 0.0))
                throw_invalid("weights for " + image_id + " must be positive");
        }
    }
    for (TripleId t = 0; t < static_cast<TripleId>(sequences_.size()); ++t)
        uniform_fallback_.emplace(t, 1.0);
}

const TripleWeightScorer::ImageWeights* TripleWeightScorer::weights_for(
    const std::string& image_id) const {
    auto it = weights_.find(image_id);
    if (it != weights_.end()) return &it->second;
    return &uniform_fallback_;
}

LogProbVector TripleWeightScorer::score_next(const ImageContext& ctx,
                                             const TokenSequence& prefix) const {
    const ImageWeights& weights = *weights_for(ctx.image_id);
    LogProbVector lp(static_cast<size_t>(vocab_size_), kLogZero);

    std::vector<double> mass(static_cast<size_t>(vocab_size_), 0.0);
    double eos_mass = 0.0;
    double total = 0.0;
    for (const auto& [triple_id, w] : weights) {
        const TokenSequence& seq = sequences_[static_cast<size_t>(triple_id)];
        if (seq.size() < prefix.size()) continue;
        if (!std::equal(prefix.begin(), prefix.end(), seq.begin())) continue;
        if (seq.size() == prefix.size()) {
            eos_mass += w;
        } else {
            mass[static_cast<size_t>(seq[prefix.size()])] += w;
        }
        total += w;
    }

    if (total == 0.0) {
        // Off-language prefix: no triple extends it. Stay total with a
        // uniform distribution.
        double log_uniform = -std::log(static_cast<double>(vocab_size_));
        return LogProbVector(static_cast<size_t>(vocab_size_), log_uniform);
    }

    for (size_t i = 0; i < mass.size(); ++i) {
        if (mass[i] > 0.0) lp[i] = std::log(mass[i] / total);
    }
    if (eos_mass > 0.0) lp[kEosToken] = std::log(eos_mass / total);
    return lp;
}

TripleWeightScorer::WeightMap TripleWeightScorer::load_weights(
    const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw_parse(path.string() + ": " + e.what());
    }
    if (!j.is_object()) throw_parse(path.string() + ": expected an object of image ids");
    WeightMap weights;
    for (const auto& [image_id, entry] : j.items()) {
        if (!entry.is_object())
            throw_parse(path.string() + ": weights for " + image_id + " must be an object");
        ImageWeights image_weights;
        for (const auto& [key, value] : entry.items()) {
            TripleId triple_id = 0;
            try {
                triple_id = static_cast<TripleId>(std::stol(key));
            } catch (const std::exception&) {
                throw_parse(path.string() + ": bad triple id \"" + key + "\" for " + image_id);
            }
            if (!value.is_number())
                throw_parse(path.string() + ": weight for " + image_id + "/" + key +
                            " must be a number");
            image_weights.emplace(triple_id, value.get<double>());
        }
        weights.emplace(image_id, std::move(image_weights));
    }
    return weights;
}

void TripleWeightScorer::save_weights(const WeightMap& weights,
                                      const std::filesystem::path& path) {
    json j = json::object();
    for (const auto& [image_id, image_weights] : weights) {
        json entry = json::object();
        for (const auto& [triple_id, w] : image_weights)
            entry[std::to_string(triple_id)] = w;
        j[image_id] = std::move(entry);
    }
    write_file(path, j.dump(2) + "\n");
}

BigramScorer::BigramScorer(const Corpus& corpus, const Vocabulary& vocab, double alpha)
    : alpha_(alpha), vocab_size_(vocab.size()) {
    if (corpus.triples.empty()) throw_invalid("empty corpus");
    if (!(alpha > 0.0)) throw_invalid("alpha must be > 0");
    counts_.assign(static_cast<size_t>(vocab_size_),
                   std::vector<int64_t>(static_cast<size_t>(vocab_size_), 0));
    row_totals_.assign(static_cast<size_t>(vocab_size_), 0);
    for (const Triple& t : corpus.triples) {
        TokenSequence seq = tokenize(corpus.triple_text(t.id), vocab);
        TokenId prev = kBosToken;
        for (TokenId tok : seq) {
            ++counts_[static_cast<size_t>(prev)][static_cast<size_t>(tok)];
            ++row_totals_[static_cast<size_t>(prev)];
            prev = tok;
        }
        ++counts_[static_cast<size_t>(prev)][kEosToken];
        ++row_totals_[static_cast<size_t>(prev)];
    }
}

LogProbVector BigramScorer::score_next(const ImageContext&, const TokenSequence& prefix) const {
    TokenId prev = prefix.empty() ? kBosToken : prefix.back();
    if (prev < 0 || prev >= vocab_size_) throw_invalid("prefix token out of range");
    const auto& row = counts_[static_cast<size_t>(prev)];
    double denom = static_cast<double>(row_totals_[static_cast<size_t>(prev)]) +
                   alpha_ * static_cast<double>(vocab_size_);
    LogProbVector lp(static_cast<size_t>(vocab_size_), 0.0);
    for (size_t i = 0; i < lp.size(); ++i)
        lp[i] = std::log((static_cast<double>(row[i]) + alpha_) / denom);
    return lp;
}

}  // namespace relgen
