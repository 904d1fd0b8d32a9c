#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "relgen/corpus.hpp"
#include "relgen/decoder.hpp"

namespace relgen {

struct RelationScore {
    ClassId relation = 0;
    double probability = 0.0;
};

// Per-image prediction: up to k distinct relations, probability
// non-increasing, never an excluded class.
struct PredictionRecord {
    std::string image_id;
    std::vector<RelationScore> relations;
    bool shortfall = false;  // fewer than k distinct relations were reachable
};

enum class Aggregation { max, sum };

Aggregation aggregation_from_string(const std::string& s);
const char* to_string(Aggregation agg);

inline constexpr int kDefaultTopKRelations = 3;

// Folds the scored sequences of one image (across all its subject/object
// pairs) into a relation ranking. Every sequence contributes
// exp(logprob) to its resolved triple's relation; a relation's probability
// is the max (or sum, clamped to 1) over its contributions. Relations are
// ranked by probability descending, ties by ascending id; the top k distinct
// survive.
PredictionRecord aggregate_relations(const std::string& image_id,
                                     const std::vector<ScoredSequence>& sequences,
                                     const PrefixTrie& trie, const Corpus& corpus,
                                     int k = kDefaultTopKRelations,
                                     Aggregation agg = Aggregation::max);

struct EvalReport {
    std::map<ClassId, double> per_class_recall;  // classes with >= 1 GT occurrence
    double mean_recall = 0.0;                    // unweighted mean over evaluated classes, [0, 1]
    int images = 0;
    int classes_evaluated = 0;
};

// Macro-averaged per-class hit rate: recall_r = |{images: r in GT and r
// predicted}| / |{images: r in GT}| over classes occurring in ground truth.
// Images without a prediction record count as empty predictions; a
// prediction for an image outside `records` is an error.
EvalReport mean_recall(const std::vector<PredictionRecord>& predictions,
                       const std::vector<ImageRecord>& records);

// predictions.jsonl: {"image_id","relations":[[id,prob],...],"shortfall":bool}
void save_predictions(const std::vector<PredictionRecord>& predictions,
                      const std::filesystem::path& path);
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path);

// report.json with recalls in percent, keyed by relation name.
std::string report_to_json(const EvalReport& report, const Corpus& corpus);

}  // namespace relgen
