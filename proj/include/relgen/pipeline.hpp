#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "relgen/corpus.hpp"
#include "relgen/decoder.hpp"
#include "relgen/eval.hpp"
#include "relgen/highlight.hpp"
#include "relgen/scoring.hpp"

namespace relgen {

enum class ScorerKind { weights, bigram, uniform };

ScorerKind scorer_kind_from_string(const std::string& s);
const char* to_string(ScorerKind kind);

struct RunConfig {
    std::filesystem::path triples;
    std::filesystem::path dataset;
    std::filesystem::path weights;  // required when scorer == weights

    ScorerKind scorer = ScorerKind::weights;
    double alpha = BigramScorer::kDefaultAlpha;

    HighlightMode oh_mode = HighlightMode::specific_colour;
    int os_k = kDefaultSubjectTopK;  // kAllSubjects for every segment
    DecodeMode rtg_mode = DecodeMode::restricted;
    int beam_width = 3;
    Aggregation aggregation = Aggregation::max;
    bool renormalize_after_mask = false;
    bool sampling = false;  // sample to 3 distinct relations instead of beam decoding
    std::optional<uint64_t> seed;
    bool pair_within_topk = false;  // objects drawn from the selected subjects only
    bool save_highlights = false;

    int jobs = 1;
    std::filesystem::path out_dir;  // empty: nothing written
};

// Throws ErrorKind::invalid_argument on bad enum values, beam_width < 1,
// os_k < 1 (other than kAllSubjects), or a missing seed when oh_mode is
// random_colour or sampling is on.
void validate(const RunConfig& cfg);

struct PipelineResult {
    std::vector<PredictionRecord> predictions;
    EvalReport report;
};

// Per image: select subjects -> candidate pairs -> highlight -> decode each
// pair -> aggregate; then evaluate against ground truth. Images are
// processed across `cfg.jobs` threads; outputs are ordered by image_id so
// the schedule never changes results. Stage errors are annotated with the
// image id. Writes predictions.jsonl and report.json (plus highlights/ when
// requested) under cfg.out_dir if set.
PipelineResult run_pipeline(const Dataset& dataset, const Corpus& corpus,
                            const Vocabulary& vocab, const PrefixTrie& trie,
                            const Scorer& scorer, const RunConfig& cfg);

// Loads corpus/dataset/weights from cfg paths, builds the scorer, runs.
PipelineResult run_from_config(const RunConfig& cfg);

std::unique_ptr<Scorer> make_scorer(const RunConfig& cfg, const Corpus& corpus,
                                    const Vocabulary& vocab);

struct AblationRow {
    std::string axis;   // "rtg" | "oh" | "os"
    std::string name;   // row key within the axis, e.g. "unrestricted", "grey", "3"
    std::string label;  // display name for the table
    double mean_recall_percent = 0.0;
};

// Row keys: rtg:restricted rtg:unrestricted | oh:none oh:grey oh:random
// oh:specific | os:1 os:3 os:5 os:7 os:all. Empty selection = full grid
// (11 rows). Each row re-runs the pipeline with exactly one axis changed
// from `base`; the unrestricted row decodes with the bigram scorer, since
// the triple-weight scorer's support never leaves the corpus language.
std::vector<AblationRow> run_ablation(const RunConfig& base,
                                      const std::vector<std::string>& row_keys = {});

std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace relgen
