#include "relgen/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "io_util.hpp"
#include "relgen/error.hpp"
#include "relgen/rng.hpp"
#include "relgen/trie.hpp"

namespace relgen {

ScorerKind scorer_kind_from_string(const std::string& s) {
    if (s == "weights") return ScorerKind::weights;
    if (s == "bigram") return ScorerKind::bigram;
    if (s == "uniform") return ScorerKind::uniform;
    throw_invalid("unknown scorer \"" + s + "\"");
}

const char* to_string(ScorerKind kind) {
    switch (kind) {
        case ScorerKind::weights: return "weights";
        case ScorerKind::bigram: return "bigram";
        case ScorerKind::uniform: return "uniform";
    }
    return "?";
}

void validate(const RunConfig& cfg) {
    if (cfg.beam_width < 1) throw_invalid("beam_width must be >= 1");
    if (cfg.os_k != kAllSubjects && cfg.os_k < 1) throw_invalid("os_k must be >= 1 or all");
    if (!(cfg.alpha > 0.0)) throw_invalid("alpha must be > 0");
    if (cfg.jobs < 1) throw_invalid("jobs must be >= 1");
    if (!cfg.seed && cfg.oh_mode == HighlightMode::random_colour)
        throw_invalid("oh_mode=random requires a seed");
    if (!cfg.seed && cfg.sampling) throw_invalid("sampling requires a seed");
}

std::unique_ptr<Scorer> make_scorer(const RunConfig& cfg, const Corpus& corpus,
                                    const Vocabulary& vocab) {
    switch (cfg.scorer) {
        case ScorerKind::weights: {
            TripleWeightScorer::WeightMap weights;
            if (!cfg.weights.empty()) weights = TripleWeightScorer::load_weights(cfg.weights);
            return std::make_unique<TripleWeightScorer>(corpus, vocab, std::move(weights));
        }
        case ScorerKind::bigram:
            return std::make_unique<BigramScorer>(corpus, vocab, cfg.alpha);
        case ScorerKind::uniform:
            return std::make_unique<UniformScorer>(vocab.size());
    }
    throw_invalid("unknown scorer kind");
}

namespace {

// Deterministic per-pair seed so parallel schedules and row order never
// change what a pair sees.
uint64_t pair_seed(uint64_t base, const std::string& image_id, int32_t subject, int32_t object) {
    return base ^ Lcg64::fnv1a64(image_id + ":" + std::to_string(subject) + ":" +
                                 std::to_string(object));
}

std::string highlight_name(const std::string& image_id, const SubjectObjectPair& pair) {
    return image_id + "_s" + std::to_string(pair.subject) + "_o" + std::to_string(pair.object) +
           ".ppm";
}

PredictionRecord process_image(const ImageRecord& record, const Corpus& corpus,
                               const PrefixTrie& trie, const Scorer& scorer,
                               const RunConfig& cfg) {
    SegmentMap segmap = load_segmap(record.segmap_path);
    RgbImage image = load_ppm(record.image_path);
    if (image.width != segmap.width || image.height != segmap.height)
        throw_invalid("image and segment map dimensions differ");

    std::vector<Segment> segments = extract_segments(segmap);
    std::vector<Segment> selected = select_subjects(segments, cfg.os_k);
    std::vector<SubjectObjectPair> pairs =
        candidate_pairs(selected, segments, cfg.pair_within_topk);

    const uint64_t base_seed = cfg.seed.value_or(0);
    const bool restricted = cfg.rtg_mode == DecodeMode::restricted;

    std::vector<ScoredSequence> sequences;
    for (const SubjectObjectPair& pair : pairs) {
        uint64_t seed = pair_seed(base_seed, record.image_id, pair.subject, pair.object);
        RgbImage hl = apply_highlight(image, segmap, pair.subject, pair.object, cfg.oh_mode, seed);
        if (cfg.save_highlights && !cfg.out_dir.empty())
            save_ppm(hl, cfg.out_dir / "highlights" / highlight_name(record.image_id, pair));

        ImageContext ctx;
        ctx.image_id = record.image_id;
        ctx.subject_instance = pair.subject;
        ctx.object_instance = pair.object;
        for (int32_t instance : {pair.subject, pair.object}) {
            for (const Segment& seg : segments) {
                if (seg.instance_id == instance && seg.class_id >= 0 &&
                    seg.class_id < corpus.objects.size())
                    ctx.feature_tags.push_back(corpus.objects.name(seg.class_id));
            }
        }

        DecoderConfig dc;
        dc.beam_width = cfg.beam_width;
        dc.mode = cfg.rtg_mode;
        dc.renormalize_after_mask = cfg.renormalize_after_mask;
        dc.seed = seed;

        if (cfg.sampling) {
            SampleResult sampled =
                sample_sequences(scorer, ctx, trie, corpus, dc, kDefaultTopKRelations);
            sequences.insert(sequences.end(), sampled.draws.begin(), sampled.draws.end());
        } else {
            std::vector<ScoredSequence> decoded = beam_search(scorer, ctx, &trie, dc);
            sequences.insert(sequences.end(), decoded.begin(), decoded.end());
        }
    }

    if (!restricted) {
        // Unconstrained generation may leave the corpus language; such
        // sequences cannot name a relation and are dropped.
        std::vector<ScoredSequence> valid;
        for (ScoredSequence& seq : sequences) {
            if (validate_sequence(trie, seq.tokens)) valid.push_back(std::move(seq));
        }
        sequences = std::move(valid);
    }

    return aggregate_relations(record.image_id, sequences, trie, corpus, kDefaultTopKRelations,
                               cfg.aggregation);
}

}  // namespace

PipelineResult run_pipeline(const Dataset& dataset, const Corpus& corpus, const Vocabulary&,
                            const PrefixTrie& trie, const Scorer& scorer, const RunConfig& cfg) {
    validate(cfg);

    const size_t n = dataset.records.size();
    std::vector<PredictionRecord> predictions(n);
    std::atomic<size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;

    auto worker = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= n) return;
            const ImageRecord& record = dataset.records[i];
            try {
                predictions[i] = process_image(record, corpus, trie, scorer, cfg);
            } catch (const Error& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error)
                    first_error = std::make_exception_ptr(
                        Error(e.kind(), "image " + record.image_id + ": " + e.what()));
                return;
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    int jobs = std::min<int>(cfg.jobs, static_cast<int>(std::max<size_t>(n, 1)));
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<size_t>(jobs));
        for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
        for (std::thread& t : threads) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    PipelineResult result;
    result.predictions = std::move(predictions);
    result.report = mean_recall(result.predictions, dataset.records);

    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        save_predictions(result.predictions, cfg.out_dir / "predictions.jsonl");
        write_file(cfg.out_dir / "report.json", report_to_json(result.report, corpus));
    }
    return result;
}

PipelineResult run_from_config(const RunConfig& cfg) {
    validate(cfg);
    Corpus corpus = load_corpus(cfg.triples);
    Vocabulary vocab = Vocabulary::build(corpus);
    PrefixTrie trie = PrefixTrie::build(corpus, vocab);
    Dataset dataset = load_dataset(cfg.dataset, corpus);
    std::unique_ptr<Scorer> scorer = make_scorer(cfg, corpus, vocab);
    return run_pipeline(dataset, corpus, vocab, trie, *scorer, cfg);
}

namespace {

struct RowSpec {
    const char* key;
    const char* axis;
    const char* name;
    const char* label;
};

constexpr RowSpec kGrid[] = {
    {"rtg:unrestricted", "rtg", "unrestricted", "Unrestricted model"},
    {"rtg:restricted", "rtg", "restricted", "Restricted model"},
    {"oh:none", "oh", "none", "Without processing"},
    {"oh:grey", "oh", "grey", "Grey processing"},
    {"oh:random", "oh", "random", "Random colour highlight"},
    {"oh:specific", "oh", "specific", "Specific colour highlight"},
    {"os:1", "os", "1", "Select top 1 subject"},
    {"os:3", "os", "3", "Select top 3 subjects"},
    {"os:5", "os", "5", "Select top 5 subjects"},
    {"os:7", "os", "7", "Select top 7 subjects"},
    {"os:all", "os", "all", "Select all subjects"},
};

RunConfig row_config(const RunConfig& base, const RowSpec& row) {
    RunConfig cfg = base;
    cfg.out_dir.clear();
    cfg.save_highlights = false;
    std::string axis(row.axis), name(row.name);
    if (axis == "rtg") {
        cfg.rtg_mode = decode_mode_from_string(name);
        // The triple-weight scorer never leaves the corpus language, so the
        // unconstrained row decodes with the bigram model instead.
        if (cfg.rtg_mode == DecodeMode::unrestricted) cfg.scorer = ScorerKind::bigram;
    } else if (axis == "oh") {
        cfg.oh_mode = highlight_mode_from_string(name);
        if (cfg.oh_mode == HighlightMode::random_colour && !cfg.seed) cfg.seed = 0;
    } else {
        cfg.os_k = name == "all" ? kAllSubjects : std::stoi(name);
    }
    return cfg;
}

}  // namespace

std::vector<AblationRow> run_ablation(const RunConfig& base,
                                      const std::vector<std::string>& row_keys) {
    validate(base);
    std::vector<const RowSpec*> rows;
    if (row_keys.empty()) {
        for (const RowSpec& row : kGrid) rows.push_back(&row);
    } else {
        for (const std::string& key : row_keys) {
            const RowSpec* found = nullptr;
            for (const RowSpec& row : kGrid) {
                if (key == row.key) found = &row;
            }
            if (!found) throw_invalid("unknown ablation row \"" + key + "\"");
            rows.push_back(found);
        }
    }

    Corpus corpus = load_corpus(base.triples);
    Vocabulary vocab = Vocabulary::build(corpus);
    PrefixTrie trie = PrefixTrie::build(corpus, vocab);
    Dataset dataset = load_dataset(base.dataset, corpus);

    std::vector<AblationRow> out;
    out.reserve(rows.size());
    for (const RowSpec* row : rows) {
        RunConfig cfg = row_config(base, *row);
        validate(cfg);
        std::unique_ptr<Scorer> scorer = make_scorer(cfg, corpus, vocab);
        PipelineResult result = run_pipeline(dataset, corpus, vocab, trie, *scorer, cfg);
        out.push_back({row->axis, row->name, row->label, 100.0 * result.report.mean_recall});
    }
    return out;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
    size_t label_width = 4;
    for (const AblationRow& row : rows) label_width = std::max(label_width, row.label.size());

    auto upper = [](std::string s) {
        for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        return s;
    };

    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-4s  %-*s  %15s\n", "Type", static_cast<int>(label_width),
                  "Name", "Mean Recall (%)");
    out += buf;
    out += std::string(4, '-') + "  " + std::string(label_width, '-') + "  " +
           std::string(15, '-') + "\n";
    std::string last_axis;
    for (const AblationRow& row : rows) {
        if (!last_axis.empty() && row.axis != last_axis) out += "\n";
        last_axis = row.axis;
        std::snprintf(buf, sizeof(buf), "%-4s  %-*s  %15.2f\n", upper(row.axis).c_str(),
                      static_cast<int>(label_width), row.label.c_str(),
                      row.mean_recall_percent);
        out += buf;
    }
    return out;
}

}  // namespace relgen
