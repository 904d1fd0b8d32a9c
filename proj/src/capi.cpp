#include "relgen.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "relgen/corpus.hpp"
#include "relgen/decoder.hpp"
#include "relgen/error.hpp"
#include "relgen/eval.hpp"
#include "relgen/highlight.hpp"
#include "relgen/pipeline.hpp"
#include "relgen/synth.hpp"
#include "relgen/tokenizer.hpp"
#include "relgen/trie.hpp"

using nlohmann::json;

struct relgen_workspace {
    relgen::Corpus corpus;
    relgen::Vocabulary vocab;
    relgen::PrefixTrie trie;
    std::filesystem::path triples_path;

    std::optional<relgen::Dataset> dataset;
    std::filesystem::path dataset_path;

    // Scorer instance for decode calls, plus the settings it was built from
    // (run/ablate rebuild from these so config overrides compose cleanly).
    std::unique_ptr<relgen::Scorer> scorer;
    relgen::ScorerKind scorer_kind = relgen::ScorerKind::weights;
    std::filesystem::path weights_path;
    double alpha = relgen::BigramScorer::kDefaultAlpha;
};

namespace {

std::string& tl_error() {
    thread_local std::string message;
    return message;
}

relgen_status status_of(relgen::ErrorKind kind) {
    switch (kind) {
        case relgen::ErrorKind::io: return RELGEN_ERR_IO;
        case relgen::ErrorKind::parse: return RELGEN_ERR_PARSE;
        case relgen::ErrorKind::invalid_argument: return RELGEN_ERR_INVALID;
        case relgen::ErrorKind::state: return RELGEN_ERR_STATE;
    }
    return RELGEN_ERR_INTERNAL;
}

template <typename F>
relgen_status guarded(F&& f) {
    try {
        f();
        tl_error().clear();
        return RELGEN_OK;
    } catch (const relgen::Error& e) {
        tl_error() = e.what();
        return status_of(e.kind());
    } catch (const json::exception& e) {
        tl_error() = e.what();
        return RELGEN_ERR_PARSE;
    } catch (const std::exception& e) {
        tl_error() = e.what();
        return RELGEN_ERR_INTERNAL;
    } catch (...) {
        tl_error() = "unknown error";
        return RELGEN_ERR_INTERNAL;
    }
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void require(bool ok, const char* what) {
    if (!ok) relgen::throw_invalid(what);
}

json parse_json(const char* text, const char* what) {
    require(text != nullptr, what);
    json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) relgen::throw_parse(std::string(what) + " is not valid JSON");
    return j;
}

uint64_t seed_from_json(const json& value) {
    if (value.is_number_unsigned()) return value.get<uint64_t>();
    if (value.is_number_integer()) {
        int64_t v = value.get<int64_t>();
        if (v < 0) relgen::throw_invalid("seed must be non-negative");
        return static_cast<uint64_t>(v);
    }
    relgen::throw_invalid("seed must be an integer");
}

int subject_count_from_json(const json& value) {
    if (value.is_string()) {
        if (value.get<std::string>() == "all") return relgen::kAllSubjects;
        relgen::throw_invalid("os_k must be an integer or \"all\"");
    }
    if (!value.is_number_integer()) relgen::throw_invalid("os_k must be an integer or \"all\"");
    return value.get<int>();
}

// Applies the JSON run-config keys over `cfg` (which carries the workspace
// defaults). Unknown keys are an error.
void apply_run_config(const json& j, relgen::RunConfig& cfg) {
    require(j.is_object(), "config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key == "scorer") {
            cfg.scorer = relgen::scorer_kind_from_string(value.get<std::string>());
        } else if (key == "alpha") {
            cfg.alpha = value.get<double>();
        } else if (key == "weights") {
            cfg.weights = value.get<std::string>();
        } else if (key == "oh_mode") {
            cfg.oh_mode = relgen::highlight_mode_from_string(value.get<std::string>());
        } else if (key == "os_k") {
            cfg.os_k = subject_count_from_json(value);
        } else if (key == "rtg_mode") {
            cfg.rtg_mode = relgen::decode_mode_from_string(value.get<std::string>());
        } else if (key == "beam_width") {
            cfg.beam_width = value.get<int>();
        } else if (key == "aggregation") {
            cfg.aggregation = relgen::aggregation_from_string(value.get<std::string>());
        } else if (key == "renormalize") {
            cfg.renormalize_after_mask = value.get<bool>();
        } else if (key == "sampling") {
            cfg.sampling = value.get<bool>();
        } else if (key == "seed") {
            cfg.seed = seed_from_json(value);
        } else if (key == "pair_within_topk") {
            cfg.pair_within_topk = value.get<bool>();
        } else if (key == "save_highlights") {
            cfg.save_highlights = value.get<bool>();
        } else if (key == "jobs") {
            cfg.jobs = value.get<int>();
        } else if (key == "out") {
            cfg.out_dir = value.get<std::string>();
        } else {
            relgen::throw_invalid("unknown config key \"" + key + "\"");
        }
    }
}

relgen::RunConfig workspace_config(const relgen_workspace& ws) {
    relgen::RunConfig cfg;
    cfg.triples = ws.triples_path;
    cfg.dataset = ws.dataset_path;
    cfg.weights = ws.weights_path;
    cfg.scorer = ws.scorer_kind;
    cfg.alpha = ws.alpha;
    return cfg;
}

const relgen::Dataset& require_dataset(const relgen_workspace& ws) {
    if (!ws.dataset) relgen::throw_state("no dataset loaded");
    return *ws.dataset;
}

}  // namespace

extern "C" {

const char* relgen_status_name(relgen_status status) {
    switch (status) {
        case RELGEN_OK: return "ok";
        case RELGEN_ERR_IO: return "io_error";
        case RELGEN_ERR_PARSE: return "parse_error";
        case RELGEN_ERR_INVALID: return "invalid_argument";
        case RELGEN_ERR_STATE: return "state_error";
        case RELGEN_ERR_INTERNAL: return "internal_error";
    }
    return "unknown";
}

const char* relgen_last_error(void) { return tl_error().c_str(); }

void relgen_string_free(char* s) { std::free(s); }

relgen_status relgen_workspace_open(const char* triples_path, relgen_workspace** out) {
    return guarded([&] {
        require(triples_path != nullptr, "triples_path is required");
        require(out != nullptr, "out pointer is required");
        auto ws = std::make_unique<relgen_workspace>();
        ws->triples_path = triples_path;
        ws->corpus = relgen::load_corpus(ws->triples_path);
        ws->vocab = relgen::Vocabulary::build(ws->corpus);
        ws->trie = relgen::PrefixTrie::build(ws->corpus, ws->vocab);
        *out = ws.release();
    });
}

void relgen_workspace_close(relgen_workspace* ws) { delete ws; }

relgen_status relgen_workspace_info(const relgen_workspace* ws, char** json_out) {
    return guarded([&] {
        require(ws != nullptr, "workspace is required");
        require(json_out != nullptr, "out pointer is required");
        json info = {
            {"triples", ws->corpus.triples.size()},
            {"objects", ws->corpus.objects.size()},
            {"relations", ws->corpus.relations.size()},
            {"excluded_relations", ws->corpus.excluded_names},
            {"dropped_excluded", ws->corpus.dropped_excluded},
            {"vocab_size", ws->vocab.size()},
            {"trie",
             {{"nodes", ws->trie.node_count()},
              {"edges", ws->trie.edge_count()},
              {"terminals", ws->trie.terminal_count()},
              {"max_depth", ws->trie.max_depth()}}},
        };
        if (ws->dataset) {
            info["dataset_images"] = ws->dataset->records.size();
            info["dropped_gt_relations"] = ws->dataset->dropped_gt_relations;
        }
        *json_out = dup_string(info.dump(2) + "\n");
    });
}

relgen_status relgen_trie_dump(const relgen_workspace* ws, char** json_out) {
    return guarded([&] {
        require(ws != nullptr, "workspace is required");
        require(json_out != nullptr, "out pointer is required");
        *json_out = dup_string(ws->trie.dump_json(ws->vocab));
    });
}

relgen_status relgen_vocab_dump(const relgen_workspace* ws, char** json_out) {
    return guarded([&] {
        require(ws != nullptr, "workspace is required");
        require(json_out != nullptr, "out pointer is required");
        *json_out = dup_string(ws->vocab.to_json());
    });
}

relgen_status relgen_workspace_load_dataset(relgen_workspace* ws, const char* dataset_path) {
    return guarded([&] {
        require(ws != nullptr, "workspace is required");
        require(dataset_path != nullptr, "dataset_path is required");
        ws->dataset = relgen::load_dataset(dataset_path, ws->corpus);
        ws->dataset_path = dataset_path;
    });
}

relgen_status relgen_workspace_set_scorer(relgen_workspace* ws, const char* scorer_json) {
    return guarded([&] {
        require(ws != nullptr, "workspace is required");
        json j = parse_json(scorer_json, "scorer_json");
        require(j.is_object() && j.contains("kind"), "scorer config needs a \"kind\"");

        relgen::ScorerKind kind = relgen::scorer_kind_from_string(j["kind"].get<std::string>());
        std::filesystem::path weights_path;
        double alpha = relgen::BigramScorer::kDefaultAlpha;
        for (const auto& [key, value] : j.items()) {
            if (key == "kind") continue;
            if (key == "path" && kind == relgen::ScorerKind::weights)
                weights_path = value.get<std::string>();
            else if (key == "alpha" && kind == relgen::ScorerKind::bigram)
                alpha = value.get<double>();
            else
                relgen::throw_invalid("unknown scorer config key \"" + key + "\"");
        }

        relgen::RunConfig cfg;
        cfg.scorer = kind;
        cfg.weights = weights_path;
        cfg.alpha = alpha;
        if (!(alpha > 0.0)) relgen::throw_invalid("alpha must be > 0");
        ws->scorer = relgen::make_scorer(cfg, ws->corpus, ws->vocab);
        ws->scorer_kind = kind;
        ws->weights_path = weights_path;
        ws->alpha = alpha;
    });
}

relgen_status relgen_decode(const relgen_workspace* ws, const char* options_json,
                            char** json_out) {
    return guarded([&] {
        require(ws != nullptr, "workspace is required");
        require(json_out != nullptr, "out pointer is required");
        if (!ws->scorer) relgen::throw_state("no scorer configured");
        json j = parse_json(options_json, "options_json");
        require(j.is_object(), "options must be a JSON object");

        relgen::ImageContext ctx;
        relgen::DecoderConfig dc;
        bool sampling = false;
        bool have_seed = false;
        int distinct = relgen::kDefaultTopKRelations;
        for (const auto& [key, value] : j.items()) {
            if (key == "image_id") ctx.image_id = value.get<std::string>();
            else if (key == "subject") ctx.subject_instance = value.get<int32_t>();
            else if (key == "object") ctx.object_instance = value.get<int32_t>();
            else if (key == "beam") dc.beam_width = value.get<int>();
            else if (key == "max_len") dc.max_len = value.get<int>();
            else if (key == "mode") dc.mode = relgen::decode_mode_from_string(value.get<std::string>());
            else if (key == "renormalize") dc.renormalize_after_mask = value.get<bool>();
            else if (key == "sampling") sampling = value.get<bool>();
            else if (key == "seed") { dc.seed = seed_from_json(value); have_seed = true; }
            else if (key == "distinct_relations") distinct = value.get<int>();
            else relgen::throw_invalid("unknown decode option \"" + key + "\"");
        }
        require(j.contains("image_id"), "decode options need an \"image_id\"");
        if (sampling && !have_seed) relgen::throw_invalid("sampling requires a seed");

        std::vector<relgen::ScoredSequence> sequences;
        bool shortfall = false;
        if (sampling) {
            relgen::SampleResult r =
                relgen::sample_sequences(*ws->scorer, ctx, ws->trie, ws->corpus, dc, distinct);
            sequences = std::move(r.draws);
            shortfall = r.shortfall;
        } else {
            sequences = relgen::beam_search(*ws->scorer, ctx, &ws->trie, dc);
        }

        json out = {{"image_id", ctx.image_id},
                    {"mode", relgen::to_string(dc.mode)},
                    {"sequences", json::array()}};
        if (sampling) out["shortfall"] = shortfall;
        for (const relgen::ScoredSequence& seq : sequences) {
            json s = {{"tokens", seq.tokens},
                      {"text", relgen::detokenize(seq.tokens, ws->vocab)},
                      {"logprob", seq.logprob},
                      {"prob", std::exp(seq.logprob)},
                      {"valid", relgen::validate_sequence(ws->trie, seq.tokens)},
                      {"eos", seq.ended_with_eos}};
            if (seq.triple_id) s["triple_id"] = *seq.triple_id;
            else s["triple_id"] = nullptr;
            out["sequences"].push_back(std::move(s));
        }
        *json_out = dup_string(out.dump(2) + "\n");
    });
}

relgen_status relgen_run(const relgen_workspace* ws, const char* config_json,
                         char** report_json_out) {
    return guarded([&] {
        require(ws != nullptr, "workspace is required");
        require(report_json_out != nullptr, "out pointer is required");
        const relgen::Dataset& dataset = require_dataset(*ws);

        relgen::RunConfig cfg = workspace_config(*ws);
        if (config_json && *config_json)
            apply_run_config(parse_json(config_json, "config_json"), cfg);

        std::unique_ptr<relgen::Scorer> scorer =
            relgen::make_scorer(cfg, ws->corpus, ws->vocab);
        relgen::PipelineResult result =
            relgen::run_pipeline(dataset, ws->corpus, ws->vocab, ws->trie, *scorer, cfg);
        *report_json_out = dup_string(relgen::report_to_json(result.report, ws->corpus));
    });
}

relgen_status relgen_eval(const relgen_workspace* ws, const char* predictions_path,
                          char** report_json_out) {
    return guarded([&] {
        require(ws != nullptr, "workspace is required");
        require(predictions_path != nullptr, "predictions_path is required");
        require(report_json_out != nullptr, "out pointer is required");
        const relgen::Dataset& dataset = require_dataset(*ws);

        std::vector<relgen::PredictionRecord> predictions =
            relgen::load_predictions(predictions_path);
        relgen::EvalReport report = relgen::mean_recall(predictions, dataset.records);
        *report_json_out = dup_string(relgen::report_to_json(report, ws->corpus));
    });
}

relgen_status relgen_ablate(const relgen_workspace* ws, const char* config_json,
                            char** json_out) {
    return guarded([&] {
        require(ws != nullptr, "workspace is required");
        require(json_out != nullptr, "out pointer is required");
        require_dataset(*ws);

        std::vector<std::string> rows;
        relgen::RunConfig cfg = workspace_config(*ws);
        if (config_json && *config_json) {
            json j = parse_json(config_json, "config_json");
            require(j.is_object(), "config must be a JSON object");
            if (j.contains("rows")) {
                for (const json& row : j["rows"]) rows.push_back(row.get<std::string>());
                j.erase("rows");
            }
            apply_run_config(j, cfg);
        }

        std::vector<relgen::AblationRow> result = relgen::run_ablation(cfg, rows);
        json out = {{"rows", json::array()}, {"table", relgen::ablation_table(result)}};
        for (const relgen::AblationRow& row : result) {
            out["rows"].push_back({{"axis", row.axis},
                                   {"name", row.name},
                                   {"label", row.label},
                                   {"mean_recall_percent", row.mean_recall_percent}});
        }
        *json_out = dup_string(out.dump(2) + "\n");
    });
}

relgen_status relgen_highlight_file(const char* image_path, const char* segmap_path,
                                    int32_t subject_instance, int32_t object_instance,
                                    const char* mode, uint64_t seed, const char* output_path) {
    return guarded([&] {
        require(image_path != nullptr, "image_path is required");
        require(segmap_path != nullptr, "segmap_path is required");
        require(mode != nullptr, "mode is required");
        require(output_path != nullptr, "output_path is required");

        relgen::RgbImage image = relgen::load_ppm(image_path);
        relgen::SegmentMap map = relgen::load_segmap(segmap_path);
        relgen::RgbImage out = relgen::apply_highlight(
            image, map, subject_instance, object_instance,
            relgen::highlight_mode_from_string(mode), seed);
        relgen::save_ppm(out, output_path);
    });
}

relgen_status relgen_synth(const char* config_json, char** json_out) {
    return guarded([&] {
        require(json_out != nullptr, "out pointer is required");
        relgen::SynthConfig cfg;
        json j = parse_json(config_json, "config_json");
        require(j.is_object(), "config must be a JSON object");
        for (const auto& [key, value] : j.items()) {
            if (key == "seed") cfg.seed = seed_from_json(value);
            else if (key == "images") cfg.images = value.get<int>();
            else if (key == "width") cfg.width = value.get<int>();
            else if (key == "height") cfg.height = value.get<int>();
            else if (key == "out_dir") cfg.out_dir = value.get<std::string>();
            else relgen::throw_invalid("unknown synth config key \"" + key + "\"");
        }

        relgen::SynthSummary summary = relgen::generate_synthetic_dataset(cfg);
        json out = {{"images", summary.images},
                    {"triples", summary.triples},
                    {"objects", summary.objects},
                    {"relations", summary.relations},
                    {"out_dir", cfg.out_dir.string()}};
        *json_out = dup_string(out.dump(2) + "\n");
    });
}

}  // extern "C"
