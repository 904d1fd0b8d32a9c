// relgen command line: thin shell over the C API in relgen.h. Every
// subcommand assembles a JSON config for the library and prints the
// library's JSON result on stdout; human-oriented extras go to stderr.
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "relgen.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliError {
    int code;
    std::string message;
};

[[noreturn]] void fail(int code, const std::string& message) { throw CliError{code, message}; }

[[noreturn]] void fail_status(relgen_status status) {
    fail(static_cast<int>(status), std::string(relgen_status_name(status)) + ": " +
                                       relgen_last_error());
}

void check(relgen_status status) {
    if (status != RELGEN_OK) fail_status(status);
}

// Owned result string from a char** C API out-parameter.
std::string take_string(char* s) {
    std::string out = s ? s : "";
    relgen_string_free(s);
    return out;
}

struct WorkspaceCloser {
    void operator()(relgen_workspace* ws) const { relgen_workspace_close(ws); }
};
using WorkspacePtr = std::unique_ptr<relgen_workspace, WorkspaceCloser>;

WorkspacePtr open_workspace(const std::string& triples) {
    relgen_workspace* ws = nullptr;
    check(relgen_workspace_open(triples.c_str(), &ws));
    return WorkspacePtr(ws);
}

std::string trim(const std::string& s) {
    size_t begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    size_t end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

// key = value lines; blank lines and # comments ignored. Relative path
// values resolve against the config file's directory.
std::map<std::string, std::string> parse_config_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(RELGEN_ERR_IO, "cannot open config file " + path.string());
    const fs::path base = path.parent_path();

    std::map<std::string, std::string> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string text = trim(line);
        if (text.empty() || text[0] == '#') continue;
        size_t eq = text.find('=');
        if (eq == std::string::npos)
            fail(RELGEN_ERR_PARSE,
                 path.string() + ":" + std::to_string(line_no) + ": expected key = value");
        std::string key = trim(text.substr(0, eq));
        std::string value = trim(text.substr(eq + 1));
        if (key.empty())
            fail(RELGEN_ERR_PARSE, path.string() + ":" + std::to_string(line_no) + ": empty key");
        if (key == "triples" || key == "dataset" || key == "weights" || key == "out") {
            fs::path p(value);
            if (!value.empty() && p.is_relative()) value = (base / p).lexically_normal().string();
        }
        out[key] = value;
    }
    return out;
}

constexpr const char* kConfigKeys[] = {
    "triples", "dataset",  "weights",     "scorer",           "alpha",
    "oh",      "os",       "rtg",         "beam",             "agg",
    "renormalize",  "sampling", "seed", "pair_within_topk", "save_highlights",
    "jobs",    "out",
};

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    fail(RELGEN_ERR_INVALID, key + " must be a boolean, got \"" + value + "\"");
}

uint64_t parse_seed(const std::string& value) {
    try {
        size_t used = 0;
        uint64_t seed = std::stoull(value, &used);
        if (used == value.size()) return seed;
    } catch (const std::exception&) {
    }
    fail(RELGEN_ERR_INVALID, "seed must be a non-negative integer, got \"" + value + "\"");
}

// Merged file + command-line settings for run/ablate/eval.
struct RunSettings {
    std::map<std::string, std::string> values;

    void load_file(const std::string& config_path) {
        for (auto& [key, value] : parse_config_file(config_path)) {
            bool known = false;
            for (const char* k : kConfigKeys) known = known || key == k;
            if (!known) fail(RELGEN_ERR_INVALID, "unknown config key \"" + key + "\"");
            values[key] = value;
        }
    }

    void set(const std::string& key, const std::string& value) { values[key] = value; }
    bool has(const std::string& key) const { return values.count(key) != 0; }
    std::string get(const std::string& key) const {
        auto it = values.find(key);
        return it == values.end() ? "" : it->second;
    }

    std::string require(const std::string& key) const {
        if (!has(key))
            fail(RELGEN_ERR_INVALID, "missing required setting \"" + key +
                                         "\" (flag or config file)");
        return get(key);
    }

    // The library-side config JSON (everything except the workspace paths).
    json library_config() const {
        json cfg = json::object();
        for (const auto& [key, value] : values) {
            if (key == "triples" || key == "dataset") continue;
            if (key == "weights") cfg["weights"] = value;
            else if (key == "scorer") cfg["scorer"] = value;
            else if (key == "alpha") cfg["alpha"] = std::stod(value);
            else if (key == "oh") cfg["oh_mode"] = value;
            else if (key == "os") {
                if (value == "all") cfg["os_k"] = "all";
                else cfg["os_k"] = std::stoi(value);
            } else if (key == "rtg") cfg["rtg_mode"] = value;
            else if (key == "beam") cfg["beam_width"] = std::stoi(value);
            else if (key == "agg") cfg["aggregation"] = value;
            else if (key == "renormalize") cfg["renormalize"] = parse_bool(key, value);
            else if (key == "sampling") cfg["sampling"] = parse_bool(key, value);
            else if (key == "seed") cfg["seed"] = parse_seed(value);
            else if (key == "pair_within_topk") cfg["pair_within_topk"] = parse_bool(key, value);
            else if (key == "save_highlights") cfg["save_highlights"] = parse_bool(key, value);
            else if (key == "jobs") cfg["jobs"] = std::stoi(value);
            else if (key == "out") cfg["out"] = value;
        }
        return cfg;
    }
};

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(RELGEN_ERR_IO, "cannot write " + path.string());
    out << text;
}

// Shared flags for subcommands that run the full pipeline.
void add_run_flags(CLI::App* cmd, RunSettings& settings, std::string& config_path) {
    cmd->add_option("--config", config_path, "key = value config file");
    auto opt = [cmd, &settings](const char* flag, const char* key, const char* help) {
        cmd->add_option_function<std::string>(
            flag, [&settings, key](const std::string& v) { settings.set(key, v); }, help);
    };
    opt("--triples", "triples", "triple corpus (JSON lines)");
    opt("--dataset", "dataset", "dataset manifest (JSON lines)");
    opt("--weights", "weights", "per-image triple weights (JSON)");
    opt("--scorer", "scorer", "weights | bigram | uniform");
    opt("--alpha", "alpha", "bigram smoothing constant");
    opt("--oh", "oh", "highlight mode: none | grey | random | specific");
    opt("--os", "os", "subject count: integer or all");
    opt("--rtg", "rtg", "decode mode: restricted | unrestricted");
    opt("--beam", "beam", "beam width");
    opt("--agg", "agg", "relation aggregation: max | sum");
    opt("--renormalize", "renormalize", "renormalize after masking (bool)");
    opt("--sampling", "sampling", "sample instead of beam decode (bool)");
    opt("--seed", "seed", "run seed");
    opt("--pair-within-topk", "pair_within_topk", "objects only from selected subjects (bool)");
    opt("--save-highlights", "save_highlights", "write highlight images under --out (bool)");
    opt("--jobs", "jobs", "worker threads");
    opt("--out", "out", "output directory");
}

RunSettings finalize_settings(const std::string& config_path, const RunSettings& cli_settings) {
    RunSettings merged;
    if (!config_path.empty()) merged.load_file(config_path);
    for (const auto& [key, value] : cli_settings.values) merged.set(key, value);
    return merged;
}

WorkspacePtr open_run_workspace(const RunSettings& settings, bool need_dataset) {
    WorkspacePtr ws = open_workspace(settings.require("triples"));
    if (need_dataset)
        check(relgen_workspace_load_dataset(ws.get(), settings.require("dataset").c_str()));
    return ws;
}

int run_command(const std::string& config_path, const RunSettings& cli_settings) {
    RunSettings settings = finalize_settings(config_path, cli_settings);
    WorkspacePtr ws = open_run_workspace(settings, /*need_dataset=*/true);
    char* report = nullptr;
    check(relgen_run(ws.get(), settings.library_config().dump().c_str(), &report));
    std::cout << take_string(report);
    return 0;
}

int eval_command(const std::string& config_path, const RunSettings& cli_settings,
                 const std::string& predictions) {
    RunSettings settings = finalize_settings(config_path, cli_settings);
    WorkspacePtr ws = open_run_workspace(settings, /*need_dataset=*/true);
    char* report = nullptr;
    check(relgen_eval(ws.get(), predictions.c_str(), &report));
    std::string text = take_string(report);
    if (settings.has("out")) write_text(fs::path(settings.get("out")) / "report.json", text);
    std::cout << text;
    return 0;
}

int ablate_command(const std::string& config_path, const RunSettings& cli_settings,
                   const std::vector<std::string>& rows) {
    RunSettings settings = finalize_settings(config_path, cli_settings);
    WorkspacePtr ws = open_run_workspace(settings, /*need_dataset=*/true);

    json cfg = settings.library_config();
    cfg.erase("out");  // per-row runs write nothing; the table is written below
    if (!rows.empty()) cfg["rows"] = rows;

    char* result = nullptr;
    check(relgen_ablate(ws.get(), cfg.dump().c_str(), &result));
    std::string text = take_string(result);
    json parsed = json::parse(text);
    std::cerr << parsed["table"].get<std::string>();
    if (settings.has("out")) {
        fs::path out_dir = settings.get("out");
        write_text(out_dir / "ablation.json", text);
        write_text(out_dir / "ablation.txt", parsed["table"].get<std::string>());
    }
    std::cout << text;
    return 0;
}

int build_trie_command(const std::string& triples, const std::string& out_dir) {
    WorkspacePtr ws = open_workspace(triples);
    char* info = nullptr;
    check(relgen_workspace_info(ws.get(), &info));
    std::string info_text = take_string(info);
    if (!out_dir.empty()) {
        char* trie = nullptr;
        check(relgen_trie_dump(ws.get(), &trie));
        write_text(fs::path(out_dir) / "trie.json", take_string(trie));
        char* vocab = nullptr;
        check(relgen_vocab_dump(ws.get(), &vocab));
        write_text(fs::path(out_dir) / "vocab.json", take_string(vocab));
        write_text(fs::path(out_dir) / "info.json", info_text);
    }
    std::cout << info_text;
    return 0;
}

int decode_command(const std::string& triples, const std::string& scorer_kind,
                   const std::string& weights, double alpha, const json& options) {
    WorkspacePtr ws = open_workspace(triples);

    json scorer = {{"kind", scorer_kind}};
    if (scorer_kind == "weights" && !weights.empty()) scorer["path"] = weights;
    if (scorer_kind == "bigram") scorer["alpha"] = alpha;
    check(relgen_workspace_set_scorer(ws.get(), scorer.dump().c_str()));

    char* result = nullptr;
    check(relgen_decode(ws.get(), options.dump().c_str(), &result));
    std::cout << take_string(result);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"prefix-tree constrained relation generation"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "decode a dataset and report mean recall");
    std::string run_config;
    RunSettings run_cli;
    add_run_flags(run, run_cli, run_config);

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate an existing predictions.jsonl");
    std::string eval_config, eval_predictions;
    RunSettings eval_cli;
    add_run_flags(eval, eval_cli, eval_config);
    eval->add_option("--predictions", eval_predictions, "predictions.jsonl path")->required();

    // ablate
    auto* ablate = app.add_subcommand("ablate", "re-run the pipeline across config axes");
    std::string ablate_config;
    RunSettings ablate_cli;
    std::vector<std::string> ablate_rows;
    add_run_flags(ablate, ablate_cli, ablate_config);
    ablate->add_option("--rows", ablate_rows,
                       "row keys, e.g. rtg:unrestricted os:1 (default: full grid)");

    // build-trie
    auto* build = app.add_subcommand("build-trie", "build corpus vocabulary and prefix tree");
    std::string build_triples, build_out;
    build->add_option("--triples", build_triples, "triple corpus (JSON lines)")->required();
    build->add_option("--out", build_out, "directory for trie.json / vocab.json / info.json");

    // decode
    auto* decode = app.add_subcommand("decode", "decode one subject/object pair");
    std::string dec_triples, dec_image, dec_mode = "restricted", dec_scorer = "uniform";
    std::string dec_weights;
    int dec_subject = 0, dec_object = 0, dec_beam = 3, dec_distinct = 3;
    double dec_alpha = 0.1;
    bool dec_renorm = false, dec_sampling = false;
    std::optional<uint64_t> dec_seed;
    decode->add_option("--triples", dec_triples, "triple corpus (JSON lines)")->required();
    decode->add_option("--image-id", dec_image, "image id for the scorer context")->required();
    decode->add_option("--subject", dec_subject, "subject instance id");
    decode->add_option("--object", dec_object, "object instance id");
    decode->add_option("--scorer", dec_scorer, "weights | bigram | uniform");
    decode->add_option("--weights", dec_weights, "weights.json for --scorer weights");
    decode->add_option("--alpha", dec_alpha, "bigram smoothing constant");
    decode->add_option("--beam", dec_beam, "beam width");
    decode->add_option("--mode", dec_mode, "restricted | unrestricted");
    decode->add_flag("--renormalize", dec_renorm, "renormalize after masking");
    decode->add_flag("--sampling", dec_sampling, "ancestral sampling instead of beam");
    decode->add_option("--seed", dec_seed, "sampling seed");
    decode->add_option("--distinct", dec_distinct, "distinct relations to sample");

    // highlight
    auto* highlight = app.add_subcommand("highlight", "write a highlighted image variant");
    std::string hl_image, hl_segmap, hl_mode = "specific", hl_output;
    int hl_subject = 0, hl_object = 0;
    std::optional<uint64_t> hl_seed;
    highlight->add_option("--image", hl_image, "input P6 PPM")->required();
    highlight->add_option("--segmap", hl_segmap, "segment map JSON")->required();
    highlight->add_option("--subject", hl_subject, "subject instance id")->required();
    highlight->add_option("--object", hl_object, "object instance id")->required();
    highlight->add_option("--mode", hl_mode, "none | grey | random | specific");
    highlight->add_option("--seed", hl_seed, "tint seed (required for random)");
    highlight->add_option("--output", hl_output, "output PPM path")->required();

    // synth
    auto* synth = app.add_subcommand("synth", "generate the synthetic benchmark dataset");
    uint64_t sy_seed = 42;
    int sy_images = 32, sy_width = 32, sy_height = 32;
    std::string sy_out;
    synth->add_option("--seed", sy_seed, "generator seed");
    synth->add_option("--images", sy_images, "image count");
    synth->add_option("--width", sy_width, "image width");
    synth->add_option("--height", sy_height, "image height");
    synth->add_option("--out", sy_out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return run_command(run_config, run_cli);
        if (eval->parsed()) return eval_command(eval_config, eval_cli, eval_predictions);
        if (ablate->parsed()) return ablate_command(ablate_config, ablate_cli, ablate_rows);
        if (build->parsed()) return build_trie_command(build_triples, build_out);
        if (decode->parsed()) {
            json options = {{"image_id", dec_image}, {"subject", dec_subject},
                            {"object", dec_object},  {"beam", dec_beam},
                            {"mode", dec_mode},       {"renormalize", dec_renorm}};
            if (dec_sampling) {
                options["sampling"] = true;
                options["distinct_relations"] = dec_distinct;
            }
            if (dec_seed) options["seed"] = *dec_seed;
            return decode_command(dec_triples, dec_scorer, dec_weights, dec_alpha, options);
        }
        if (highlight->parsed()) {
            if (hl_mode == "random" && !hl_seed)
                fail(RELGEN_ERR_INVALID, "--mode random requires --seed");
            check(relgen_highlight_file(hl_image.c_str(), hl_segmap.c_str(), hl_subject,
                                        hl_object, hl_mode.c_str(), hl_seed.value_or(0),
                                        hl_output.c_str()));
            return 0;
        }
        if (synth->parsed()) {
            json cfg = {{"seed", sy_seed},     {"images", sy_images}, {"width", sy_width},
                        {"height", sy_height}, {"out_dir", sy_out}};
            char* summary = nullptr;
            check(relgen_synth(cfg.dump().c_str(), &summary));
            std::cout << take_string(summary);
            return 0;
        }
    } catch (const CliError& e) {
        std::cerr << "relgen: " << e.message << "\n";
        return e.code == 0 ? 1 : e.code;
    } catch (const std::exception& e) {
        std::cerr << "relgen: " << e.what() << "\n";
        return static_cast<int>(RELGEN_ERR_INTERNAL);
    }
    return 1;
}
