// End-to-end pipeline tests on a synthesised dataset. The triple-weight
// scorer depends only on the image id, so every candidate pair of an image
// decodes to the same beam; that makes the expected outputs exactly
// computable: the top-3 triples of each image are its ground-truth triples
// (weights 8/4/2 against decoy weights 0.25), so restricted decoding recalls
// everything.

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "relgen/corpus.hpp"
#include "relgen/decoder.hpp"
#include "relgen/error.hpp"
#include "relgen/pipeline.hpp"
#include "relgen/scoring.hpp"
#include "relgen/synth.hpp"
#include "relgen/tokenizer.hpp"
#include "relgen/trie.hpp"

#include "testutil.hpp"

using namespace relgen;

namespace {

struct SynthRun {
    testutil::TempDir dir{"pipeline"};
    SynthSummary summary;

    explicit SynthRun(int images = 6, uint64_t seed = 42) {
        SynthConfig cfg;
        cfg.seed = seed;
        cfg.images = images;
        cfg.width = 32;
        cfg.height = 32;
        cfg.out_dir = dir.path();
        summary = generate_synthetic_dataset(cfg);
    }

    RunConfig config() const {
        RunConfig cfg;
        cfg.triples = dir.path() / "triples.jsonl";
        cfg.dataset = dir.path() / "dataset.jsonl";
        cfg.weights = dir.path() / "weights.json";
        return cfg;
    }
};

bool same_predictions(const std::vector<PredictionRecord>& a,
                      const std::vector<PredictionRecord>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i].image_id != b[i].image_id) return false;
        if (a[i].shortfall != b[i].shortfall) return false;
        if (a[i].relations.size() != b[i].relations.size()) return false;
        for (size_t j = 0; j < a[i].relations.size(); ++j) {
            if (a[i].relations[j].relation != b[i].relations[j].relation) return false;
            if (a[i].relations[j].probability != b[i].relations[j].probability) return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("pipeline: config validation rejects out-of-range fields") {
    SynthRun synth(1);
    RunConfig good = synth.config();
    CHECK_NOTHROW(validate(good));

    RunConfig cfg = good;
    cfg.beam_width = 0;
    CHECK_THROWS_WITH_AS(validate(cfg), "beam_width must be >= 1", Error);

    cfg = good;
    cfg.os_k = 0;
    CHECK_THROWS_WITH_AS(validate(cfg), "os_k must be >= 1 or all", Error);
    cfg.os_k = -3;
    CHECK_THROWS_AS(validate(cfg), Error);
    cfg.os_k = kAllSubjects;
    CHECK_NOTHROW(validate(cfg));

    cfg = good;
    cfg.alpha = 0.0;
    CHECK_THROWS_WITH_AS(validate(cfg), "alpha must be > 0", Error);

    cfg = good;
    cfg.jobs = 0;
    CHECK_THROWS_WITH_AS(validate(cfg), "jobs must be >= 1", Error);

    cfg = good;
    cfg.oh_mode = HighlightMode::random_colour;
    cfg.seed.reset();
    CHECK_THROWS_WITH_AS(validate(cfg), "oh_mode=random requires a seed", Error);
    cfg.seed = 7;
    CHECK_NOTHROW(validate(cfg));

    cfg = good;
    cfg.sampling = true;
    cfg.seed.reset();
    CHECK_THROWS_WITH_AS(validate(cfg), "sampling requires a seed", Error);
    cfg.seed = 7;
    CHECK_NOTHROW(validate(cfg));

    for (auto kind : {ErrorKind::invalid_argument}) {
        cfg = good;
        cfg.beam_width = -1;
        try {
            validate(cfg);
            FAIL("expected a throw");
        } catch (const Error& e) {
            CHECK(e.kind() == kind);
        }
    }
}

TEST_CASE("pipeline: restricted weighted decoding recalls every ground truth") {
    SynthRun synth(6);
    RunConfig cfg = synth.config();
    PipelineResult result = run_from_config(cfg);

    CHECK(result.report.images == 6);
    CHECK(result.report.mean_recall == 1.0);
    CHECK(result.report.classes_evaluated >= 3);
    for (const auto& [cls, recall] : result.report.per_class_recall) CHECK(recall == 1.0);

    REQUIRE(result.predictions.size() == 6);
    Corpus corpus = load_corpus(cfg.triples);
    Dataset dataset = load_dataset(cfg.dataset, corpus);
    auto weights = TripleWeightScorer::load_weights(cfg.weights);
    for (size_t i = 0; i < result.predictions.size(); ++i) {
        const PredictionRecord& rec = result.predictions[i];
        CHECK(rec.image_id == dataset.records[i].image_id);
        REQUIRE(rec.relations.size() == 3);
        CHECK_FALSE(rec.shortfall);
        double total = 0.0;
        for (const auto& [triple, w] : weights.at(rec.image_id)) total += w;
        CHECK(rec.relations[0].probability == doctest::Approx(8.0 / total).epsilon(1e-9));
        CHECK(rec.relations[1].probability == doctest::Approx(4.0 / total).epsilon(1e-9));
        CHECK(rec.relations[2].probability == doctest::Approx(2.0 / total).epsilon(1e-9));

        std::set<ClassId> predicted;
        for (const RelationScore& rs : rec.relations) predicted.insert(rs.relation);
        CHECK(predicted == dataset.records[i].annotation.gt_relations);
    }

    CHECK(result.predictions.size() ==
          static_cast<size_t>(std::count_if(result.predictions.begin(), result.predictions.end(),
                                            [](const PredictionRecord& r) {
                                                return std::is_sorted(
                                                    r.relations.begin(), r.relations.end(),
                                                    [](const RelationScore& a,
                                                       const RelationScore& b) {
                                                        return a.probability > b.probability;
                                                    });
                                            })));
}

TEST_CASE("pipeline: sum aggregation clamps repeated contributions to one") {
    SynthRun synth(3);
    RunConfig cfg = synth.config();
    cfg.aggregation = Aggregation::sum;
    PipelineResult result = run_from_config(cfg);

    // Every image has 25 candidate pairs that all decode to the same three
    // triples, so each relation's summed mass saturates the clamp.
    CHECK(result.report.mean_recall == 1.0);
    for (const PredictionRecord& rec : result.predictions) {
        REQUIRE(rec.relations.size() == 3);
        for (const RelationScore& rs : rec.relations) CHECK(rs.probability == 1.0);
    }
}

TEST_CASE("pipeline: unrestricted bigram decoding scores below the restricted run") {
    SynthRun synth(6);
    RunConfig restricted = synth.config();
    PipelineResult base = run_from_config(restricted);

    RunConfig unres = restricted;
    unres.rtg_mode = DecodeMode::unrestricted;
    unres.scorer = ScorerKind::bigram;
    PipelineResult free_run = run_from_config(unres);

    CHECK(base.report.mean_recall == 1.0);
    CHECK(free_run.report.mean_recall < base.report.mean_recall);
    CHECK(free_run.report.mean_recall >= 0.0);
    // The bigram scorer ignores the image, so every image gets the same
    // surviving relations.
    REQUIRE(!free_run.predictions.empty());
    for (const PredictionRecord& rec : free_run.predictions) {
        CHECK(rec.relations.size() == free_run.predictions[0].relations.size());
        for (size_t j = 0; j < rec.relations.size(); ++j)
            CHECK(rec.relations[j].relation == free_run.predictions[0].relations[j].relation);
    }
}

TEST_CASE("pipeline: subject top-k does not change image-conditioned decoding") {
    SynthRun synth(4);
    RunConfig cfg = synth.config();

    std::vector<int> ks = {3, 5, 7, kAllSubjects};
    std::vector<PipelineResult> results;
    for (int k : ks) {
        cfg.os_k = k;
        results.push_back(run_from_config(cfg));
    }
    for (size_t i = 1; i < results.size(); ++i) {
        CHECK(results[i].report.mean_recall == results[0].report.mean_recall);
        CHECK(same_predictions(results[i].predictions, results[0].predictions));
    }

    cfg.os_k = 1;
    PipelineResult top1 = run_from_config(cfg);
    CHECK(top1.report.mean_recall <= results[0].report.mean_recall);
}

TEST_CASE("pipeline: thread count never changes results or artefacts") {
    SynthRun synth(5);
    testutil::TempDir out1{"jobs1"}, out4{"jobs4"};

    RunConfig cfg = synth.config();
    cfg.out_dir = out1.path();
    cfg.jobs = 1;
    PipelineResult serial = run_from_config(cfg);

    cfg.out_dir = out4.path();
    cfg.jobs = 4;
    PipelineResult parallel = run_from_config(cfg);

    CHECK(serial.report.mean_recall == parallel.report.mean_recall);
    CHECK(serial.report.per_class_recall == parallel.report.per_class_recall);
    CHECK(same_predictions(serial.predictions, parallel.predictions));

    CHECK(testutil::read_file(out1.path() / "predictions.jsonl") ==
          testutil::read_file(out4.path() / "predictions.jsonl"));
    CHECK(testutil::read_file(out1.path() / "report.json") ==
          testutil::read_file(out4.path() / "report.json"));
}

TEST_CASE("pipeline: out_dir artefacts and highlight naming") {
    SynthRun synth(2);
    testutil::TempDir out{"out"};
    RunConfig cfg = synth.config();
    cfg.out_dir = out.path();
    cfg.save_highlights = true;
    cfg.os_k = 1;  // subject = largest strip only, objects = the other five
    PipelineResult result = run_from_config(cfg);

    CHECK(std::filesystem::exists(out.path() / "predictions.jsonl"));
    CHECK(std::filesystem::exists(out.path() / "report.json"));
    for (const std::string& image : {std::string("img_0000"), std::string("img_0001")})
        for (int object = 2; object <= 6; ++object)
            CHECK(std::filesystem::exists(out.path() / "highlights" /
                                          (image + "_s1_o" + std::to_string(object) + ".ppm")));

    size_t highlight_files = 0;
    for ([[maybe_unused]] const auto& entry :
         std::filesystem::directory_iterator(out.path() / "highlights"))
        ++highlight_files;
    CHECK(highlight_files == 10);

    // The written predictions round-trip to the in-memory result.
    std::vector<PredictionRecord> reloaded = load_predictions(out.path() / "predictions.jsonl");
    CHECK(same_predictions(reloaded, result.predictions));
}

TEST_CASE("pipeline: stage errors carry the image id") {
    SynthRun synth(3);
    RunConfig cfg = synth.config();

    Corpus corpus = load_corpus(cfg.triples);
    Dataset dataset = load_dataset(cfg.dataset, corpus);
    Vocabulary vocab = Vocabulary::build(corpus);
    PrefixTrie trie = PrefixTrie::build(corpus, vocab);
    auto scorer = make_scorer(cfg, corpus, vocab);

    std::filesystem::remove(synth.dir.path() / "segmaps" / "img_0001.json");
    try {
        run_pipeline(dataset, corpus, vocab, trie, *scorer, cfg);
        FAIL("expected a throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::io);
        CHECK(std::string(e.what()).find("image img_0001: ") != std::string::npos);
    }
}

TEST_CASE("pipeline: full ablation grid rows, labels, and values") {
    SynthRun synth(4);
    RunConfig base = synth.config();
    std::vector<AblationRow> rows = run_ablation(base);

    REQUIRE(rows.size() == 11);
    const std::vector<std::array<std::string, 3>> expected = {
        {"rtg", "unrestricted", "Unrestricted model"},
        {"rtg", "restricted", "Restricted model"},
        {"oh", "none", "Without processing"},
        {"oh", "grey", "Grey processing"},
        {"oh", "random", "Random colour highlight"},
        {"oh", "specific", "Specific colour highlight"},
        {"os", "1", "Select top 1 subject"},
        {"os", "3", "Select top 3 subjects"},
        {"os", "5", "Select top 5 subjects"},
        {"os", "7", "Select top 7 subjects"},
        {"os", "all", "Select all subjects"},
    };
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].axis == expected[i][0]);
        CHECK(rows[i].name == expected[i][1]);
        CHECK(rows[i].label == expected[i][2]);
        CHECK(rows[i].mean_recall_percent >= 0.0);
        CHECK(rows[i].mean_recall_percent <= 100.0);
    }

    // The scorer conditions only on the image id, so every row except the
    // unrestricted decode reproduces the perfect restricted score.
    for (size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].mean_recall_percent == 100.0);
    CHECK(rows[0].mean_recall_percent < 100.0);
}

TEST_CASE("pipeline: single ablation rows match the grid and reject bad keys") {
    SynthRun synth(3);
    RunConfig base = synth.config();

    std::vector<AblationRow> grid = run_ablation(base);
    std::vector<AblationRow> single = run_ablation(base, {"rtg:unrestricted"});
    REQUIRE(single.size() == 1);
    CHECK(single[0].axis == "rtg");
    CHECK(single[0].mean_recall_percent == grid[0].mean_recall_percent);

    std::vector<AblationRow> pair = run_ablation(base, {"os:1", "oh:grey"});
    REQUIRE(pair.size() == 2);
    CHECK(pair[0].name == "1");
    CHECK(pair[1].name == "grey");

    CHECK_THROWS_WITH_AS(run_ablation(base, {"oh:sepia"}), "unknown ablation row \"oh:sepia\"",
                         Error);
}

TEST_CASE("pipeline: ablation rows ignore output settings from the base config") {
    SynthRun synth(2);
    testutil::TempDir out{"out"};
    RunConfig base = synth.config();
    base.out_dir = out.path();
    base.save_highlights = true;

    run_ablation(base, {"oh:grey"});
    CHECK_FALSE(std::filesystem::exists(out.path() / "predictions.jsonl"));
    CHECK_FALSE(std::filesystem::exists(out.path() / "highlights"));
}

TEST_CASE("pipeline: ablation table layout") {
    std::vector<AblationRow> rows = {
        {"rtg", "unrestricted", "Unrestricted model", 12.5},
        {"rtg", "restricted", "Restricted model", 100.0},
        {"os", "1", "Select top 1 subject", 93.75},
    };
    std::string table = ablation_table(rows);

    CHECK(table.find("Type") != std::string::npos);
    CHECK(table.find("Name") != std::string::npos);
    CHECK(table.find("Mean Recall (%)") != std::string::npos);
    CHECK(table.find("RTG") != std::string::npos);
    CHECK(table.find("OS") != std::string::npos);
    CHECK(table.find("Unrestricted model") != std::string::npos);
    CHECK(table.find("12.50") != std::string::npos);
    CHECK(table.find("100.00") != std::string::npos);
    CHECK(table.find("93.75") != std::string::npos);
    CHECK(table.find("----") != std::string::npos);
    // Axis groups are separated by a blank line.
    CHECK(table.find("\n\n") != std::string::npos);
}

TEST_CASE("pipeline: sampling runs are deterministic in the seed") {
    SynthRun synth(3);
    RunConfig cfg = synth.config();
    cfg.sampling = true;
    cfg.seed = 99;

    PipelineResult a = run_from_config(cfg);
    PipelineResult b = run_from_config(cfg);
    CHECK(same_predictions(a.predictions, b.predictions));
    CHECK(a.report.mean_recall == b.report.mean_recall);
    for (const PredictionRecord& rec : a.predictions) CHECK(rec.relations.size() <= 3);
}

TEST_CASE("pipeline: make_scorer builds the configured scorer") {
    SynthRun synth(1);
    RunConfig cfg = synth.config();
    Corpus corpus = load_corpus(cfg.triples);
    Vocabulary vocab = Vocabulary::build(corpus);
    ImageContext ctx{"img_0000", 1, 2, {}};

    cfg.scorer = ScorerKind::uniform;
    auto uniform = make_scorer(cfg, corpus, vocab);
    std::vector<double> lp = uniform->score_next(ctx, {});
    for (double v : lp) CHECK(v == doctest::Approx(-std::log(double(vocab.size()))));

    cfg.scorer = ScorerKind::bigram;
    cfg.alpha = 0.5;
    auto bigram = make_scorer(cfg, corpus, vocab);
    CHECK(dynamic_cast<BigramScorer*>(bigram.get()) != nullptr);
    CHECK(dynamic_cast<BigramScorer*>(bigram.get())->alpha() == 0.5);

    cfg.scorer = ScorerKind::weights;
    auto weighted = make_scorer(cfg, corpus, vocab);
    CHECK(dynamic_cast<TripleWeightScorer*>(weighted.get()) != nullptr);

    // Weights are optional: an empty path degrades to uniform triple weights.
    cfg.weights.clear();
    auto unweighted = make_scorer(cfg, corpus, vocab);
    CHECK(is_normalized(unweighted->score_next(ctx, {})));
}

TEST_CASE("pipeline: scorer kind strings round-trip") {
    CHECK(scorer_kind_from_string("weights") == ScorerKind::weights);
    CHECK(scorer_kind_from_string("bigram") == ScorerKind::bigram);
    CHECK(scorer_kind_from_string("uniform") == ScorerKind::uniform);
    CHECK(std::string(to_string(ScorerKind::weights)) == "weights");
    CHECK(std::string(to_string(ScorerKind::bigram)) == "bigram");
    CHECK(std::string(to_string(ScorerKind::uniform)) == "uniform");
    CHECK_THROWS_AS(scorer_kind_from_string("transformer"), Error);
}
