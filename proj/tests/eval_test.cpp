#include "doctest.h"
#include "relgen/error.hpp"
#include "relgen/eval.hpp"
#include "testutil.hpp"

#include <json.hpp>

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

using namespace relgen;

namespace {

// Eight triples, one per pool relation, so relation id i belongs to triple i.
struct EvalFixture {
    Corpus corpus;
    Vocabulary vocab;
    PrefixTrie trie;

    EvalFixture() {
        std::vector<std::array<std::string, 3>> triples;
        for (size_t i = 0; i < testutil::pool_relations().size(); ++i)
            triples.push_back({testutil::pool_subjects()[i], testutil::pool_relations()[i],
                               testutil::pool_objects()[i]});
        corpus = testutil::make_corpus(triples);
        vocab = Vocabulary::build(corpus);
        trie = PrefixTrie::build(corpus, vocab);
    }

    ScoredSequence seq(TripleId triple, double prob) const {
        auto tokens = tokenize(corpus.triple_text(triple), vocab);
        return {tokens, std::log(prob), triple, true};
    }

    ImageRecord image(const std::string& id, const std::set<ClassId>& gt) const {
        ImageRecord rec;
        rec.image_id = id;
        rec.annotation.image_id = id;
        rec.annotation.gt_relations = gt;
        return rec;
    }
};

PredictionRecord predict(const std::string& id, const std::vector<RelationScore>& rels) {
    PredictionRecord rec;
    rec.image_id = id;
    rec.relations = rels;
    return rec;
}

// Brute-force aggregation oracle: group, fold, full sort, truncate.
std::vector<RelationScore> aggregate_oracle(const std::vector<std::pair<ClassId, double>>& contribs,
                                            int k, Aggregation agg) {
    std::map<ClassId, double> folded;
    for (const auto& [rel, prob] : contribs) {
        auto [it, inserted] = folded.emplace(rel, prob);
        if (!inserted)
            it->second = agg == Aggregation::max ? std::max(it->second, prob)
                                                 : std::min(1.0, it->second + prob);
    }
    std::vector<RelationScore> out;
    for (const auto& [rel, prob] : folded) out.push_back({rel, prob});
    std::sort(out.begin(), out.end(), [](const RelationScore& a, const RelationScore& b) {
        if (a.probability != b.probability) return a.probability > b.probability;
        return a.relation < b.relation;
    });
    if (static_cast<int>(out.size()) > k) out.resize(static_cast<size_t>(k));
    return out;
}

}  // namespace

TEST_CASE("max aggregation dedupes relations and flags the shortfall") {
    EvalFixture fx;
    // Two sequences on relation 7, one on relation 2; spec's worked example.
    std::vector<ScoredSequence> seqs = {fx.seq(7, 0.5), fx.seq(7, 0.3), fx.seq(2, 0.4)};
    auto rec = aggregate_relations("img", seqs, fx.trie, fx.corpus);
    CHECK(rec.image_id == "img");
    REQUIRE(rec.relations.size() == 2);
    CHECK(rec.relations[0].relation == 7);
    CHECK(rec.relations[0].probability == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rec.relations[1].relation == 2);
    CHECK(rec.relations[1].probability == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(rec.shortfall);
}

TEST_CASE("three distinct relations fill the record sorted") {
    EvalFixture fx;
    std::vector<ScoredSequence> seqs = {fx.seq(1, 0.2), fx.seq(4, 0.9), fx.seq(3, 0.5)};
    auto rec = aggregate_relations("img", seqs, fx.trie, fx.corpus);
    REQUIRE(rec.relations.size() == 3);
    CHECK(rec.relations[0].relation == 4);
    CHECK(rec.relations[1].relation == 3);
    CHECK(rec.relations[2].relation == 1);
    CHECK_FALSE(rec.shortfall);
    for (size_t i = 1; i < rec.relations.size(); ++i)
        CHECK(rec.relations[i - 1].probability >= rec.relations[i].probability);
}

TEST_CASE("equal probabilities rank the lower relation id first") {
    EvalFixture fx;
    std::vector<ScoredSequence> seqs = {fx.seq(5, 0.25), fx.seq(2, 0.25)};
    auto rec = aggregate_relations("img", seqs, fx.trie, fx.corpus);
    REQUIRE(rec.relations.size() == 2);
    CHECK(rec.relations[0].relation == 2);
    CHECK(rec.relations[1].relation == 5);
}

TEST_CASE("top-k keeps only the best k distinct relations") {
    EvalFixture fx;
    std::vector<ScoredSequence> seqs = {fx.seq(0, 0.1), fx.seq(1, 0.2), fx.seq(2, 0.3),
                                        fx.seq(3, 0.4), fx.seq(4, 0.5)};
    auto rec = aggregate_relations("img", seqs, fx.trie, fx.corpus, 3);
    REQUIRE(rec.relations.size() == 3);
    CHECK(rec.relations[0].relation == 4);
    CHECK(rec.relations[2].relation == 2);
    CHECK_FALSE(rec.shortfall);
    CHECK_THROWS_AS(aggregate_relations("img", seqs, fx.trie, fx.corpus, 0), Error);
}

TEST_CASE("sum aggregation accumulates and clamps at one") {
    EvalFixture fx;
    std::vector<ScoredSequence> seqs = {fx.seq(7, 0.5), fx.seq(7, 0.3)};
    auto rec = aggregate_relations("img", seqs, fx.trie, fx.corpus, 3, Aggregation::sum);
    REQUIRE(rec.relations.size() == 1);
    CHECK(rec.relations[0].probability == doctest::Approx(0.8).epsilon(1e-9));

    std::vector<ScoredSequence> big = {fx.seq(7, 0.6), fx.seq(7, 0.6)};
    auto clamped = aggregate_relations("img", big, fx.trie, fx.corpus, 3, Aggregation::sum);
    CHECK(clamped.relations[0].probability == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("empty input aggregates to an empty shortfall record") {
    EvalFixture fx;
    auto rec = aggregate_relations("img", {}, fx.trie, fx.corpus);
    CHECK(rec.relations.empty());
    CHECK(rec.shortfall);
}

TEST_CASE("sequences without a triple id resolve through the trie") {
    EvalFixture fx;
    auto tokens = tokenize(fx.corpus.triple_text(3), fx.vocab);
    std::vector<ScoredSequence> seqs = {{tokens, std::log(0.5), std::nullopt, true}};
    auto rec = aggregate_relations("img", seqs, fx.trie, fx.corpus);
    REQUIRE(rec.relations.size() == 1);
    CHECK(rec.relations[0].relation == fx.corpus.triples[3].relation);
}

TEST_CASE("unresolvable sequences are rejected with the image id") {
    EvalFixture fx;
    std::vector<ScoredSequence> seqs = {{TokenSequence{2}, -0.5, std::nullopt, false}};
    try {
        aggregate_relations("img9", seqs, fx.trie, fx.corpus);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("img9") != std::string::npos);
    }
}

TEST_CASE("aggregation matches the brute-force oracle on random inputs") {
    EvalFixture fx;
    std::mt19937_64 rng(515);
    for (int iter = 0; iter < 200; ++iter) {
        int n = static_cast<int>(rng() % 12);
        std::vector<ScoredSequence> seqs;
        std::vector<std::pair<ClassId, double>> contribs;
        for (int i = 0; i < n; ++i) {
            TripleId t = static_cast<TripleId>(rng() % 8);
            // Coarse grid of probabilities forces ties.
            double prob = (1 + static_cast<int>(rng() % 8)) / 16.0;
            seqs.push_back(fx.seq(t, prob));
            contribs.push_back({fx.corpus.triples[static_cast<size_t>(t)].relation, prob});
        }
        Aggregation agg = (iter % 2) ? Aggregation::max : Aggregation::sum;
        int k = 1 + static_cast<int>(rng() % 4);
        auto rec = aggregate_relations("img", seqs, fx.trie, fx.corpus, k, agg);
        auto want = aggregate_oracle(contribs, k, agg);
        REQUIRE(rec.relations.size() == want.size());
        for (size_t i = 0; i < want.size(); ++i) {
            CHECK(rec.relations[i].relation == want[i].relation);
            CHECK(rec.relations[i].probability == doctest::Approx(want[i].probability).epsilon(1e-9));
        }
    }
}

TEST_CASE("perfect predictions give mean recall one") {
    EvalFixture fx;
    std::vector<ImageRecord> records = {fx.image("a", {0, 1}), fx.image("b", {2}),
                                        fx.image("c", {0, 3, 4})};
    std::vector<PredictionRecord> preds;
    for (const auto& rec : records) {
        std::vector<RelationScore> rels;
        for (ClassId r : rec.annotation.gt_relations) rels.push_back({r, 0.5});
        preds.push_back(predict(rec.image_id, rels));
    }
    auto report = mean_recall(preds, records);
    CHECK(report.mean_recall == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(report.images == 3);
    CHECK(report.classes_evaluated == 5);
    for (const auto& [rel, recall] : report.per_class_recall)
        CHECK(recall == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("a relation predicted in one of two images recalls one half") {
    EvalFixture fx;
    std::vector<ImageRecord> records = {fx.image("a", {0}), fx.image("b", {0})};
    std::vector<PredictionRecord> preds = {predict("a", {{0, 0.9}}), predict("b", {{1, 0.9}})};
    auto report = mean_recall(preds, records);
    REQUIRE(report.per_class_recall.count(0) == 1);
    CHECK(report.per_class_recall.at(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(report.mean_recall == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("classes never in ground truth stay out of the mean") {
    EvalFixture fx;
    std::vector<ImageRecord> records = {fx.image("a", {0})};
    // Relation 5 is predicted but never a ground-truth class.
    std::vector<PredictionRecord> preds = {predict("a", {{0, 0.9}, {5, 0.8}})};
    auto report = mean_recall(preds, records);
    CHECK(report.classes_evaluated == 1);
    CHECK(report.per_class_recall.count(5) == 0);
    CHECK(report.mean_recall == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("images without predictions count as empty predictions") {
    EvalFixture fx;
    std::vector<ImageRecord> records = {fx.image("a", {0}), fx.image("b", {0})};
    std::vector<PredictionRecord> preds = {predict("a", {{0, 0.9}})};
    auto report = mean_recall(preds, records);
    CHECK(report.per_class_recall.at(0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("prediction for an unknown image is an error") {
    EvalFixture fx;
    std::vector<ImageRecord> records = {fx.image("a", {0})};
    std::vector<PredictionRecord> preds = {predict("ghost", {{0, 0.9}})};
    try {
        mean_recall(preds, records);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("ghost") != std::string::npos);
    }
}

TEST_CASE("duplicate predictions for one image are rejected") {
    EvalFixture fx;
    std::vector<ImageRecord> records = {fx.image("a", {0})};
    std::vector<PredictionRecord> preds = {predict("a", {{0, 0.9}}), predict("a", {{0, 0.8}})};
    CHECK_THROWS_AS(mean_recall(preds, records), Error);
}

TEST_CASE("adding a correct prediction never lowers a recall") {
    EvalFixture fx;
    std::mt19937_64 rng(717);
    for (int iter = 0; iter < 25; ++iter) {
        std::vector<ImageRecord> records;
        std::vector<PredictionRecord> preds;
        int n = 2 + static_cast<int>(rng() % 4);
        for (int i = 0; i < n; ++i) {
            std::set<ClassId> gt;
            int g = 1 + static_cast<int>(rng() % 3);
            for (int j = 0; j < g; ++j) gt.insert(static_cast<ClassId>(rng() % 6));
            records.push_back(fx.image("img" + std::to_string(i), gt));
            std::vector<RelationScore> rels;
            if (rng() % 2) rels.push_back({static_cast<ClassId>(rng() % 6), 0.5});
            preds.push_back(predict(records.back().image_id, rels));
        }
        auto before = mean_recall(preds, records);

        // Give image 0 one of its missing ground-truth classes.
        ClassId target = *records[0].annotation.gt_relations.begin();
        preds[0].relations.push_back({target, 0.4});
        auto after = mean_recall(preds, records);
        for (const auto& [rel, recall] : before.per_class_recall)
            CHECK(after.per_class_recall.at(rel) >= recall - 1e-12);
        CHECK(after.mean_recall >= before.mean_recall - 1e-12);
        CHECK(after.mean_recall >= 0.0);
        CHECK(after.mean_recall <= 1.0);
    }
}

TEST_CASE("predictions round-trip through jsonl") {
    testutil::TempDir dir("preds");
    std::vector<PredictionRecord> preds = {predict("a", {{0, 0.5}, {3, 0.25}}),
                                           predict("b", {})};
    preds[1].shortfall = true;
    save_predictions(preds, dir / "p.jsonl");
    auto loaded = load_predictions(dir / "p.jsonl");
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].image_id == "a");
    REQUIRE(loaded[0].relations.size() == 2);
    CHECK(loaded[0].relations[0].relation == 0);
    CHECK(loaded[0].relations[0].probability == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_FALSE(loaded[0].shortfall);
    CHECK(loaded[1].shortfall);
    CHECK(loaded[1].relations.empty());
}

TEST_CASE("report json carries recalls in percent keyed by name") {
    EvalFixture fx;
    std::vector<ImageRecord> records = {fx.image("a", {0}), fx.image("b", {0})};
    std::vector<PredictionRecord> preds = {predict("a", {{0, 0.9}})};
    auto report = mean_recall(preds, records);
    auto j = nlohmann::json::parse(report_to_json(report, fx.corpus));
    CHECK(j["images"] == 2);
    CHECK(j["classes_evaluated"] == 1);
    CHECK(j["mean_recall_percent"].get<double>() == doctest::Approx(50.0).epsilon(1e-9));
    const std::string name = testutil::pool_relations()[0];
    CHECK(j["per_class_recall_percent"][name].get<double>() == doctest::Approx(50.0).epsilon(1e-9));
}

TEST_CASE("aggregation mode strings round-trip") {
    CHECK(aggregation_from_string("max") == Aggregation::max);
    CHECK(aggregation_from_string("sum") == Aggregation::sum);
    CHECK(std::string(to_string(Aggregation::sum)) == "sum");
    CHECK_THROWS_AS(aggregation_from_string("avg"), Error);
}
