#include "doctest.h"
#include "relgen/error.hpp"
#include "relgen/scoring.hpp"
#include "relgen/trie.hpp"
#include "testutil.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace relgen;

namespace {

const ImageContext kCtx{"img", 1, 2, {}};

// Three triples with pairwise-distinct head words so first-step mass is
// exactly the normalized weight of each triple.
struct WeightedFixture {
    Corpus corpus = testutil::make_corpus(
        {{"person", "holding", "pizza"}, {"dog", "riding", "skateboard"}, {"cat", "eating", "cake"}});
    Vocabulary vocab = Vocabulary::build(corpus);
    TripleWeightScorer::WeightMap weights = {{"img", {{0, 0.5}, {1, 0.3}, {2, 0.2}}}};
    TripleWeightScorer scorer{corpus, vocab, weights};
};

}  // namespace

TEST_CASE("uniform scorer assigns log(1/V) everywhere") {
    UniformScorer scorer(5);
    auto lp = scorer.score_next(kCtx, {});
    REQUIRE(lp.size() == 5);
    for (double x : lp) CHECK(x == doctest::Approx(std::log(1.0 / 5.0)).epsilon(1e-12));
    CHECK(is_normalized(lp));
    CHECK(scorer.vocab_size() == 5);
}

TEST_CASE("triple weights put normalized mass on head tokens") {
    WeightedFixture fx;
    auto lp = fx.scorer.score_next(kCtx, {});
    CHECK(is_normalized(lp));
    auto prob = [&](const char* word) {
        return std::exp(lp[static_cast<size_t>(fx.vocab.id(word))]);
    };
    CHECK(prob("person") == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(prob("dog") == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(prob("cat") == doctest::Approx(0.2).epsilon(1e-12));
    // Tokens continuing no triple from the root carry zero probability.
    CHECK(is_log_zero(lp[static_cast<size_t>(fx.vocab.id("pizza"))]));
    CHECK(is_log_zero(lp[kEosToken]));
}

TEST_CASE("triple weight sequence probability telescopes to w/sum") {
    WeightedFixture fx;
    const std::vector<double> expect = {0.5, 0.3, 0.2};
    for (TripleId id = 0; id < 3; ++id) {
        auto seq = tokenize(fx.corpus.triple_text(id), fx.vocab);
        seq.push_back(kEosToken);
        double lp = testutil::chain_logprob(fx.scorer, kCtx, seq);
        CHECK(testutil::nearly(lp, std::log(expect[static_cast<size_t>(id)]), 1e-9));
    }
}

TEST_CASE("single triple scores probability one at every step") {
    auto corpus = testutil::make_corpus({{"person", "holding", "skateboard"}});
    auto vocab = Vocabulary::build(corpus);
    TripleWeightScorer scorer(corpus, vocab, {{"img", {{0, 7.25}}}});
    TokenSequence prefix;
    auto path = tokenize("person holding skateboard", vocab);
    path.push_back(kEosToken);
    for (TokenId tok : path) {
        auto lp = scorer.score_next(kCtx, prefix);
        CHECK(std::exp(lp[static_cast<size_t>(tok)]) == doctest::Approx(1.0).epsilon(1e-12));
        prefix.push_back(tok);
    }
}

TEST_CASE("image without weights falls back to uniform triple weights") {
    WeightedFixture fx;
    ImageContext other{"unseen", 1, 2, {}};
    auto lp = fx.scorer.score_next(other, {});
    CHECK(is_normalized(lp));
    for (const char* word : {"person", "dog", "cat"})
        CHECK(std::exp(lp[static_cast<size_t>(fx.vocab.id(word))]) ==
              doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("off-language prefix falls back to the uniform distribution") {
    WeightedFixture fx;
    // "pizza" follows no BOS-rooted triple, so the prefix leaves the language.
    TokenSequence off = {fx.vocab.id("pizza")};
    auto lp = fx.scorer.score_next(kCtx, off);
    CHECK(is_normalized(lp));
    for (double x : lp)
        CHECK(std::exp(x) == doctest::Approx(1.0 / fx.vocab.size()).epsilon(1e-12));
}

TEST_CASE("weights must be positive and reference existing triples") {
    WeightedFixture fx;
    CHECK_THROWS_AS(TripleWeightScorer(fx.corpus, fx.vocab, {{"img", {{0, -1.0}}}}), Error);
    CHECK_THROWS_AS(TripleWeightScorer(fx.corpus, fx.vocab, {{"img", {{0, 0.0}}}}), Error);
    CHECK_THROWS_AS(TripleWeightScorer(fx.corpus, fx.vocab, {{"img", {{99, 1.0}}}}), Error);
}

TEST_CASE("weights round-trip through weights.json") {
    WeightedFixture fx;
    testutil::TempDir dir("weights");
    TripleWeightScorer::save_weights(fx.weights, dir / "weights.json");
    auto loaded = TripleWeightScorer::load_weights(dir / "weights.json");
    CHECK(loaded == fx.weights);
}

TEST_CASE("bigram alpha to zero concentrates on observed continuations") {
    auto corpus = testutil::make_corpus({{"person", "holding", "pizza"}});
    auto vocab = Vocabulary::build(corpus);
    BigramScorer scorer(corpus, vocab, 1e-12);
    auto lp = scorer.score_next(kCtx, {vocab.id("person")});
    CHECK(std::exp(lp[static_cast<size_t>(vocab.id("holding"))]) ==
          doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("bigram alpha to infinity flattens to uniform") {
    auto corpus = testutil::make_corpus({{"person", "holding", "pizza"}});
    auto vocab = Vocabulary::build(corpus);
    BigramScorer scorer(corpus, vocab, 1e12);
    auto lp = scorer.score_next(kCtx, {vocab.id("person")});
    for (double x : lp)
        CHECK(std::exp(x) == doctest::Approx(1.0 / vocab.size()).epsilon(1e-6));
}

TEST_CASE("bigram smoothing keeps eos reachable after any token") {
    auto corpus = testutil::make_corpus({{"person", "holding", "pizza"}});
    auto vocab = Vocabulary::build(corpus);
    BigramScorer scorer(corpus, vocab);
    auto lp = scorer.score_next(kCtx, {vocab.id("pizza")});
    CHECK(std::exp(lp[kEosToken]) > 0.0);
    CHECK(scorer.alpha() == 0.1);
}

TEST_CASE("bigram conditional matches the hand-built count table") {
    // Counts from BOS-framed sequences: person->holding appears twice,
    // person->riding once, so P(holding|person) = (2 + a) / (3 + a*V).
    auto corpus = testutil::make_corpus({{"person", "holding", "pizza"},
                                         {"person", "holding", "cake"},
                                         {"person", "riding", "skateboard"}});
    auto vocab = Vocabulary::build(corpus);
    const double alpha = 0.1;
    BigramScorer scorer(corpus, vocab, alpha);
    auto lp = scorer.score_next(kCtx, {vocab.id("person")});
    const double v = vocab.size();
    CHECK(std::exp(lp[static_cast<size_t>(vocab.id("holding"))]) ==
          doctest::Approx((2 + alpha) / (3 + alpha * v)).epsilon(1e-12));
    CHECK(std::exp(lp[static_cast<size_t>(vocab.id("riding"))]) ==
          doctest::Approx((1 + alpha) / (3 + alpha * v)).epsilon(1e-12));
    // BOS row: every sequence starts at person.
    auto root = scorer.score_next(kCtx, {});
    CHECK(std::exp(root[static_cast<size_t>(vocab.id("person"))]) ==
          doctest::Approx((3 + alpha) / (3 + alpha * v)).epsilon(1e-12));
}

TEST_CASE("bigram ignores the image context") {
    auto corpus = testutil::make_corpus(testutil::example_triples());
    auto vocab = Vocabulary::build(corpus);
    BigramScorer scorer(corpus, vocab);
    ImageContext a{"one", 1, 2, {"tag"}};
    ImageContext b{"two", 5, 9, {}};
    CHECK(scorer.score_next(a, {}) == scorer.score_next(b, {}));
}

TEST_CASE("all scorers stay normalized across random prefixes") {
    std::mt19937_64 rng(555);
    for (int iter = 0; iter < 30; ++iter) {
        auto corpus = testutil::make_corpus(testutil::random_triples(rng, 25));
        auto vocab = Vocabulary::build(corpus);
        auto weights_vec = testutil::distinct_weights(rng, corpus.triples.size());
        TripleWeightScorer::ImageWeights iw;
        for (size_t i = 0; i < weights_vec.size(); ++i)
            iw[static_cast<TripleId>(i)] = weights_vec[i];
        TripleWeightScorer tw(corpus, vocab, {{"img", iw}});
        BigramScorer bg(corpus, vocab);
        UniformScorer uni(vocab.size());

        std::uniform_int_distribution<TokenId> dtok(0, vocab.size() - 1);
        for (int p = 0; p < 20; ++p) {
            TokenSequence prefix;
            int len = static_cast<int>(rng() % 4);
            for (int i = 0; i < len; ++i) prefix.push_back(dtok(rng));
            for (const Scorer* s : {static_cast<const Scorer*>(&tw),
                                    static_cast<const Scorer*>(&bg),
                                    static_cast<const Scorer*>(&uni)}) {
                auto lp = s->score_next(kCtx, prefix);
                CHECK(is_normalized(lp));
                for (double x : lp) CHECK((x <= 0.0 || is_log_zero(x)));
            }
        }
    }
}

TEST_CASE("scorers are deterministic") {
    WeightedFixture fx;
    auto a = fx.scorer.score_next(kCtx, {});
    auto b = fx.scorer.score_next(kCtx, {});
    CHECK(a == b);
}

TEST_CASE("sum_logprob saturates at log zero") {
    CHECK(is_log_zero(sum_logprob(kLogZero, -1.0)));
    CHECK(is_log_zero(sum_logprob(-1.0, kLogZero)));
    CHECK(is_log_zero(sum_logprob(kLogZero, kLogZero)));
    CHECK(sum_logprob(-1.0, -2.0) == doctest::Approx(-3.0));
}
