#include <doctest.h>

#include <cmath>

#include "screening/classifier_gate.hpp"

using namespace screening;
using namespace screening::classifier_gate;

namespace {

// Gold set with n entries for filter 0 plus a grid where the classifier gets
// the first `correct` right and the rest wrong.
std::pair<GoldSet, LabelGrid> gold_with_counts(int correct, int failed) {
    std::vector<GoldEntry> entries;
    LabelGrid grid;
    for (int i = 0; i < correct + failed; ++i) {
        entries.push_back({i, 0, VoteLabel::OUT});
        grid.set(i, 0, i < correct ? VoteLabel::OUT : VoteLabel::IN);
    }
    return {make_gold_set(std::move(entries), 20.0), grid};
}

} // namespace

TEST_CASE("test_classifier counts correct and failed answers") {
    auto [gold, grid] = gold_with_counts(40, 10);
    const prob::BetaPosterior post = test_classifier(grid, gold, 0);
    CHECK(post.alpha == 41.0);
    CHECK(post.beta == 11.0);

    auto [gold2, grid2] = gold_with_counts(25, 25);
    const prob::BetaPosterior post2 = test_classifier(grid2, gold2, 0);
    CHECK(post2.alpha == 26.0);
    CHECK(post2.beta == 26.0);

    // no gold entries for filter 7: prior unchanged
    const prob::BetaPosterior post3 = test_classifier(grid, gold, 7);
    CHECK(post3.alpha == 1.0);
    CHECK(post3.beta == 1.0);
}

TEST_CASE("test_classifier raises on missing coverage") {
    auto [gold, grid] = gold_with_counts(5, 0);
    LabelGrid incomplete;
    incomplete.set(0, 0, VoteLabel::OUT); // covers only the first gold pair
    CHECK_THROWS_AS(test_classifier(incomplete, gold, 0), coverage_error);
}

TEST_CASE("gold acquisition cost scales with distinct items") {
    std::vector<GoldEntry> entries;
    for (int i = 0; i < 10; ++i)
        for (int f = 0; f < 3; ++f) entries.push_back({i, f, VoteLabel::IN});
    const GoldSet gold = make_gold_set(std::move(entries), 20.0);
    CHECK(gold.distinct_items() == 10);
    CHECK(gold.acquisition_cost == doctest::Approx(200.0));
    CHECK_THROWS_AS(
        make_gold_set({{0, 0, VoteLabel::IN}, {0, 0, VoteLabel::OUT}}, 20.0),
        std::invalid_argument);
}

TEST_CASE("select_classifiers gates on P(accuracy > 0.5)") {
    auto [gold, grid] = gold_with_counts(40, 10);
    auto profiles = select_classifiers(
        test_classifiers(std::vector<LabelGrid>{grid}, gold, 1), 0.95);
    CHECK(profiles[0].retained_for(0)); // Beta(41,11): P(>0.5) ~ 0.9999926

    auto [gold2, grid2] = gold_with_counts(25, 25);
    auto rejected = select_classifiers(
        test_classifiers(std::vector<LabelGrid>{grid2}, gold2, 1), 0.95);
    CHECK_FALSE(rejected[0].retained_for(0)); // Beta(26,26): exactly 0.5

    // empty gold: Beta(1,1) stays at 0.5, rejected at any threshold > 0.5
    const GoldSet empty = make_gold_set({}, 20.0);
    auto untested = select_classifiers(
        test_classifiers(std::vector<LabelGrid>{grid}, empty, 1), 0.51);
    CHECK_FALSE(untested[0].retained_anywhere());
}

TEST_CASE("gating is monotone in added evidence") {
    for (int correct = 0; correct <= 30; ++correct) {
        for (int failed = 0; failed <= 30; failed += 3) {
            const prob::BetaPosterior base{1.0 + correct, 1.0 + failed};
            const double p = prob::beta_prob_better_than_random(base);
            const double p_more_correct =
                prob::beta_prob_better_than_random({base.alpha + 1.0, base.beta});
            const double p_more_failed =
                prob::beta_prob_better_than_random({base.alpha, base.beta + 1.0});
            CHECK(p_more_correct >= p - 1e-12);
            CHECK(p_more_failed <= p + 1e-12);
        }
    }
}

TEST_CASE("per-filter gating is independent across filters") {
    std::vector<GoldEntry> entries;
    LabelGrid grid;
    for (int i = 0; i < 50; ++i) {
        entries.push_back({i, 0, VoteLabel::OUT});
        entries.push_back({i, 1, VoteLabel::OUT});
        grid.set(i, 0, VoteLabel::OUT);                                // always right on f0
        grid.set(i, 1, i % 2 == 0 ? VoteLabel::OUT : VoteLabel::IN);   // coin-ish on f1
    }
    const GoldSet gold = make_gold_set(std::move(entries), 20.0);
    auto profiles =
        select_classifiers(test_classifiers(std::vector<LabelGrid>{grid}, gold, 2), 0.95);
    CHECK(profiles[0].retained_for(0));
    CHECK_FALSE(profiles[0].retained_for(1));
}
