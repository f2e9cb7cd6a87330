#include <doctest.h>

#include <cmath>
#include <numeric>

#include "screening/hsr_engine.hpp"
#include "screening/simworld.hpp"

using namespace screening;
using namespace screening::hsr;

namespace {

std::vector<int> iota_ids(int n) {
    std::vector<int> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    return ids;
}

// Classifier grids that copy the world truth exactly.
std::vector<LabelGrid> perfect_outputs(const simworld::WorldTruth& world) {
    std::vector<LabelGrid> outputs(1);
    for (int i = 0; i < world.n_items; ++i)
        for (int f = 0; f < world.n_filters(); ++f)
            outputs[0].set(i, f, world.applies(i, f) ? VoteLabel::OUT : VoteLabel::IN);
    return outputs;
}

classifier_gate::GoldSet gold_from_world(const simworld::WorldTruth& world, int n_gold,
                                         double expert_cost) {
    std::vector<classifier_gate::GoldEntry> entries;
    for (int i = 0; i < n_gold; ++i)
        for (int f = 0; f < world.n_filters(); ++f)
            entries.push_back({i, f, world.applies(i, f) ? VoteLabel::OUT : VoteLabel::IN});
    return classifier_gate::make_gold_set(std::move(entries), expert_cost);
}

} // namespace

TEST_CASE("update_power follows the decided-plus-prior-mass rule") {
    ensemble::PowerSmoothing smoothing; // 0.8 above 0.5

    SUBCASE("nothing decided, uniform priors") {
        std::vector<int> ids = iota_ids(10);
        std::vector<FilterEstimate> powers{{0, 0.3, 0.7, true}};
        ensemble::PowerSmoothing off{false, 0.8, 0.5};
        const auto priors =
            ensemble::build_priors(ensemble::PriorMode::POWER_ONLY, ids, {}, {}, nullptr, powers, off);
        std::vector<sr::ItemState> items;
        for (int i : ids) {
            sr::ItemState item;
            item.item_id = i;
            item.in_posteriors = {0.7};
            items.push_back(item);
        }
        const auto estimates = update_power(items, priors, smoothing);
        CHECK(estimates[0].power_hat == doctest::Approx(0.3));
    }

    SUBCASE("all decided OUT saturates, then clamps and smooths to 0.792") {
        std::vector<int> ids = iota_ids(10);
        std::vector<FilterEstimate> powers{{0, 0.3, 0.7, true}};
        ensemble::PowerSmoothing off{false, 0.8, 0.5};
        const auto priors =
            ensemble::build_priors(ensemble::PriorMode::POWER_ONLY, ids, {}, {}, nullptr, powers, off);
        std::vector<sr::ItemState> items;
        for (int i : ids) {
            sr::ItemState item;
            item.item_id = i;
            item.in_posteriors = {0.001};
            item.status = sr::ItemStatus::OUT;
            items.push_back(item);
        }
        const auto estimates = update_power(items, priors, smoothing);
        CHECK(estimates[0].power_hat == doctest::Approx(0.792)); // 0.99 * 0.8
    }

    SUBCASE("raw 0.6 smooths to 0.48") {
        std::vector<int> ids = iota_ids(10);
        std::vector<FilterEstimate> powers{{0, 0.6, 0.7, true}};
        ensemble::PowerSmoothing off{false, 0.8, 0.5};
        const auto priors =
            ensemble::build_priors(ensemble::PriorMode::POWER_ONLY, ids, {}, {}, nullptr, powers, off);
        std::vector<sr::ItemState> items;
        for (int i : ids) {
            sr::ItemState item;
            item.item_id = i;
            item.in_posteriors = {0.4};
            items.push_back(item);
        }
        const auto estimates = update_power(items, priors, smoothing);
        CHECK(estimates[0].power_hat == doctest::Approx(0.48));
    }
}

TEST_CASE("finalize_unclassified labels leftovers IN and difficult") {
    std::vector<sr::ItemState> empty;
    sr::finalize_unclassified(empty);
    CHECK(empty.empty());

    std::vector<sr::ItemState> items(3);
    items[0].status = sr::ItemStatus::OUT;
    items[1].status = sr::ItemStatus::GIVEN_UP;
    items[2].status = sr::ItemStatus::UNDECIDED;
    sr::finalize_unclassified(items);
    CHECK(items[0].status == sr::ItemStatus::OUT);
    CHECK_FALSE(items[0].difficult);
    CHECK(items[1].status == sr::ItemStatus::IN);
    CHECK(items[1].difficult);
    CHECK(items[2].status == sr::ItemStatus::IN);
    CHECK(items[2].difficult);
}

TEST_CASE("hsr with no classifiers is bit-identical to sr across 10 seeds") {
    std::vector<FilterSpec> filters{{0, 0.3, 0.0}, {1, 0.25, 0.0}};
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto world = simworld::generate_world(120, filters, 700 + seed);
        const auto ids = iota_ids(120);
        sr::EngineConfig config;
        LossParams loss{10.0, 20.0};

        simworld::SimCrowdSource sr_crowd(world, {0.6, 0.85}, 900 + seed);
        const sr::RunResult sr_run =
            sr::sr_classify(ids, world.n_filters(), sr_crowd, config, loss);

        HsrJob job;
        job.config = config;
        job.prior_mode = ensemble::PriorMode::NAIVE_BAYES;
        job.gold = classifier_gate::make_gold_set({}, loss.expert_cost);
        simworld::SimCrowdSource hsr_crowd(world, {0.6, 0.85}, 900 + seed);
        const HsrResult hsr_run =
            hsr_classify(ids, world.n_filters(), hsr_crowd, {}, job, loss);

        CHECK(hsr_run.effective_mode == ensemble::PriorMode::POWER_ONLY);
        REQUIRE(hsr_run.run.items.size() == sr_run.items.size());
        for (std::size_t i = 0; i < sr_run.items.size(); ++i) {
            CHECK(hsr_run.run.items[i].status == sr_run.items[i].status);
            CHECK(hsr_run.run.items[i].votes_spent == sr_run.items[i].votes_spent);
            CHECK(hsr_run.run.items[i].in_posteriors == sr_run.items[i].in_posteriors);
        }
        CHECK(hsr_run.run.ledger.crowd_votes() == sr_run.ledger.crowd_votes());
        REQUIRE(hsr_run.run.vote_log.size() == sr_run.vote_log.size());
        for (std::size_t v = 0; v < sr_run.vote_log.size(); ++v) {
            CHECK(hsr_run.run.vote_log[v].item_id == sr_run.vote_log[v].item_id);
            CHECK(hsr_run.run.vote_log[v].filter_id == sr_run.vote_log[v].filter_id);
            CHECK(hsr_run.run.vote_log[v].label == sr_run.vote_log[v].label);
        }
    }
}

TEST_CASE("a stronger OUT prior never increases the OUT-direction n_min") {
    sr::EngineConfig config;
    for (double alpha : {0.6, 0.7, 0.85}) {
        int previous = sr::kNoDecision;
        for (double prior_out : {0.1, 0.3, 0.5, 0.7, 0.9}) {
            sr::ItemState item;
            item.item_id = 0;
            item.in_posteriors = {1.0 - prior_out};
            const sr::RunPlan plan = sr::estimate_min_votes(item, 0, alpha, config);
            if (plan.direction != sr::PlanDirection::OUT) continue;
            if (previous != sr::kNoDecision && plan.feasible()) CHECK(plan.n_min <= previous);
            if (plan.feasible()) previous = plan.n_min;
        }
    }
}

TEST_CASE("one perfect classifier cuts crowd votes versus sr (paired seeds)") {
    std::vector<FilterSpec> filters{{0, 0.3, 0.0}};
    sr::EngineConfig config;
    config.give_up_cost_factor = 5.0; // generous bar so sr pursues items too
    LossParams loss{10.0, 20.0};

    long long sr_total = 0, hsr_total = 0;
    int plan_never_worse = 0, runs = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto world = simworld::generate_world(100, filters, 1100 + seed);
        const auto ids = iota_ids(100);
        const auto outputs = perfect_outputs(world);

        simworld::SimCrowdSource sr_crowd(world, {0.8, 0.8}, 1200 + seed);
        const sr::RunResult sr_run =
            sr::sr_classify(ids, world.n_filters(), sr_crowd, config, loss);
        sr_total += sr_run.ledger.crowd_votes();

        HsrJob job;
        job.config = config;
        job.prior_mode = ensemble::PriorMode::NAIVE_BAYES;
        job.gold = gold_from_world(world, 20, loss.expert_cost);
        simworld::SimCrowdSource hsr_crowd(world, {0.8, 0.8}, 1200 + seed);
        const HsrResult hsr_run =
            hsr_classify(ids, world.n_filters(), hsr_crowd, outputs, job, loss);
        hsr_total += hsr_run.run.ledger.crowd_votes();
        CHECK(hsr_run.effective_mode == ensemble::PriorMode::NAIVE_BAYES);

        // first assigned plan per item: the informed prior is never worse
        const auto& alpha = sr_run.filter_estimates;
        for (const auto& sr_item : sr_run.items) {
            sr::ItemState fresh_sr;
            fresh_sr.item_id = sr_item.item_id;
            fresh_sr.in_posteriors = {1.0 -
                                      ensemble::smooth_power(alpha[0].power_hat, config.smoothing)};
            const auto sr_plan = sr::assign_filter(fresh_sr, sr_run.filter_estimates, config);

            sr::ItemState fresh_hsr;
            fresh_hsr.item_id = sr_item.item_id;
            fresh_hsr.in_posteriors = {1.0 - hsr_run.priors.at(sr_item.item_id, 0)};
            const auto hsr_plan =
                sr::assign_filter(fresh_hsr, hsr_run.run.filter_estimates, config);
            ++runs;
            if (hsr_plan.n_min <= sr_plan.n_min) ++plan_never_worse;
        }
    }
    CHECK(hsr_total < sr_total);
    CHECK(plan_never_worse == runs);
}

TEST_CASE("hsr ledger components are non-negative and sum to the total") {
    std::vector<FilterSpec> filters{{0, 0.3, 0.0}, {1, 0.25, 0.0}};
    const auto world = simworld::generate_world(100, filters, 1300);
    const auto ids = iota_ids(100);
    const auto outputs = perfect_outputs(world);
    HsrJob job;
    job.gold = gold_from_world(world, 10, 20.0);
    LossParams loss{10.0, 20.0};
    simworld::SimCrowdSource crowd(world, {0.6, 0.85}, 1301);
    const HsrResult result = hsr_classify(ids, world.n_filters(), crowd, outputs, job, loss);

    const auto& ledger = result.run.ledger;
    CHECK(ledger.baseline_votes >= 0);
    CHECK(ledger.adaptive_votes >= 0);
    CHECK(ledger.gold_cost >= 0.0);
    CHECK(ledger.gold_cost == doctest::Approx(10 * 20.0));
    CHECK(ledger.total() ==
          doctest::Approx(static_cast<double>(ledger.baseline_votes + ledger.adaptive_votes) +
                          ledger.gold_cost + ledger.expert_fallback_cost));

    // no machine-only OUT decisions
    for (const auto& item : result.run.items)
        if (item.status == sr::ItemStatus::OUT) CHECK(item.votes_spent >= 1);

    // power trajectory recorded once per iteration
    CHECK(static_cast<int>(result.power_trajectory.size()) == result.run.iterations);
}

TEST_CASE("stacked mode activates once enough pairs are decided") {
    std::vector<FilterSpec> filters{{0, 0.35, 0.0}};
    const auto world = simworld::generate_world(400, filters, 1400);
    const auto ids = iota_ids(400);
    // three noisy-but-decent classifiers
    std::vector<LabelGrid> outputs(3);
    std::mt19937_64 rng(1401);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < world.n_items; ++i) {
            const bool correct = uniform(rng) < 0.8;
            const bool out = world.applies(i, 0) == correct;
            outputs[c].set(i, 0, out ? VoteLabel::OUT : VoteLabel::IN);
        }

    HsrJob job;
    job.prior_mode = ensemble::PriorMode::STACKED;
    job.gold = gold_from_world(world, 30, 20.0);
    job.stacker.min_training_size = 60;
    job.stacker.retrain_decided_threshold = 30;
    job.config.give_up_cost_factor = 5.0;
    LossParams loss{10.0, 20.0};
    simworld::SimCrowdSource crowd(world, {0.75, 0.85}, 1402);
    const HsrResult result = hsr_classify(ids, world.n_filters(), crowd, outputs, job, loss);
    CHECK(result.stacker_retrains >= 1);
    CHECK(result.effective_mode == ensemble::PriorMode::STACKED);
}
