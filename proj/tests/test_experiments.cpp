#include <doctest.h>

#include <cmath>
#include <sstream>

#include "screening/experiments.hpp"
#include "screening/io.hpp"

using namespace screening;
using namespace screening::experiments;

namespace {

std::vector<sr::ItemState> make_decisions(const std::vector<std::pair<int, bool>>& labeled_in) {
    std::vector<sr::ItemState> items;
    for (auto [id, in] : labeled_in) {
        sr::ItemState item;
        item.item_id = id;
        item.status = in ? sr::ItemStatus::IN : sr::ItemStatus::OUT;
        items.push_back(item);
    }
    return items;
}

// A world fixed by hand: items 0..pass-1 pass, the rest are excluded by filter 0.
simworld::WorldTruth fixed_world(int n_items, int n_pass) {
    simworld::WorldTruth world;
    world.n_items = n_items;
    world.filters = {{0, 0.5, 0.0}};
    world.truth.assign(n_items, 0);
    for (int i = n_pass; i < n_items; ++i) world.truth[i] = 1;
    return world;
}

ExperimentConfig small_config() {
    ExperimentConfig config;
    config.n_items = 60;
    config.n_filters = 2;
    config.pass_rate = 0.4;
    config.gold_items = 8;
    config.machines.n_classifiers = 4;
    config.engine.baseline_items = 15;
    config.stacker_training_items = 0;
    config.n_repetitions = 2;
    config.strategies = {Strategy::SR, Strategy::HSR_NB, Strategy::MACHINES_NB};
    config.base_seed = 77;
    return config;
}

} // namespace

TEST_CASE("compute_loss arithmetic") {
    auto world = fixed_world(100, 50);
    LossParams loss{10.0, 20.0};

    // zero errors
    std::vector<std::pair<int, bool>> perfect;
    for (int i = 0; i < 100; ++i) perfect.push_back({i, i < 50});
    CHECK(compute_loss(make_decisions(perfect), world, loss, 100) == 0.0);

    // FE = 2 (passing labeled OUT), FI = 5 (excluded labeled IN)
    std::vector<std::pair<int, bool>> mixed = perfect;
    mixed[0].second = false;
    mixed[1].second = false;
    for (int i = 50; i < 55; ++i) mixed[i].second = true;
    CHECK(compute_loss(make_decisions(mixed), world, loss, 100) == doctest::Approx(0.25));

    // everything labeled IN: FI = 50, loss = 50/100 with any k
    std::vector<std::pair<int, bool>> all_in;
    for (int i = 0; i < 100; ++i) all_in.push_back({i, true});
    CHECK(compute_loss(make_decisions(all_in), world, loss, 100) == doctest::Approx(0.5));

    // undecided input is a coverage error
    std::vector<sr::ItemState> bad(1);
    bad[0].item_id = 0;
    CHECK_THROWS_AS(compute_loss(bad, world, loss, 1), coverage_error);
}

TEST_CASE("compute_price_ratio arithmetic") {
    LossParams loss{10.0, 20.0};
    CHECK(compute_price_ratio(0, 1000, loss, 1000) == doctest::Approx(1.0));
    CHECK(compute_price_ratio(3000, 10, loss, 1000) == doctest::Approx(0.16));
    CHECK(compute_price_ratio(0, 0, loss, 1000) == 0.0);
    CHECK(compute_price_ratio(0, 0, loss, 1000, 500.0, true) == doctest::Approx(0.025));
}

TEST_CASE("compute_recall_precision arithmetic") {
    auto world = fixed_world(200, 100);
    std::vector<std::pair<int, bool>> decisions;
    // TI = 95, FE = 5, FI = 30
    for (int i = 0; i < 100; ++i) decisions.push_back({i, i < 95});
    for (int i = 100; i < 200; ++i) decisions.push_back({i, i < 130});
    const auto rp = compute_recall_precision(make_decisions(decisions), world);
    CHECK(rp.recall == doctest::Approx(0.95));
    CHECK(rp.precision == doctest::Approx(0.76));

    // everything IN: recall 1, precision = pass rate
    std::vector<std::pair<int, bool>> all_in;
    for (int i = 0; i < 200; ++i) all_in.push_back({i, true});
    const auto trivial = compute_recall_precision(make_decisions(all_in), world);
    CHECK(trivial.recall == doctest::Approx(1.0));
    CHECK(trivial.precision == doctest::Approx(0.5));
}

TEST_CASE("trivial-inclusion anchor: label-everything-IN scores exactly") {
    auto world = fixed_world(100, 30);
    LossParams loss{10.0, 20.0};
    std::vector<std::pair<int, bool>> all_in;
    for (int i = 0; i < 100; ++i) all_in.push_back({i, true});
    const auto decisions = make_decisions(all_in);
    const auto counts = count_errors(decisions, world);
    CHECK(counts.false_inclusions == 70);
    CHECK(compute_price_ratio(0, counts.false_inclusions, loss, 100) == doctest::Approx(0.7));
    CHECK(compute_recall_precision(decisions, world).recall == 1.0);
}

TEST_CASE("metrics agree with a from-scratch recount") {
    const auto config = small_config();
    const auto setup = make_repetition_setup(config, 0, 0);
    simworld::SimCrowdSource crowd(setup.world, config.crowd, setup.vote_seed);
    sr::RunResult run;
    const MetricsReport m = run_strategy(Strategy::SR, config, setup, crowd, &run);

    int fi = 0, fe = 0, ti = 0;
    for (const auto& item : run.items) {
        const bool passes = setup.world.item_passes(item.item_id);
        const bool in = item.status == sr::ItemStatus::IN;
        if (passes && in) ++ti;
        if (passes && !in) ++fe;
        if (!passes && in) ++fi;
    }
    const int n = static_cast<int>(run.items.size());
    CHECK(m.false_inclusions == fi);
    CHECK(m.false_exclusions == fe);
    CHECK(m.loss_per_item ==
          doctest::Approx((config.loss.k * fe + fi) / static_cast<double>(n)));
    CHECK(m.price_ratio ==
          doctest::Approx((static_cast<double>(m.crowd_votes) + fi * config.loss.expert_cost) /
                          (n * config.loss.expert_cost)));
    CHECK(m.recall == doctest::Approx(ti / static_cast<double>(ti + fe)));
}

TEST_CASE("repetition setups are identical across calls (paired design)") {
    const auto config = small_config();
    const auto a = make_repetition_setup(config, 0, 1);
    const auto b = make_repetition_setup(config, 0, 1);
    CHECK(a.world.truth == b.world.truth);
    CHECK(a.eval_items == b.eval_items);
    CHECK(a.vote_seed == b.vote_seed);
    REQUIRE(a.pool.accuracies.size() == b.pool.accuracies.size());
    for (std::size_t c = 0; c < a.pool.accuracies.size(); ++c)
        CHECK(a.pool.accuracies[c] == b.pool.accuracies[c]);
    CHECK(a.gold.entries.size() == b.gold.entries.size());

    // gold items are excluded from the evaluation pool by default
    for (const auto& entry : a.gold.entries)
        for (int id : a.eval_items) CHECK(id != entry.item_id);

    // a different repetition gets a different world
    const auto c = make_repetition_setup(config, 0, 0);
    CHECK(c.world.truth != a.world.truth);
}

TEST_CASE("run_experiment validates input and is byte-deterministic") {
    ExperimentConfig bad = small_config();
    bad.n_repetitions = 0;
    CHECK_THROWS_AS(run_experiment(bad), config_error);

    const auto config = small_config();
    const auto r1 = run_experiment(config, 2);
    const auto r2 = run_experiment(config, 1); // thread count must not matter
    std::ostringstream csv1, csv2;
    io::write_results_csv(csv1, r1);
    io::write_results_csv(csv2, r2);
    CHECK(csv1.str() == csv2.str());
    CHECK(!r1.rows.empty());
    for (const auto& row : r1.rows) {
        CHECK(row.n_ok == config.n_repetitions);
        CHECK(row.n_failed == 0);
    }
}

TEST_CASE("sweep axis applies the parameter per point") {
    ExperimentConfig config = small_config();
    config.strategies = {Strategy::MACHINES_NB};
    config.sweep = SweepAxis{"machines.correlation", {0.0, 0.9}};
    config.n_repetitions = 2;
    const auto report = run_experiment(config, 2);
    CHECK(report.sweep_values == std::vector<double>{0.0, 0.9});
    // both points aggregated
    CHECK(std::isfinite(report.mean_of(0.0, Strategy::MACHINES_NB, "recall")));
    CHECK(std::isfinite(report.mean_of(0.9, Strategy::MACHINES_NB, "recall")));

    CHECK_THROWS_AS(apply_sweep_value(config, "bogus.path", 1.0), config_error);
}

TEST_CASE("failed repetitions are recorded and excluded from aggregates") {
    ExperimentConfig config = small_config();
    config.engine.budget = 10; // below the baseline cost: every engine run throws
    config.strategies = {Strategy::SR};
    const auto report = run_experiment(config);
    const auto& row = report.row(0.0, Strategy::SR, "loss");
    CHECK(row.n_ok == 0);
    CHECK(row.n_failed == config.n_repetitions);
}

TEST_CASE("stacked strategies run end to end") {
    ExperimentConfig config = small_config();
    config.n_items = 120;
    config.stacker.min_training_size = 30;
    config.stacker.retrain_decided_threshold = 20;
    config.stacker_training_items = 60;
    config.machines.accuracy_low = 0.7;
    config.machines.accuracy_high = 0.9;
    config.engine.give_up_cost_factor = 3.0;
    config.n_repetitions = 1;
    config.strategies = {Strategy::HSR_STACKED, Strategy::MACHINES_STACKED};
    const auto report = run_experiment(config);
    for (Strategy s : config.strategies) {
        const auto& row = report.row(0.0, s, "recall");
        CHECK(row.n_failed == 0);
        CHECK(row.mean >= 0.0);
        CHECK(row.mean <= 1.0);
    }
}

TEST_CASE("machines-only strategies never spend crowd votes") {
    ExperimentConfig config = small_config();
    config.strategies = {Strategy::MACHINES_NB, Strategy::BEST_SINGLE};
    config.machines.accuracy_low = 0.85;
    config.machines.accuracy_high = 0.95;
    const auto setup = make_repetition_setup(config, 0, 0);
    simworld::SimCrowdSource crowd(setup.world, config.crowd, setup.vote_seed);
    const MetricsReport nb = run_strategy(Strategy::MACHINES_NB, config, setup, crowd);
    CHECK(nb.crowd_votes == 0);
    CHECK(nb.gold_cost == doctest::Approx(config.gold_items * config.loss.expert_cost));
    const MetricsReport best = run_strategy(Strategy::BEST_SINGLE, config, setup, crowd);
    CHECK(best.crowd_votes == 0);
}
