#ifndef SCREENING_EXPERIMENTS_HPP
#define SCREENING_EXPERIMENTS_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "screening/hsr_engine.hpp"
#include "screening/simworld.hpp"
#include "screening/sr_engine.hpp"

namespace screening::experiments {

enum class Strategy { SR, HSR_NB, HSR_STACKED, MACHINES_NB, MACHINES_STACKED, BEST_SINGLE };

const char* to_string(Strategy s);
Strategy strategy_from_string(const std::string& name);

struct ErrorCounts {
    int true_inclusions = 0;
    int false_inclusions = 0;
    int false_exclusions = 0;
    int true_exclusions = 0;
};

// Tally decision errors against the world truth. Every decision must be IN
// or OUT (finalize first); anything else raises coverage_error.
ErrorCounts count_errors(std::span<const sr::ItemState> decisions,
                         const simworld::WorldTruth& truth);

// (k * FE + FI) / n_items
double compute_loss(std::span<const sr::ItemState> decisions, const simworld::WorldTruth& truth,
                    const LossParams& loss, int n_items);

// CC / EC with CC = CV + FI * ec (+ gold cost when included), EC = n * ec.
double compute_price_ratio(long long crowd_votes, int false_inclusions, const LossParams& loss,
                           int n_items, double gold_cost = 0.0, bool include_gold = false);

struct RecallPrecision {
    double recall = 1.0;
    double precision = 1.0;
    bool recall_defined = true;    // false when no item truly passes
    bool precision_defined = true; // false when nothing was labeled IN
};

RecallPrecision compute_recall_precision(std::span<const sr::ItemState> decisions,
                                         const simworld::WorldTruth& truth);

struct MetricsReport {
    double loss_per_item = 0.0;
    double recall = 1.0;
    double precision = 1.0;
    double price_ratio = 0.0;
    long long crowd_votes = 0;
    int false_inclusions = 0;
    int false_exclusions = 0;
    int true_inclusions = 0;
    double gold_cost = 0.0;
    std::uint64_t run_seed = 0;
};

struct SweepAxis {
    std::string parameter;
    std::vector<double> values;
};

struct ExperimentConfig {
    int n_items = 1000;
    std::vector<FilterSpec> filters; // empty = derive from n_filters/pass_rate
    int n_filters = 4;
    double pass_rate = 0.3;
    double filter_difficulty = 0.0;
    simworld::CrowdModel crowd;
    simworld::MachinePoolConfig machines;
    sr::EngineConfig engine;
    LossParams loss;
    int gold_items = 50;
    double selection_threshold = 0.95;
    prob::BetaPosterior gate_prior{1.0, 1.0};
    ensemble::StackerConfig stacker;
    int stacker_training_items = 500; // expert-labeled slice for machines-stacked
    std::vector<Strategy> strategies{Strategy::SR, Strategy::HSR_NB};
    int n_repetitions = 20;
    std::uint64_t base_seed = 1;
    std::optional<SweepAxis> sweep;
    bool include_gold_cost = false;
    bool exclude_gold_from_pool = true;

    std::vector<FilterSpec> resolved_filters() const;
    void validate() const;
};

// Set a sweep parameter by path (e.g. "machines.correlation",
// "loss.expert_cost", "filters.0.power"). Throws config_error on unknown
// parameters.
void apply_sweep_value(ExperimentConfig& config, const std::string& parameter, double value);

struct AggregateRow {
    double sweep_value = 0.0;
    Strategy strategy = Strategy::SR;
    std::string metric;
    double mean = 0.0;
    double stddev = 0.0;
    int n_ok = 0;
    int n_failed = 0;
};

struct ExperimentReport {
    std::vector<double> sweep_values;
    std::vector<Strategy> strategies;
    std::vector<AggregateRow> rows;
    // raw per-repetition metrics: [sweep][strategy][rep], failed runs absent
    std::vector<std::vector<std::vector<std::optional<MetricsReport>>>> raw;

    const AggregateRow& row(double sweep_value, Strategy s, const std::string& metric) const;
    double mean_of(double sweep_value, Strategy s, const std::string& metric) const;
};

// Run every strategy on identical world / pool / gold / vote-stream seeds
// (paired design) for each sweep value and repetition.
ExperimentReport run_experiment(const ExperimentConfig& config, int jobs = 1);

// One repetition's shared inputs, exposed for replay and tests.
struct RepetitionSetup {
    simworld::WorldTruth world; // includes the stacker training slice
    simworld::MachinePool pool;
    classifier_gate::GoldSet gold;
    std::vector<int> eval_items;    // evaluation pool (gold excluded by default)
    std::vector<int> training_items; // expert-labeled slice for machines-stacked
    std::uint64_t vote_seed = 0;
};

RepetitionSetup make_repetition_setup(const ExperimentConfig& config, std::size_t sweep_index,
                                      int repetition);

// Run one strategy against a prepared setup using the given vote source.
// run_out receives the full run; hsr_out additionally receives gating and
// prior diagnostics when the strategy is a hybrid one.
MetricsReport run_strategy(Strategy strategy, const ExperimentConfig& config,
                           const RepetitionSetup& setup, VoteSource& crowd,
                           sr::RunResult* run_out = nullptr, hsr::HsrResult* hsr_out = nullptr);

} // namespace screening::experiments

#endif
