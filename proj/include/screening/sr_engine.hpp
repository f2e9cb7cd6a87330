#ifndef SCREENING_SR_ENGINE_HPP
#define SCREENING_SR_ENGINE_HPP

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "screening/aggregation.hpp"
#include "screening/ensemble.hpp"
#include "screening/types.hpp"

namespace screening::sr {

enum class ItemStatus { UNDECIDED, IN, OUT, GIVEN_UP };

const char* to_string(ItemStatus status);

// Per-item classification state.
struct ItemState {
    int item_id = 0;
    std::vector<double> in_posteriors; // P(i in IN_f) per filter
    std::vector<VoteRecord> votes;
    ItemStatus status = ItemStatus::UNDECIDED;
    int votes_spent = 0;
    bool difficult = false; // set when finalized without a confident decision

    bool decided() const { return status == ItemStatus::IN || status == ItemStatus::OUT; }
};

// n_min sentinel: no vote count within n_max reaches a decision.
inline constexpr int kNoDecision = std::numeric_limits<int>::max();

enum class PlanDirection { OUT, IN };

// Shortest path to a decision for one item: the filter to poll, the minimal
// number of consecutive same-direction votes, and the probability of that run.
struct RunPlan {
    int item_id = -1;
    int chosen_filter = -1;
    int n_min = kNoDecision;
    double p_min = 0.0;
    PlanDirection direction = PlanDirection::OUT;

    bool feasible() const { return n_min != kNoDecision; }
};

struct EngineConfig {
    double p_out_threshold = 0.99;
    double p_in_threshold = 0.99;
    int baseline_items = 50;
    int baseline_votes_per_pair = 5;
    double batch_fraction = 0.1;
    int n_max = 10;
    double give_up_cost_factor = 1.0; // gamma in the give-up rule
    std::optional<long long> budget;  // total crowd-vote cap, baseline included
    ensemble::PowerSmoothing smoothing;
    // Sensitivity-analysis knob: re-run EM over all collected votes every N
    // adaptive iterations and refresh the per-filter worker accuracies.
    // Default: accuracies stay frozen at the baseline estimates.
    std::optional<int> alpha_reestimate_interval;

    void validate() const;
};

struct CostLedger {
    long long baseline_votes = 0;
    long long adaptive_votes = 0;
    double gold_cost = 0.0;
    double expert_fallback_cost = 0.0; // filled downstream once truth is known

    long long crowd_votes() const { return baseline_votes + adaptive_votes; }
    double total() const {
        return static_cast<double>(crowd_votes()) + gold_cost + expert_fallback_cost;
    }
};

struct RunResult {
    std::vector<ItemState> items;
    CostLedger ledger;
    std::vector<FilterEstimate> filter_estimates; // baseline EM output
    std::vector<VoteRecord> vote_log;             // chronological, baseline first
    int iterations = 0;
};

// Collect baseline_votes_per_pair votes on every (sampled item, filter) and
// aggregate with EM. Throws budget_exhausted_error if the baseline alone
// would exceed the remaining budget.
aggregation::BaselineEstimate baseline_run(std::span<const int> item_sample, int n_filters,
                                           VoteSource& crowd, const EngineConfig& config,
                                           CostLedger& ledger,
                                           std::vector<VoteRecord>* vote_log = nullptr);

// Minimal consecutive same-direction votes on one filter that cross a
// decision threshold, and the probability of that vote run. The cheaper
// direction wins; ties favor OUT.
RunPlan estimate_min_votes(const ItemState& item, int filter_id, double alpha_f,
                           const EngineConfig& config);

// Best plan across filters: smallest n_min, ties by larger p_min, then
// lowest filter id.
RunPlan assign_filter(const ItemState& item, std::span<const FilterEstimate> estimates,
                      const EngineConfig& config);

// True iff the item should be given up: no feasible plan within n_max, or
// expected votes-to-decision n_min / p_min above gamma * expert_cost.
bool check_stop(const RunPlan& plan, const LossParams& loss, const EngineConfig& config);

// Label every UNDECIDED or GIVEN_UP item IN, flagged difficult.
void finalize_unclassified(std::vector<ItemState>& items);

// Hook invoked at the end of every adaptive iteration; may hand back a new
// prior matrix, in which case undecided items are refolded onto it.
using IterationHook = std::function<std::optional<ensemble::PriorMatrix>(
    int iteration, const std::vector<ItemState>& items)>;

// The adaptive loop shared by SR and HSR: plan, stop-check, batch-select,
// vote, update, decide. `items` must arrive with priors folded in.
RunResult run_adaptive_loop(std::vector<ItemState> items, std::span<const double> alpha_hats,
                            VoteSource& crowd, const EngineConfig& config, const LossParams& loss,
                            CostLedger ledger, std::vector<VoteRecord> vote_log,
                            const IterationHook& hook = nullptr);

// Build item states from a prior matrix and fold any existing votes.
std::vector<ItemState> init_item_states(std::span<const int> item_ids,
                                        const ensemble::PriorMatrix& priors,
                                        std::span<const double> alpha_hats,
                                        std::span<const VoteRecord> prior_votes);

// Crowd-only Shortest Run: baseline run, power-only priors, adaptive loop.
RunResult sr_classify(std::span<const int> item_ids, int n_filters, VoteSource& crowd,
                      const EngineConfig& config, const LossParams& loss);

} // namespace screening::sr

#endif
