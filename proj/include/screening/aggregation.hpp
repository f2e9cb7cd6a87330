#ifndef SCREENING_AGGREGATION_HPP
#define SCREENING_AGGREGATION_HPP

#include <span>
#include <unordered_map>
#include <vector>

#include "screening/types.hpp"

namespace screening::aggregation {

// Output of the baseline-run label aggregation.
struct BaselineEstimate {
    std::vector<FilterEstimate> filter_estimates;
    // (item, filter) -> probability the filter applies, keyed by LabelGrid::key.
    std::unordered_map<std::uint64_t, double> label_posteriors;
    std::vector<double> log_likelihood_trace;

    double posterior(int item_id, int filter_id) const {
        auto it = label_posteriors.find(LabelGrid::key(item_id, filter_id));
        if (it == label_posteriors.end())
            throw coverage_error("no posterior for requested (item, filter) pair");
        return it->second;
    }
};

// Majority label; ties resolve to IN (conservative toward inclusion).
VoteLabel majority_vote(std::span<const VoteLabel> votes);

// Per-filter binary Dawid-Skene with one symmetric accuracy parameter per
// filter, initialized from majority vote. Filters without votes come back
// flagged uninformed at theta = alpha = 0.5.
BaselineEstimate em_estimate(std::span<const VoteRecord> votes, int n_filters,
                             int max_iters = 50, double tol = 1e-6);

} // namespace screening::aggregation

#endif
