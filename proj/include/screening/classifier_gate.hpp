#ifndef SCREENING_CLASSIFIER_GATE_HPP
#define SCREENING_CLASSIFIER_GATE_HPP

#include <span>
#include <vector>

#include "screening/prob.hpp"
#include "screening/types.hpp"

namespace screening::classifier_gate {

struct GoldEntry {
    int item_id = 0;
    int filter_id = 0;
    VoteLabel true_label = VoteLabel::IN;
};

// Expert-labeled test pairs; acquisition costs ec per distinct item.
struct GoldSet {
    std::vector<GoldEntry> entries;
    double acquisition_cost = 0.0;

    int distinct_items() const;
};

GoldSet make_gold_set(std::vector<GoldEntry> entries, double expert_cost);

// Per-classifier accuracy posteriors and gating verdicts, one per filter.
struct ClassifierProfile {
    int classifier_id = 0;
    double query_cost = 0.0;
    std::vector<prob::BetaPosterior> per_filter_posterior;
    std::vector<bool> retained;

    bool retained_for(int filter_id) const { return retained[static_cast<std::size_t>(filter_id)]; }
    double accuracy_mean(int filter_id) const {
        return per_filter_posterior[static_cast<std::size_t>(filter_id)].mean();
    }
    bool retained_anywhere() const {
        for (bool r : retained)
            if (r) return true;
        return false;
    }
};

// Score one classifier's outputs against the gold entries of one filter:
// Beta(prior.alpha + correct, prior.beta + failed). Throws coverage_error if
// any gold pair lacks an output.
prob::BetaPosterior test_classifier(const LabelGrid& outputs, const GoldSet& gold, int filter_id,
                                    const prob::BetaPosterior& prior = {1.0, 1.0});

// Build profiles for every classifier over every filter.
std::vector<ClassifierProfile> test_classifiers(std::span<const LabelGrid> outputs,
                                                const GoldSet& gold, int n_filters,
                                                const prob::BetaPosterior& prior = {1.0, 1.0});

// Mark retained[f] = true iff P(accuracy > 0.5) exceeds the selection
// threshold. A classifier may be retained for some filters and not others.
std::vector<ClassifierProfile> select_classifiers(std::vector<ClassifierProfile> profiles,
                                                  double selection_threshold);

} // namespace screening::classifier_gate

#endif
