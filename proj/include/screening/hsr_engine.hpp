#ifndef SCREENING_HSR_ENGINE_HPP
#define SCREENING_HSR_ENGINE_HPP

#include <span>
#include <vector>

#include "screening/classifier_gate.hpp"
#include "screening/ensemble.hpp"
#include "screening/sr_engine.hpp"

namespace screening::hsr {

// One hybrid classification job: engine knobs, prior mode, gold set for
// gating, and stacker policy.
struct HsrJob {
    sr::EngineConfig config;
    ensemble::PriorMode prior_mode = ensemble::PriorMode::NAIVE_BAYES;
    classifier_gate::GoldSet gold;
    double selection_threshold = 0.95;
    prob::BetaPosterior gate_prior{1.0, 1.0};
    ensemble::StackerConfig stacker;
};

struct HsrResult {
    sr::RunResult run;
    ensemble::PriorMatrix priors; // priors in force at the end of the run
    std::vector<classifier_gate::ClassifierProfile> profiles;
    ensemble::PriorMode effective_mode = ensemble::PriorMode::POWER_ONLY;
    std::vector<double> initial_power; // theta^0, per-filter mean of the priors
    std::vector<std::vector<FilterEstimate>> power_trajectory; // one entry per iteration
    int stacker_retrains = 0;
};

// Power re-estimate from decided items plus the ensemble priors of the rest:
// theta_f = [#decided with per-filter OUT posterior > 0.5 + sum of undecided
// priors] / |I|, then smoothed.
std::vector<FilterEstimate> update_power(std::span<const sr::ItemState> items,
                                         const ensemble::PriorMatrix& priors,
                                         const ensemble::PowerSmoothing& smoothing);

// Algorithm: gate classifiers on the gold set, ensemble the survivors into
// per-(item, filter) priors, run the baseline for crowd accuracy, then the
// adaptive loop with the ML priors. Degrades to POWER_ONLY (exactly the SR
// behavior) when no classifier survives gating.
HsrResult hsr_classify(std::span<const int> item_ids, int n_filters, VoteSource& crowd,
                       std::span<const LabelGrid> classifier_outputs, const HsrJob& job,
                       const LossParams& loss);

} // namespace screening::hsr

#endif
