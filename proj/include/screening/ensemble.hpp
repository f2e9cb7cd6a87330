#ifndef SCREENING_ENSEMBLE_HPP
#define SCREENING_ENSEMBLE_HPP

#include <optional>
#include <span>
#include <vector>

#include "screening/classifier_gate.hpp"
#include "screening/types.hpp"

namespace screening::ensemble {

enum class PriorMode { POWER_ONLY, NAIVE_BAYES, STACKED };

const char* to_string(PriorMode mode);

// Tone down over-confident priors: clamp into [0.01, 0.99], then multiply
// values above the activation threshold by the smoothing factor.
struct PowerSmoothing {
    bool enabled = true;
    double factor = 0.8;
    double activation_threshold = 0.5;
};

double smooth_power(double raw, const PowerSmoothing& smoothing);

// Naive-Bayes pooled probability that the filter applies (label = OUT),
// votes weighted by estimated classifier accuracy, computed in log space.
double nb_ensemble_prob(std::span<const VoteLabel> labels, std::span<const double> accuracies);

struct StackerConfig {
    int min_training_size = 100;      // pairs per filter before the stacker activates
    int retrain_decided_threshold = 50; // newly decided items between retrains
    double l2 = 1e-3;
    double grad_tol = 1e-6;
    int max_steps = 10000;
};

// Per-filter logistic model over retained classifiers' binary labels.
struct StackedModel {
    double bias = 0.0;
    std::vector<double> weights;        // one per retained classifier, in classifier_ids order
    std::vector<int> classifier_ids;
    int training_size = 0;
    std::vector<double> loss_trace;     // regularized cross-entropy per accepted step
};

// One training pair: the retained classifiers' labels plus a (possibly soft)
// target probability that the filter applies.
struct StackerSample {
    std::vector<VoteLabel> labels;
    double target = 0.5;
};

StackedModel train_stacker(std::span<const StackerSample> samples,
                           std::vector<int> classifier_ids, const StackerConfig& config);

double stacked_prob(const StackedModel& model, std::span<const VoteLabel> labels);

// Per-(item, filter) prior that the filter applies.
struct PriorMatrix {
    std::vector<int> item_ids;
    int n_filters = 0;
    std::vector<double> values; // row-major, item_ids order
    PriorMode provenance = PriorMode::POWER_ONLY;
    std::vector<PriorMode> filter_provenance; // per filter (mixed fallbacks possible)

    double at(int item_id, int filter_id) const;
    int row_of(int item_id) const;
    void rebuild_index(); // call after changing item_ids

private:
    std::vector<int> row_index_; // id -> row lookup
};

// Assemble the prior matrix for one run. NAIVE_BAYES pools the retained
// classifiers per pair; STACKED applies per-filter models where trained
// (falling back to NB below the training minimum); POWER_ONLY replicates the
// estimated powers. Filters with no retained classifier fall back to
// POWER_ONLY. All values pass smooth_power.
PriorMatrix build_priors(PriorMode mode, std::span<const int> item_ids,
                         std::span<const classifier_gate::ClassifierProfile> profiles,
                         std::span<const LabelGrid> classifier_outputs,
                         const std::vector<std::optional<StackedModel>>* stacked_models,
                         std::span<const FilterEstimate> power_estimates,
                         const PowerSmoothing& smoothing);

} // namespace screening::ensemble

#endif
