#include "screening/hsr_engine.hpp"

#include <algorithm>
#include <cmath>

#include "screening/prob.hpp"

namespace screening::hsr {

std::vector<FilterEstimate> update_power(std::span<const sr::ItemState> items,
                                         const ensemble::PriorMatrix& priors,
                                         const ensemble::PowerSmoothing& smoothing) {
    const int n_filters = priors.n_filters;
    std::vector<FilterEstimate> estimates(n_filters);
    if (items.empty()) return estimates;

    for (int f = 0; f < n_filters; ++f) {
        double mass = 0.0;
        for (const sr::ItemState& item : items) {
            if (item.decided())
                mass += (1.0 - item.in_posteriors[f]) > 0.5 ? 1.0 : 0.0;
            else
                mass += priors.at(item.item_id, f);
        }
        FilterEstimate& est = estimates[f];
        est.filter_id = f;
        est.power_hat = ensemble::smooth_power(mass / static_cast<double>(items.size()), smoothing);
    }
    return estimates;
}

namespace {

// Training rows for one filter's stacker: every (item, filter) pair that has
// received at least one crowd vote, with the current posterior as soft label.
std::vector<ensemble::StackerSample> stacker_training_set(
    const std::vector<sr::ItemState>& items, int filter_id,
    std::span<const std::size_t> retained_classifiers,
    std::span<const classifier_gate::ClassifierProfile> profiles,
    std::span<const LabelGrid> outputs) {
    std::vector<ensemble::StackerSample> samples;
    for (const sr::ItemState& item : items) {
        bool voted = false;
        for (const VoteRecord& v : item.votes)
            if (v.filter_id == filter_id) voted = true;
        if (!voted) continue;
        ensemble::StackerSample s;
        s.target = 1.0 - item.in_posteriors[filter_id];
        s.labels.reserve(retained_classifiers.size());
        for (std::size_t c : retained_classifiers) {
            const auto label = outputs[profiles[c].classifier_id].get(item.item_id, filter_id);
            if (!label) throw coverage_error("classifier output missing during stacker training");
            s.labels.push_back(*label);
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

} // namespace

HsrResult hsr_classify(std::span<const int> item_ids, int n_filters, VoteSource& crowd,
                       std::span<const LabelGrid> classifier_outputs, const HsrJob& job,
                       const LossParams& loss) {
    if (item_ids.empty()) throw std::invalid_argument("hsr_classify: empty item set");
    job.config.validate();
    loss.validate();

    HsrResult result;

    // Gate the classifiers on the gold set.
    result.profiles = classifier_gate::select_classifiers(
        classifier_gate::test_classifiers(classifier_outputs, job.gold, n_filters, job.gate_prior),
        job.selection_threshold);
    bool any_retained = false;
    for (const auto& p : result.profiles) any_retained |= p.retained_anywhere();

    sr::CostLedger ledger;
    ledger.gold_cost = job.gold.acquisition_cost;
    std::vector<VoteRecord> vote_log;

    // Baseline run: crowd accuracy per filter, EM power for fallbacks, and
    // the first stacker training data.
    const std::size_t sample_size = std::min<std::size_t>(
        item_ids.size(), static_cast<std::size_t>(job.config.baseline_items));
    aggregation::BaselineEstimate baseline = sr::baseline_run(
        item_ids.subspan(0, sample_size), n_filters, crowd, job.config, ledger, &vote_log);

    std::vector<double> alpha_hats(n_filters);
    for (int f = 0; f < n_filters; ++f)
        alpha_hats[f] = baseline.filter_estimates[f].worker_accuracy_hat;

    // Ensemble the retained classifiers into per-(item, filter) priors.
    // Zero retained classifiers silently degrades to POWER_ONLY.
    const ensemble::PriorMode requested =
        any_retained ? job.prior_mode : ensemble::PriorMode::POWER_ONLY;
    std::vector<std::optional<ensemble::StackedModel>> stacked(n_filters);
    ensemble::PriorMatrix priors = ensemble::build_priors(
        requested, item_ids, result.profiles, classifier_outputs,
        requested == ensemble::PriorMode::STACKED ? &stacked : nullptr,
        baseline.filter_estimates, job.config.smoothing);
    result.effective_mode = priors.provenance;

    result.initial_power.resize(n_filters, 0.0);
    for (std::size_t r = 0; r < priors.item_ids.size(); ++r)
        for (int f = 0; f < n_filters; ++f)
            result.initial_power[f] += priors.values[r * n_filters + f];
    for (int f = 0; f < n_filters; ++f)
        result.initial_power[f] /= static_cast<double>(priors.item_ids.size());

    std::vector<sr::ItemState> items =
        sr::init_item_states(item_ids, priors, alpha_hats, vote_log);

    // Retained classifier indices per filter, for stacker training.
    std::vector<std::vector<std::size_t>> retained_of(n_filters);
    for (std::size_t c = 0; c < result.profiles.size(); ++c)
        for (int f = 0; f < n_filters; ++f)
            if (result.profiles[c].retained_for(f)) retained_of[f].push_back(c);

    int decided_at_last_train = 0;
    const bool stacking = requested == ensemble::PriorMode::STACKED;

    sr::IterationHook hook = [&](int iteration,
                                 const std::vector<sr::ItemState>& current)
        -> std::optional<ensemble::PriorMatrix> {
        result.power_trajectory.push_back(
            update_power(current, priors, job.config.smoothing));
        (void)iteration;
        if (!stacking) return std::nullopt;

        int decided = 0;
        for (const auto& item : current)
            if (item.decided()) ++decided;
        if (decided - decided_at_last_train < job.stacker.retrain_decided_threshold)
            return std::nullopt;
        decided_at_last_train = decided;

        bool trained_any = false;
        for (int f = 0; f < n_filters; ++f) {
            if (retained_of[f].empty()) continue;
            auto samples = stacker_training_set(current, f, retained_of[f], result.profiles,
                                                classifier_outputs);
            if (static_cast<int>(samples.size()) < job.stacker.min_training_size) continue;
            std::vector<int> ids;
            for (std::size_t c : retained_of[f]) ids.push_back(result.profiles[c].classifier_id);
            stacked[f] = ensemble::train_stacker(samples, std::move(ids), job.stacker);
            trained_any = true;
        }
        if (!trained_any) return std::nullopt;
        ++result.stacker_retrains;
        priors = ensemble::build_priors(ensemble::PriorMode::STACKED, item_ids, result.profiles,
                                        classifier_outputs, &stacked, baseline.filter_estimates,
                                        job.config.smoothing);
        result.effective_mode = priors.provenance;
        return priors;
    };

    result.run = sr::run_adaptive_loop(std::move(items), alpha_hats, crowd, job.config, loss,
                                       ledger, std::move(vote_log), hook);
    result.run.filter_estimates = baseline.filter_estimates;
    result.priors = std::move(priors);
    return result;
}

} // namespace screening::hsr
