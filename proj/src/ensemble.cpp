#include "screening/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace screening::ensemble {

const char* to_string(PriorMode mode) {
    switch (mode) {
    case PriorMode::POWER_ONLY: return "POWER_ONLY";
    case PriorMode::NAIVE_BAYES: return "NAIVE_BAYES";
    case PriorMode::STACKED: return "STACKED";
    }
    return "?";
}

double smooth_power(double raw, const PowerSmoothing& smoothing) {
    double v = std::clamp(raw, 0.01, 0.99);
    if (smoothing.enabled && v > smoothing.activation_threshold) v *= smoothing.factor;
    return v;
}

double nb_ensemble_prob(std::span<const VoteLabel> labels, std::span<const double> accuracies) {
    if (labels.empty()) throw std::invalid_argument("nb_ensemble_prob: no classifier labels");
    if (labels.size() != accuracies.size())
        throw std::invalid_argument("nb_ensemble_prob: label/accuracy size mismatch");

    double log_out = 0.0, log_in = 0.0;
    for (std::size_t c = 0; c < labels.size(); ++c) {
        const double a = accuracies[c];
        if (!(a >= 0.0 && a <= 1.0)) throw std::domain_error("classifier accuracy outside [0,1]");
        const double log_a = std::log(a);
        const double log_na = std::log1p(-a);
        if (labels[c] == VoteLabel::OUT) {
            log_out += log_a;
            log_in += log_na;
        } else {
            log_out += log_na;
            log_in += log_a;
        }
    }
    if (std::isinf(log_out) && std::isinf(log_in))
        throw degenerate_evidence_error(
            "certain classifiers disagree: both label hypotheses have zero probability");
    if (std::isinf(log_out)) return 0.0;
    if (std::isinf(log_in)) return 1.0;
    // P(OUT) = 1 / (1 + exp(log_in - log_out))
    const double d = log_in - log_out;
    if (d >= 0.0) {
        const double e = std::exp(-d);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(d));
}

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double stacker_loss(std::span<const StackerSample> samples, double bias,
                    std::span<const double> weights, double l2) {
    double loss = 0.0;
    for (const StackerSample& s : samples) {
        double z = bias;
        for (std::size_t c = 0; c < weights.size(); ++c)
            if (s.labels[c] == VoteLabel::OUT) z += weights[c];
        // cross-entropy against (possibly soft) targets, in a softplus form
        // that stays finite for extreme z
        const double softplus = z > 30.0 ? z : std::log1p(std::exp(z));
        loss += softplus - s.target * z;
    }
    loss /= static_cast<double>(samples.size());
    for (double w : weights) loss += l2 * w * w;
    return loss;
}

} // namespace

StackedModel train_stacker(std::span<const StackerSample> samples,
                           std::vector<int> classifier_ids, const StackerConfig& config) {
    const std::size_t n_features = classifier_ids.size();
    if (samples.size() < 2)
        throw insufficient_data_error("train_stacker: need at least 2 training pairs");
    if (static_cast<int>(samples.size()) < config.min_training_size)
        throw insufficient_data_error("train_stacker: below minimum training size");
    for (const StackerSample& s : samples) {
        if (s.labels.size() != n_features)
            throw std::invalid_argument("train_stacker: feature width mismatch");
        if (!(s.target >= 0.0 && s.target <= 1.0))
            throw std::domain_error("train_stacker: soft label outside [0,1]");
    }

    StackedModel model;
    model.classifier_ids = std::move(classifier_ids);
    model.weights.assign(n_features, 0.0);
    model.training_size = static_cast<int>(samples.size());

    const double inv_n = 1.0 / static_cast<double>(samples.size());
    double step = 1.0;
    double loss = stacker_loss(samples, model.bias, model.weights, config.l2);
    model.loss_trace.push_back(loss);

    std::vector<double> grad_w(n_features);
    for (int iter = 0; iter < config.max_steps; ++iter) {
        std::fill(grad_w.begin(), grad_w.end(), 0.0);
        double grad_b = 0.0;
        for (const StackerSample& s : samples) {
            double z = model.bias;
            for (std::size_t c = 0; c < n_features; ++c)
                if (s.labels[c] == VoteLabel::OUT) z += model.weights[c];
            const double err = sigmoid(z) - s.target;
            grad_b += err;
            for (std::size_t c = 0; c < n_features; ++c)
                if (s.labels[c] == VoteLabel::OUT) grad_w[c] += err;
        }
        grad_b *= inv_n;
        double grad_norm2 = grad_b * grad_b;
        for (std::size_t c = 0; c < n_features; ++c) {
            grad_w[c] = grad_w[c] * inv_n + 2.0 * config.l2 * model.weights[c];
            grad_norm2 += grad_w[c] * grad_w[c];
        }
        if (std::sqrt(grad_norm2) < config.grad_tol) break;

        // Backtracking keeps the recorded loss non-increasing.
        for (;;) {
            std::vector<double> w_next(model.weights);
            for (std::size_t c = 0; c < n_features; ++c) w_next[c] -= step * grad_w[c];
            const double b_next = model.bias - step * grad_b;
            const double next_loss = stacker_loss(samples, b_next, w_next, config.l2);
            if (next_loss <= loss || step < 1e-12) {
                model.weights = std::move(w_next);
                model.bias = b_next;
                loss = next_loss;
                model.loss_trace.push_back(loss);
                step *= 1.1;
                break;
            }
            step *= 0.5;
        }
    }
    return model;
}

double stacked_prob(const StackedModel& model, std::span<const VoteLabel> labels) {
    if (labels.size() != model.weights.size())
        throw std::invalid_argument("stacked_prob: feature width mismatch");
    double z = model.bias;
    for (std::size_t c = 0; c < model.weights.size(); ++c)
        if (labels[c] == VoteLabel::OUT) z += model.weights[c];
    return sigmoid(z);
}

void PriorMatrix::rebuild_index() {
    int max_id = -1;
    for (int id : item_ids) max_id = std::max(max_id, id);
    row_index_.assign(max_id + 1, -1);
    for (std::size_t r = 0; r < item_ids.size(); ++r)
        row_index_[item_ids[r]] = static_cast<int>(r);
}

int PriorMatrix::row_of(int item_id) const {
    if (item_id < 0 || item_id >= static_cast<int>(row_index_.size()) || row_index_[item_id] < 0)
        throw std::out_of_range("PriorMatrix: unknown item id " + std::to_string(item_id));
    return row_index_[item_id];
}

double PriorMatrix::at(int item_id, int filter_id) const {
    return values[static_cast<std::size_t>(row_of(item_id)) * n_filters + filter_id];
}

PriorMatrix build_priors(PriorMode mode, std::span<const int> item_ids,
                         std::span<const classifier_gate::ClassifierProfile> profiles,
                         std::span<const LabelGrid> classifier_outputs,
                         const std::vector<std::optional<StackedModel>>* stacked_models,
                         std::span<const FilterEstimate> power_estimates,
                         const PowerSmoothing& smoothing) {
    const int n_filters = static_cast<int>(power_estimates.size());
    if (n_filters == 0) throw std::invalid_argument("build_priors: no filters");
    if (mode == PriorMode::STACKED && stacked_models == nullptr)
        throw std::invalid_argument("build_priors: STACKED mode requires stacked models");

    // Retained classifier indices per filter.
    std::vector<std::vector<std::size_t>> retained_of(n_filters);
    if (mode != PriorMode::POWER_ONLY)
        for (std::size_t c = 0; c < profiles.size(); ++c)
            for (int f = 0; f < n_filters; ++f)
                if (profiles[c].retained_for(f)) retained_of[f].push_back(c);

    PriorMatrix priors;
    priors.item_ids.assign(item_ids.begin(), item_ids.end());
    priors.n_filters = n_filters;
    priors.values.resize(item_ids.size() * n_filters);
    priors.filter_provenance.assign(n_filters, PriorMode::POWER_ONLY);
    priors.rebuild_index();
    for (int f = 0; f < n_filters; ++f) {
        const auto& retained = retained_of[f];
        PriorMode filter_mode = PriorMode::POWER_ONLY;
        const StackedModel* model = nullptr;
        if (mode != PriorMode::POWER_ONLY && !retained.empty()) {
            filter_mode = PriorMode::NAIVE_BAYES;
            if (mode == PriorMode::STACKED && (*stacked_models)[f].has_value()) {
                model = &(*stacked_models)[f].value();
                filter_mode = PriorMode::STACKED;
            }
        }
        priors.filter_provenance[f] = filter_mode;

        std::vector<VoteLabel> labels(retained.size());
        std::vector<double> accuracies(retained.size());
        for (std::size_t r = 0; r < retained.size(); ++r)
            accuracies[r] = profiles[retained[r]].accuracy_mean(f);

        for (std::size_t row = 0; row < item_ids.size(); ++row) {
            const int item = item_ids[row];
            double p;
            if (filter_mode == PriorMode::POWER_ONLY) {
                p = power_estimates[f].power_hat;
            } else {
                for (std::size_t r = 0; r < retained.size(); ++r) {
                    const auto label = classifier_outputs[profiles[retained[r]].classifier_id].get(item, f);
                    if (!label)
                        throw coverage_error("classifier output missing for item " +
                                             std::to_string(item) + ", filter " + std::to_string(f));
                    labels[r] = *label;
                }
                p = filter_mode == PriorMode::STACKED ? stacked_prob(*model, labels)
                                                      : nb_ensemble_prob(labels, accuracies);
            }
            priors.values[row * n_filters + f] = smooth_power(p, smoothing);
        }
    }
    // Realized provenance: the strongest mode any filter actually used.
    priors.provenance = PriorMode::POWER_ONLY;
    for (PriorMode m : priors.filter_provenance) {
        if (m == PriorMode::STACKED) priors.provenance = PriorMode::STACKED;
        if (m == PriorMode::NAIVE_BAYES && priors.provenance == PriorMode::POWER_ONLY)
            priors.provenance = PriorMode::NAIVE_BAYES;
    }
    return priors;
}

} // namespace screening::ensemble
