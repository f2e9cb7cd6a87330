#include "screening/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace screening::aggregation {

namespace {

constexpr double kAccuracyCeiling = 1.0 - 1e-9; // keeps the likelihood finite

struct PairCounts {
    int item_id = 0;
    int n_out = 0;
    int n_in = 0;
};

// Per-item OUT posterior under (theta, alpha) plus the item's marginal
// log-likelihood contribution.
std::pair<double, double> out_posterior(const PairCounts& c, double theta, double alpha) {
    const double log_ratio = std::log(alpha) - std::log1p(-alpha);
    const double log_odds = std::log(theta) - std::log1p(-theta) + (c.n_out - c.n_in) * log_ratio;
    double p_out;
    if (log_odds >= 0.0) {
        p_out = 1.0 / (1.0 + std::exp(-log_odds));
    } else {
        const double e = std::exp(log_odds);
        p_out = e / (1.0 + e);
    }
    const double log_out = std::log(theta) + c.n_out * std::log(alpha) + c.n_in * std::log1p(-alpha);
    const double log_in =
        std::log1p(-theta) + c.n_out * std::log1p(-alpha) + c.n_in * std::log(alpha);
    const double hi = std::max(log_out, log_in);
    const double marginal = hi + std::log(std::exp(log_out - hi) + std::exp(log_in - hi));
    return {p_out, marginal};
}

struct EmSolution {
    double theta = 0.5;
    double alpha = 0.5;
    std::vector<double> p_out;
    std::vector<double> trace;
    double final_ll = -std::numeric_limits<double>::infinity();
};

EmSolution run_em(const std::vector<PairCounts>& counts, double theta0, double alpha0,
                  int max_iters, double tol) {
    EmSolution s;
    s.theta = std::clamp(theta0, 1e-9, 1.0 - 1e-9);
    s.alpha = std::clamp(alpha0, 0.5, kAccuracyCeiling);
    s.p_out.resize(counts.size());

    double previous = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < max_iters; ++iter) {
        double total_ll = 0.0;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            auto [p, ll] = out_posterior(counts[i], s.theta, s.alpha);
            s.p_out[i] = p;
            total_ll += ll;
        }
        s.trace.push_back(total_ll);
        if (iter > 0 && total_ll - previous < tol) break;
        previous = total_ll;

        double sum_out = 0.0, agree = 0.0, total = 0.0;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            const PairCounts& c = counts[i];
            sum_out += s.p_out[i];
            agree += s.p_out[i] * c.n_out + (1.0 - s.p_out[i]) * c.n_in;
            total += c.n_out + c.n_in;
        }
        s.theta = std::clamp(sum_out / static_cast<double>(counts.size()), 1e-9, 1.0 - 1e-9);
        s.alpha = std::clamp(agree / total, 0.5, kAccuracyCeiling);
    }

    // Final posteriors and likelihood at the converged parameters.
    s.final_ll = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        auto [p, ll] = out_posterior(counts[i], s.theta, s.alpha);
        s.p_out[i] = p;
        s.final_ll += ll;
    }
    return s;
}

} // namespace

VoteLabel majority_vote(std::span<const VoteLabel> votes) {
    if (votes.empty()) throw std::invalid_argument("majority_vote: empty vote list");
    int n_out = 0;
    for (VoteLabel v : votes)
        if (v == VoteLabel::OUT) ++n_out;
    const int n_in = static_cast<int>(votes.size()) - n_out;
    return n_out > n_in ? VoteLabel::OUT : VoteLabel::IN;
}

BaselineEstimate em_estimate(std::span<const VoteRecord> votes, int n_filters, int max_iters,
                             double tol) {
    if (n_filters <= 0) throw std::invalid_argument("em_estimate: n_filters must be positive");
    if (max_iters < 1) throw std::invalid_argument("em_estimate: max_iters must be >= 1");
    if (!(tol > 0.0)) throw std::invalid_argument("em_estimate: tol must be > 0");

    // Group votes into per-(filter, item) counts. std::map keeps item order
    // deterministic across runs.
    std::vector<std::map<int, PairCounts>> per_filter(n_filters);
    for (const VoteRecord& v : votes) {
        if (v.filter_id < 0 || v.filter_id >= n_filters)
            throw std::invalid_argument("em_estimate: filter_id out of range");
        PairCounts& c = per_filter[v.filter_id][v.item_id];
        c.item_id = v.item_id;
        if (v.label == VoteLabel::OUT)
            ++c.n_out;
        else
            ++c.n_in;
    }

    BaselineEstimate result;
    result.filter_estimates.resize(n_filters);

    std::vector<std::vector<double>> traces;
    for (int f = 0; f < n_filters; ++f) {
        FilterEstimate& est = result.filter_estimates[f];
        est.filter_id = f;

        std::vector<PairCounts> counts;
        for (const auto& [item, c] : per_filter[f]) counts.push_back(c);
        if (counts.empty()) {
            est.power_hat = 0.5;
            est.worker_accuracy_hat = 0.5;
            est.informed = false;
            continue;
        }

        // Majority-vote initialization, per the model; the likelihood is
        // multimodal on small or noisy data, so a few fixed restarts guard
        // against poor local maxima.
        double majority_theta = 0.0, majority_agree = 0.0, total_votes = 0.0;
        for (const PairCounts& c : counts) {
            const bool out = c.n_out > c.n_in;
            majority_theta += out ? 1.0 : 0.0;
            majority_agree += out ? c.n_out : c.n_in;
            total_votes += c.n_out + c.n_in;
        }
        majority_theta /= static_cast<double>(counts.size());
        const double majority_alpha = majority_agree / total_votes;

        const std::pair<double, double> starts[] = {
            {majority_theta, majority_alpha},
            {majority_theta, 0.51},
            {majority_theta, 0.75},
            {majority_theta, 0.95},
        };
        EmSolution best;
        for (auto [theta0, alpha0] : starts) {
            EmSolution s = run_em(counts, theta0, alpha0, max_iters, tol);
            if (s.final_ll > best.final_ll) best = std::move(s);
        }

        // Likelihood-ratio guard against the random-voting null (alpha = 0.5,
        // where the likelihood is flat in theta). Without a decisive
        // improvement the fitted structure is noise, so report the null:
        // accuracy 0.5 and a constant posterior at the pooled vote fraction.
        // Accuracy signal lives in within-pair agreement, so the guard only
        // applies when some pair carries more than one vote; single-vote
        // pairs can do no better than echo their vote.
        bool redundancy = false;
        for (const PairCounts& c : counts)
            if (c.n_out + c.n_in >= 2) redundancy = true;
        const double ll_null = total_votes * std::log(0.5);
        if (redundancy && best.final_ll - ll_null <= 3.0) {
            double out_fraction = 0.0;
            for (const PairCounts& c : counts) out_fraction += c.n_out;
            out_fraction /= total_votes;
            best.alpha = 0.5;
            best.theta = out_fraction;
            std::fill(best.p_out.begin(), best.p_out.end(), out_fraction);
            best.trace = {ll_null};
        }

        double sum_out = 0.0;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            sum_out += best.p_out[i];
            result.label_posteriors[LabelGrid::key(counts[i].item_id, f)] = best.p_out[i];
        }
        // Beta(1,1) pseudo-count smoothing keeps exported powers off 0/1.
        est.power_hat = (sum_out + 1.0) / (static_cast<double>(counts.size()) + 2.0);
        est.worker_accuracy_hat = best.alpha;
        // A filter whose votes are unanimous across every item cannot separate
        // accuracy from power; flag the estimate as weak.
        bool any_disagreement = false;
        for (const PairCounts& c : counts)
            if (c.n_out > 0 && c.n_in > 0) any_disagreement = true;
        est.informed = any_disagreement || counts.size() > 1;
        traces.push_back(std::move(best.trace));
    }

    // Combined trace: per-iteration sum over filters, shorter traces padded
    // with their final value. Sums of non-decreasing sequences stay
    // non-decreasing.
    std::size_t longest = 0;
    for (const auto& t : traces) longest = std::max(longest, t.size());
    for (std::size_t i = 0; i < longest; ++i) {
        double total = 0.0;
        for (const auto& t : traces) total += i < t.size() ? t[i] : t.back();
        result.log_likelihood_trace.push_back(total);
    }
    return result;
}

} // namespace screening::aggregation
