#include "screening/prob.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace screening::prob {

namespace {

void check_probability(double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error(std::string(what) + " outside [0,1]");
}

// Continued fraction for the incomplete beta function (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
    constexpr int max_iterations = 300;
    constexpr double eps = 1e-15;
    constexpr double tiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;

    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;

    for (int m = 1; m <= max_iterations; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;

        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

} // namespace

double clamp_worker_accuracy(double a) {
    if (std::isnan(a)) throw std::domain_error("worker accuracy is NaN");
    return std::clamp(a, 0.5, 1.0);
}

double skew_accuracy(double base_accuracy, double difficulty) {
    if (!(base_accuracy >= 0.5 && base_accuracy <= 1.0))
        throw std::domain_error("base accuracy outside [0.5,1]");
    if (!(difficulty >= 0.0)) throw std::domain_error("difficulty must be >= 0");
    if (difficulty == 0.0) return base_accuracy; // exact identity
    return 0.5 + (base_accuracy - 0.5) * std::exp(-difficulty);
}

double next_vote_out_prob(double worker_accuracy, double out_prob) {
    check_probability(worker_accuracy, "worker accuracy");
    check_probability(out_prob, "out probability");
    return worker_accuracy * out_prob + (1.0 - worker_accuracy) * (1.0 - out_prob);
}

double bayes_filter_update(double prior_in, double worker_accuracy, VoteLabel vote) {
    check_probability(prior_in, "prior");
    if (!(worker_accuracy >= 0.5 && worker_accuracy <= 1.0))
        throw std::domain_error("worker accuracy outside [0.5,1]");

    // P(vote = OUT | i in IN_f) = 1 - alpha, P(vote = IN | i in IN_f) = alpha.
    const double evidence = vote == VoteLabel::OUT
                                ? next_vote_out_prob(worker_accuracy, 1.0 - prior_in)
                                : 1.0 - next_vote_out_prob(worker_accuracy, 1.0 - prior_in);
    const double likelihood_in = vote == VoteLabel::OUT ? 1.0 - worker_accuracy : worker_accuracy;
    if (evidence == 0.0)
        throw degenerate_evidence_error("vote impossible under both hypotheses");
    return likelihood_in * prior_in / evidence;
}

double fold_in_posterior(double prior_in, double worker_accuracy, int n_out_votes, int n_in_votes) {
    check_probability(prior_in, "prior");
    if (!(worker_accuracy >= 0.5 && worker_accuracy <= 1.0))
        throw std::domain_error("worker accuracy outside [0.5,1]");
    if (n_out_votes < 0 || n_in_votes < 0) throw std::domain_error("negative vote count");

    if (prior_in == 0.0 || prior_in == 1.0) {
        // Certain priors are absorbing unless contradicted by certain evidence.
        if (worker_accuracy == 1.0 &&
            ((prior_in == 1.0 && n_out_votes > 0) || (prior_in == 0.0 && n_in_votes > 0)))
            throw degenerate_evidence_error("certain prior contradicted by certain evidence");
        return prior_in;
    }
    if (worker_accuracy == 1.0) {
        if (n_out_votes > 0 && n_in_votes > 0)
            throw degenerate_evidence_error("contradicting votes from a perfect worker");
        if (n_out_votes > 0) return 0.0;
        if (n_in_votes > 0) return 1.0;
        return prior_in;
    }
    // Uninformative votes and balanced counts cancel exactly in odds space.
    if (worker_accuracy == 0.5 || n_out_votes == n_in_votes) return prior_in;

    const double log_odds_in = std::log(prior_in) - std::log1p(-prior_in) +
                               (n_in_votes - n_out_votes) *
                                   (std::log(worker_accuracy) - std::log1p(-worker_accuracy));
    // stable sigmoid
    if (log_odds_in >= 0.0) {
        const double e = std::exp(-log_odds_in);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(log_odds_in);
    return e / (1.0 + e);
}

double item_out_prob(std::span<const double> in_probs) {
    if (in_probs.empty()) throw std::invalid_argument("item_out_prob: empty filter list");
    double prod = 1.0;
    for (double p : in_probs) {
        check_probability(p, "in probability");
        prod *= p;
    }
    return 1.0 - prod;
}

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw std::domain_error("beta parameters must be > 0");
    if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("x outside [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;

    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                             a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    // Use the symmetry relation where the continued fraction converges fastest.
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double beta_prob_better_than_random(const BetaPosterior& posterior) {
    posterior.validate();
    return 1.0 - regularized_incomplete_beta(posterior.alpha, posterior.beta, 0.5);
}

} // namespace screening::prob
