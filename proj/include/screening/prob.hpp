#ifndef SCREENING_PROB_HPP
#define SCREENING_PROB_HPP

#include <span>

#include "screening/types.hpp"

namespace screening::prob {

// Beta(alpha, beta) accuracy posterior.
struct BetaPosterior {
    double alpha = 1.0;
    double beta = 1.0;

    double mean() const { return alpha / (alpha + beta); }

    void validate() const {
        if (!(alpha > 0.0) || !(beta > 0.0))
            throw std::domain_error("Beta parameters must be > 0");
    }
};

// Clamp a worker-accuracy estimate to [0.5, 1]; values below 0.5 would
// invert vote semantics.
double clamp_worker_accuracy(double a);

// alpha_{f,w} = 0.5 + (alpha_w - 0.5) * exp(-difficulty)
double skew_accuracy(double base_accuracy, double difficulty);

// P(next vote = OUT) = alpha * p + (1 - alpha) * (1 - p), where p is the
// current probability that the filter applies.
double next_vote_out_prob(double worker_accuracy, double out_prob);

// Posterior P(i in IN_f | vote) from prior P(i in IN_f) and one vote.
double bayes_filter_update(double prior_in, double worker_accuracy, VoteLabel vote);

// Fold a multiset of votes into the IN posterior in one shot. Uses log-odds
// so a long unanimous run cannot underflow.
double fold_in_posterior(double prior_in, double worker_accuracy, int n_out_votes, int n_in_votes);

// P(i in OUT) = 1 - prod_f P(i in IN_f)
double item_out_prob(std::span<const double> in_probs);

// Regularized incomplete beta function I_x(a, b), continued-fraction
// evaluation, absolute error below 1e-9.
double regularized_incomplete_beta(double a, double b, double x);

// P(X > 0.5) for X ~ Beta(alpha, beta).
double beta_prob_better_than_random(const BetaPosterior& posterior);

} // namespace screening::prob

#endif
