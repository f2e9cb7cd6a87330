#include "screening/sr_engine.hpp"

#include <algorithm>
#include <cmath>

#include "screening/prob.hpp"

namespace screening::sr {

const char* to_string(ItemStatus status) {
    switch (status) {
    case ItemStatus::UNDECIDED: return "UNDECIDED";
    case ItemStatus::IN: return "IN";
    case ItemStatus::OUT: return "OUT";
    case ItemStatus::GIVEN_UP: return "GIVEN_UP";
    }
    return "?";
}

void EngineConfig::validate() const {
    if (!(p_out_threshold > 0.5 && p_out_threshold < 1.0))
        throw std::domain_error("p_out_threshold outside (0.5, 1)");
    if (!(p_in_threshold > 0.5 && p_in_threshold < 1.0))
        throw std::domain_error("p_in_threshold outside (0.5, 1)");
    if (baseline_items < 1) throw std::domain_error("baseline_items must be positive");
    if (baseline_votes_per_pair < 1) throw std::domain_error("baseline_votes_per_pair must be positive");
    if (!(batch_fraction > 0.0 && batch_fraction <= 1.0))
        throw std::domain_error("batch_fraction outside (0, 1]");
    if (n_max < 1) throw std::domain_error("n_max must be positive");
    if (!(give_up_cost_factor > 0.0)) throw std::domain_error("give_up_cost_factor must be positive");
    if (budget && *budget < 0) throw std::domain_error("budget must be non-negative");
    if (alpha_reestimate_interval && *alpha_reestimate_interval < 1)
        throw std::domain_error("alpha_reestimate_interval must be positive");
}

aggregation::BaselineEstimate baseline_run(std::span<const int> item_sample, int n_filters,
                                           VoteSource& crowd, const EngineConfig& config,
                                           CostLedger& ledger, std::vector<VoteRecord>* vote_log) {
    if (item_sample.empty()) throw std::invalid_argument("baseline_run: empty item sample");
    const long long needed =
        static_cast<long long>(item_sample.size()) * n_filters * config.baseline_votes_per_pair;
    if (config.budget && ledger.crowd_votes() + needed > *config.budget)
        throw budget_exhausted_error("baseline run alone exceeds the vote budget");

    std::vector<VoteRecord> votes;
    votes.reserve(needed);
    for (int item : item_sample)
        for (int f = 0; f < n_filters; ++f)
            for (int v = 0; v < config.baseline_votes_per_pair; ++v) {
                votes.push_back(crowd.next_vote(item, f));
                ++ledger.baseline_votes;
            }
    if (vote_log) vote_log->insert(vote_log->end(), votes.begin(), votes.end());
    return aggregation::em_estimate(votes, n_filters);
}

RunPlan estimate_min_votes(const ItemState& item, int filter_id, double alpha_f,
                           const EngineConfig& config) {
    if (item.status != ItemStatus::UNDECIDED)
        throw std::logic_error("estimate_min_votes: item already decided");
    const double alpha = prob::clamp_worker_accuracy(alpha_f);

    double others_in = 1.0;
    for (std::size_t f = 0; f < item.in_posteriors.size(); ++f)
        if (static_cast<int>(f) != filter_id) others_in *= item.in_posteriors[f];

    auto simulate = [&](VoteLabel direction) -> std::pair<int, double> {
        double in_f = item.in_posteriors[filter_id];
        double p_run = 1.0;
        for (int n = 1; n <= config.n_max; ++n) {
            double p_vote = prob::next_vote_out_prob(alpha, 1.0 - in_f);
            if (direction == VoteLabel::IN) p_vote = 1.0 - p_vote;
            if (p_vote <= 0.0) return {kNoDecision, 0.0}; // vote impossible from here
            p_run *= p_vote;
            in_f = prob::bayes_filter_update(in_f, alpha, direction);
            if (direction == VoteLabel::OUT) {
                if (1.0 - in_f * others_in > config.p_out_threshold) return {n, p_run};
            } else {
                if (in_f * others_in > config.p_in_threshold) return {n, p_run};
            }
        }
        return {kNoDecision, 0.0};
    };

    const auto [n_out, p_out] = simulate(VoteLabel::OUT);
    const auto [n_in, p_in] = simulate(VoteLabel::IN);

    RunPlan plan;
    plan.item_id = item.item_id;
    plan.chosen_filter = filter_id;
    if (n_out <= n_in) { // ties favor OUT
        plan.n_min = n_out;
        plan.p_min = p_out;
        plan.direction = PlanDirection::OUT;
    } else {
        plan.n_min = n_in;
        plan.p_min = p_in;
        plan.direction = PlanDirection::IN;
    }
    return plan;
}

RunPlan assign_filter(const ItemState& item, std::span<const FilterEstimate> estimates,
                      const EngineConfig& config) {
    if (item.status != ItemStatus::UNDECIDED)
        throw std::logic_error("assign_filter: item already decided");
    RunPlan best;
    for (std::size_t f = 0; f < estimates.size(); ++f) {
        RunPlan plan = estimate_min_votes(item, static_cast<int>(f),
                                          estimates[f].worker_accuracy_hat, config);
        if (best.chosen_filter < 0 || plan.n_min < best.n_min ||
            (plan.n_min == best.n_min && plan.p_min > best.p_min))
            best = plan;
    }
    return best;
}

bool check_stop(const RunPlan& plan, const LossParams& loss, const EngineConfig& config) {
    if (!plan.feasible() || plan.n_min > config.n_max) return true;
    const double expected_votes = static_cast<double>(plan.n_min) / plan.p_min;
    return expected_votes > config.give_up_cost_factor * loss.expert_cost;
}

void finalize_unclassified(std::vector<ItemState>& items) {
    for (ItemState& item : items) {
        if (item.status == ItemStatus::UNDECIDED || item.status == ItemStatus::GIVEN_UP) {
            item.status = ItemStatus::IN;
            item.difficult = true;
        }
    }
}

std::vector<ItemState> init_item_states(std::span<const int> item_ids,
                                        const ensemble::PriorMatrix& priors,
                                        std::span<const double> alpha_hats,
                                        std::span<const VoteRecord> prior_votes) {
    const int n_filters = priors.n_filters;
    std::vector<ItemState> items;
    items.reserve(item_ids.size());
    std::vector<int> row_of_item;
    for (std::size_t r = 0; r < item_ids.size(); ++r) {
        ItemState state;
        state.item_id = item_ids[r];
        state.in_posteriors.resize(n_filters);
        for (int f = 0; f < n_filters; ++f)
            state.in_posteriors[f] = 1.0 - priors.at(state.item_id, f);
        items.push_back(std::move(state));
    }

    // Fold pre-collected (baseline) votes into the matching items.
    if (!prior_votes.empty()) {
        std::unordered_map<int, std::size_t> index;
        for (std::size_t r = 0; r < items.size(); ++r) index[items[r].item_id] = r;
        for (const VoteRecord& vote : prior_votes) {
            auto it = index.find(vote.item_id);
            if (it == index.end()) continue;
            ItemState& item = items[it->second];
            item.votes.push_back(vote);
            ++item.votes_spent;
        }
        for (ItemState& item : items) {
            if (item.votes.empty()) continue;
            for (int f = 0; f < n_filters; ++f) {
                int n_out = 0, n_in = 0;
                for (const VoteRecord& v : item.votes)
                    if (v.filter_id == f) (v.label == VoteLabel::OUT ? n_out : n_in)++;
                if (n_out + n_in == 0) continue;
                item.in_posteriors[f] = prob::fold_in_posterior(
                    item.in_posteriors[f], prob::clamp_worker_accuracy(alpha_hats[f]), n_out, n_in);
            }
        }
    }
    return items;
}

RunResult run_adaptive_loop(std::vector<ItemState> items, std::span<const double> alpha_hats,
                            VoteSource& crowd, const EngineConfig& config, const LossParams& loss,
                            CostLedger ledger, std::vector<VoteRecord> vote_log,
                            const IterationHook& hook) {
    config.validate();
    loss.validate();
    const int n_filters = static_cast<int>(alpha_hats.size());

    std::vector<FilterEstimate> estimates(n_filters);
    for (int f = 0; f < n_filters; ++f) {
        estimates[f].filter_id = f;
        estimates[f].worker_accuracy_hat = prob::clamp_worker_accuracy(alpha_hats[f]);
    }

    auto budget_left = [&]() -> long long {
        if (!config.budget) return std::numeric_limits<long long>::max();
        return *config.budget - ledger.crowd_votes();
    };

    RunResult result;
    int iteration = 0;
    constexpr int kIterationCap = 1 << 20; // fail loud instead of spinning forever
    bool out_of_budget = budget_left() <= 0;

    std::unordered_map<int, std::size_t> index;
    for (std::size_t r = 0; r < items.size(); ++r) index[items[r].item_id] = r;

    while (!out_of_budget) {
        std::vector<std::size_t> undecided;
        for (std::size_t r = 0; r < items.size(); ++r)
            if (items[r].status == ItemStatus::UNDECIDED) undecided.push_back(r);
        if (undecided.empty()) break;
        if (++iteration > kIterationCap)
            throw std::runtime_error("adaptive loop exceeded the iteration cap");

        // Plan every undecided item, give up the hopeless ones.
        std::vector<RunPlan> plans;
        plans.reserve(undecided.size());
        for (std::size_t r : undecided) {
            RunPlan plan = assign_filter(items[r], estimates, config);
            if (check_stop(plan, loss, config)) {
                items[r].status = ItemStatus::GIVEN_UP;
                continue;
            }
            plans.push_back(plan);
        }
        if (plans.empty()) break; // everyone gave up

        // Items with the highest probability of classification vote first.
        const std::size_t batch_size = std::max<std::size_t>(
            1, static_cast<std::size_t>(
                   std::ceil(config.batch_fraction * static_cast<double>(plans.size()))));
        std::sort(plans.begin(), plans.end(), [](const RunPlan& a, const RunPlan& b) {
            if (a.p_min != b.p_min) return a.p_min > b.p_min;
            if (a.n_min != b.n_min) return a.n_min < b.n_min;
            return a.item_id < b.item_id;
        });

        for (std::size_t p = 0; p < std::min(batch_size, plans.size()); ++p) {
            if (budget_left() <= 0) {
                out_of_budget = true;
                break;
            }
            const RunPlan& plan = plans[p];
            ItemState& item = items[index.at(plan.item_id)];

            const VoteRecord vote = crowd.next_vote(item.item_id, plan.chosen_filter);
            ++ledger.adaptive_votes;
            ++item.votes_spent;
            item.votes.push_back(vote);
            vote_log.push_back(vote);

            const int f = plan.chosen_filter;
            item.in_posteriors[f] = prob::bayes_filter_update(
                item.in_posteriors[f], estimates[f].worker_accuracy_hat, vote.label);

            double all_in = 1.0;
            for (double q : item.in_posteriors) all_in *= q;
            if (all_in > config.p_in_threshold)
                item.status = ItemStatus::IN;
            else if (1.0 - all_in > config.p_out_threshold)
                item.status = ItemStatus::OUT;
        }

        if (config.alpha_reestimate_interval &&
            iteration % *config.alpha_reestimate_interval == 0) {
            // Votes folded so far keep their history; only future updates and
            // plans see the refreshed accuracies.
            const auto refreshed = aggregation::em_estimate(vote_log, n_filters);
            for (int f = 0; f < n_filters; ++f)
                if (refreshed.filter_estimates[f].informed)
                    estimates[f].worker_accuracy_hat =
                        refreshed.filter_estimates[f].worker_accuracy_hat;
        }

        if (hook) {
            if (auto new_priors = hook(iteration, items)) {
                // Refold every not-yet-decided item onto the new priors.
                for (ItemState& item : items) {
                    if (item.decided()) continue;
                    for (int f = 0; f < n_filters; ++f) {
                        int n_out = 0, n_in = 0;
                        for (const VoteRecord& v : item.votes)
                            if (v.filter_id == f) (v.label == VoteLabel::OUT ? n_out : n_in)++;
                        item.in_posteriors[f] =
                            prob::fold_in_posterior(1.0 - new_priors->at(item.item_id, f),
                                                    estimates[f].worker_accuracy_hat, n_out, n_in);
                    }
                }
            }
        }
    }

    finalize_unclassified(items);
    result.items = std::move(items);
    result.ledger = ledger;
    result.vote_log = std::move(vote_log);
    result.iterations = iteration;
    return result;
}

RunResult sr_classify(std::span<const int> item_ids, int n_filters, VoteSource& crowd,
                      const EngineConfig& config, const LossParams& loss) {
    if (item_ids.empty()) throw std::invalid_argument("sr_classify: empty item set");
    config.validate();

    CostLedger ledger;
    std::vector<VoteRecord> vote_log;

    const std::size_t sample_size =
        std::min<std::size_t>(item_ids.size(), static_cast<std::size_t>(config.baseline_items));
    const std::span<const int> sample = item_ids.subspan(0, sample_size);
    aggregation::BaselineEstimate baseline =
        baseline_run(sample, n_filters, crowd, config, ledger, &vote_log);

    ensemble::PriorMatrix priors = ensemble::build_priors(
        ensemble::PriorMode::POWER_ONLY, item_ids, {}, {}, nullptr, baseline.filter_estimates,
        config.smoothing);

    std::vector<double> alpha_hats(n_filters);
    for (int f = 0; f < n_filters; ++f)
        alpha_hats[f] = baseline.filter_estimates[f].worker_accuracy_hat;

    std::vector<ItemState> items = init_item_states(item_ids, priors, alpha_hats, vote_log);
    RunResult result = run_adaptive_loop(std::move(items), alpha_hats, crowd, config, loss,
                                         ledger, std::move(vote_log));
    result.filter_estimates = baseline.filter_estimates;
    return result;
}

} // namespace screening::sr
