#include "screening/classifier_gate.hpp"

#include <set>
#include <string>

namespace screening::classifier_gate {

int GoldSet::distinct_items() const {
    std::set<int> items;
    for (const GoldEntry& e : entries) items.insert(e.item_id);
    return static_cast<int>(items.size());
}

GoldSet make_gold_set(std::vector<GoldEntry> entries, double expert_cost) {
    std::set<std::pair<int, int>> seen;
    for (const GoldEntry& e : entries)
        if (!seen.insert({e.item_id, e.filter_id}).second)
            throw std::invalid_argument("duplicate (item, filter) pair in gold set");
    GoldSet gold;
    gold.entries = std::move(entries);
    gold.acquisition_cost = expert_cost * gold.distinct_items();
    return gold;
}

prob::BetaPosterior test_classifier(const LabelGrid& outputs, const GoldSet& gold, int filter_id,
                                    const prob::BetaPosterior& prior) {
    prior.validate();
    int correct = 0, failed = 0;
    for (const GoldEntry& e : gold.entries) {
        if (e.filter_id != filter_id) continue;
        const auto label = outputs.get(e.item_id, e.filter_id);
        if (!label)
            throw coverage_error("classifier output missing for gold pair (item " +
                                 std::to_string(e.item_id) + ", filter " +
                                 std::to_string(e.filter_id) + ")");
        if (*label == e.true_label)
            ++correct;
        else
            ++failed;
    }
    return {prior.alpha + correct, prior.beta + failed};
}

std::vector<ClassifierProfile> test_classifiers(std::span<const LabelGrid> outputs,
                                                const GoldSet& gold, int n_filters,
                                                const prob::BetaPosterior& prior) {
    std::vector<ClassifierProfile> profiles;
    profiles.reserve(outputs.size());
    for (std::size_t c = 0; c < outputs.size(); ++c) {
        ClassifierProfile p;
        p.classifier_id = static_cast<int>(c);
        p.per_filter_posterior.reserve(n_filters);
        for (int f = 0; f < n_filters; ++f)
            p.per_filter_posterior.push_back(test_classifier(outputs[c], gold, f, prior));
        p.retained.assign(n_filters, false);
        profiles.push_back(std::move(p));
    }
    return profiles;
}

std::vector<ClassifierProfile> select_classifiers(std::vector<ClassifierProfile> profiles,
                                                  double selection_threshold) {
    if (!(selection_threshold > 0.0 && selection_threshold < 1.0))
        throw std::domain_error("selection threshold outside (0,1)");
    for (ClassifierProfile& p : profiles)
        for (std::size_t f = 0; f < p.per_filter_posterior.size(); ++f)
            p.retained[f] =
                prob::beta_prob_better_than_random(p.per_filter_posterior[f]) > selection_threshold;
    return profiles;
}

} // namespace screening::classifier_gate
