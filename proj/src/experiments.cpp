#include "screening/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace screening::experiments {

const char* to_string(Strategy s) {
    switch (s) {
    case Strategy::SR: return "sr";
    case Strategy::HSR_NB: return "hsr-nb";
    case Strategy::HSR_STACKED: return "hsr-stacked";
    case Strategy::MACHINES_NB: return "machines-nb";
    case Strategy::MACHINES_STACKED: return "machines-stacked";
    case Strategy::BEST_SINGLE: return "best-single";
    }
    return "?";
}

Strategy strategy_from_string(const std::string& name) {
    for (Strategy s : {Strategy::SR, Strategy::HSR_NB, Strategy::HSR_STACKED,
                       Strategy::MACHINES_NB, Strategy::MACHINES_STACKED, Strategy::BEST_SINGLE})
        if (name == to_string(s)) return s;
    throw config_error("unknown strategy: '" + name + "'");
}

ErrorCounts count_errors(std::span<const sr::ItemState> decisions,
                         const simworld::WorldTruth& truth) {
    ErrorCounts counts;
    for (const sr::ItemState& item : decisions) {
        if (!item.decided())
            throw coverage_error("undecided item " + std::to_string(item.item_id) +
                                 " in metrics input; finalize first");
        const bool passes = truth.item_passes(item.item_id);
        const bool labeled_in = item.status == sr::ItemStatus::IN;
        if (passes && labeled_in) ++counts.true_inclusions;
        if (passes && !labeled_in) ++counts.false_exclusions;
        if (!passes && labeled_in) ++counts.false_inclusions;
        if (!passes && !labeled_in) ++counts.true_exclusions;
    }
    return counts;
}

double compute_loss(std::span<const sr::ItemState> decisions, const simworld::WorldTruth& truth,
                    const LossParams& loss, int n_items) {
    loss.validate();
    if (n_items <= 0) throw std::invalid_argument("compute_loss: n_items must be positive");
    const ErrorCounts counts = count_errors(decisions, truth);
    return (loss.k * counts.false_exclusions + counts.false_inclusions) /
           static_cast<double>(n_items);
}

double compute_price_ratio(long long crowd_votes, int false_inclusions, const LossParams& loss,
                           int n_items, double gold_cost, bool include_gold) {
    loss.validate();
    if (crowd_votes < 0 || false_inclusions < 0 || n_items <= 0 || gold_cost < 0.0)
        throw std::invalid_argument("compute_price_ratio: negative count");
    double crowd_cost = static_cast<double>(crowd_votes) +
                        static_cast<double>(false_inclusions) * loss.expert_cost;
    if (include_gold) crowd_cost += gold_cost;
    return crowd_cost / (static_cast<double>(n_items) * loss.expert_cost);
}

RecallPrecision compute_recall_precision(std::span<const sr::ItemState> decisions,
                                         const simworld::WorldTruth& truth) {
    const ErrorCounts c = count_errors(decisions, truth);
    RecallPrecision rp;
    if (c.true_inclusions + c.false_exclusions == 0) {
        rp.recall_defined = false; // no positives exist
    } else {
        rp.recall = static_cast<double>(c.true_inclusions) /
                    static_cast<double>(c.true_inclusions + c.false_exclusions);
    }
    if (c.true_inclusions + c.false_inclusions == 0) {
        rp.precision_defined = false;
    } else {
        rp.precision = static_cast<double>(c.true_inclusions) /
                       static_cast<double>(c.true_inclusions + c.false_inclusions);
    }
    return rp;
}

std::vector<FilterSpec> ExperimentConfig::resolved_filters() const {
    if (!filters.empty()) {
        auto result = filters;
        for (std::size_t f = 0; f < result.size(); ++f) result[f].id = static_cast<int>(f);
        return result;
    }
    std::vector<FilterSpec> result(n_filters);
    const double power = simworld::power_for_pass_rate(pass_rate, n_filters);
    for (int f = 0; f < n_filters; ++f) result[f] = {f, power, filter_difficulty};
    return result;
}

void ExperimentConfig::validate() const {
    if (n_items < 1) throw config_error("n_items must be positive");
    if (n_repetitions < 1) throw config_error("n_repetitions must be >= 1");
    if (gold_items < 0 || gold_items > n_items) throw config_error("gold_items outside [0, n_items]");
    if (strategies.empty()) throw config_error("no strategies configured");
    if (!(selection_threshold > 0.0 && selection_threshold < 1.0))
        throw config_error("selection_threshold outside (0,1)");
    if (stacker_training_items < 0) throw config_error("stacker_training_items must be >= 0");
    for (const FilterSpec& f : resolved_filters()) f.validate();
    crowd.validate();
    machines.validate();
    engine.validate();
    loss.validate();
    if (sweep) {
        if (sweep->values.empty()) throw config_error("sweep has no values");
        for (double v : sweep->values)
            if (!std::isfinite(v)) throw config_error("sweep value not finite");
    }
}

void apply_sweep_value(ExperimentConfig& config, const std::string& parameter, double value) {
    if (parameter == "machines.correlation") {
        config.machines.target_correlation = value;
    } else if (parameter == "machines.accuracy_low") {
        config.machines.accuracy_low = value;
    } else if (parameter == "machines.accuracy_high") {
        config.machines.accuracy_high = value;
    } else if (parameter == "crowd.accuracy_low") {
        config.crowd.accuracy_low = value;
    } else if (parameter == "crowd.accuracy_high") {
        config.crowd.accuracy_high = value;
    } else if (parameter == "loss.expert_cost") {
        config.loss.expert_cost = value;
    } else if (parameter == "loss.k") {
        config.loss.k = value;
    } else if (parameter == "engine.p_out_threshold") {
        config.engine.p_out_threshold = value;
    } else if (parameter == "gold_items") {
        config.gold_items = static_cast<int>(value);
    } else if (parameter.rfind("filters.", 0) == 0) {
        const std::string rest = parameter.substr(8);
        const auto dot = rest.find('.');
        if (dot == std::string::npos) throw config_error("bad sweep parameter: " + parameter);
        const int index = std::stoi(rest.substr(0, dot));
        const std::string field = rest.substr(dot + 1);
        auto filters = config.resolved_filters();
        if (index < 0 || index >= static_cast<int>(filters.size()))
            throw config_error("sweep filter index out of range: " + parameter);
        if (field == "power")
            filters[index].power = value;
        else if (field == "difficulty")
            filters[index].difficulty = value;
        else
            throw config_error("bad sweep parameter: " + parameter);
        config.filters = std::move(filters);
    } else {
        throw config_error("unknown sweep parameter: '" + parameter + "'");
    }
}

RepetitionSetup make_repetition_setup(const ExperimentConfig& config, std::size_t sweep_index,
                                      int repetition) {
    // Common random numbers: sweep points share worlds, pools, gold draws and
    // vote streams, so the sweep isolates the swept parameter's effect.
    (void)sweep_index;
    const std::uint64_t rep_tag = static_cast<std::uint32_t>(repetition);
    RepetitionSetup setup;

    // The world always carries the training slice so that the evaluation
    // items are identical whether or not a stacked strategy runs.
    const int total_items = config.n_items + config.stacker_training_items;
    setup.world = simworld::generate_world(
        total_items, config.resolved_filters(),
        simworld::derive_seed(config.base_seed, rep_tag * 4 + 0));
    setup.pool = simworld::simulate_classifier_outputs(
        setup.world, config.machines, simworld::derive_seed(config.base_seed, rep_tag * 4 + 1));
    setup.vote_seed = simworld::derive_seed(config.base_seed, rep_tag * 4 + 2);

    // Gold items drawn from the evaluation range without replacement.
    std::mt19937_64 gold_rng(simworld::derive_seed(config.base_seed, rep_tag * 4 + 3));
    std::vector<int> ids(config.n_items);
    for (int i = 0; i < config.n_items; ++i) ids[i] = i;
    for (int g = 0; g < config.gold_items; ++g) {
        std::uniform_int_distribution<int> pick(g, config.n_items - 1);
        std::swap(ids[g], ids[pick(gold_rng)]);
    }
    std::vector<int> gold_ids(ids.begin(), ids.begin() + config.gold_items);
    std::sort(gold_ids.begin(), gold_ids.end());

    std::vector<classifier_gate::GoldEntry> entries;
    for (int item : gold_ids)
        for (int f = 0; f < setup.world.n_filters(); ++f)
            entries.push_back({item, f,
                               setup.world.applies(item, f) ? VoteLabel::OUT : VoteLabel::IN});
    setup.gold = classifier_gate::make_gold_set(std::move(entries), config.loss.expert_cost);

    for (int i = 0; i < config.n_items; ++i) {
        if (config.exclude_gold_from_pool &&
            std::binary_search(gold_ids.begin(), gold_ids.end(), i))
            continue;
        setup.eval_items.push_back(i);
    }
    for (int i = config.n_items; i < total_items; ++i) setup.training_items.push_back(i);
    return setup;
}

namespace {

// Machine-only classification: gate on gold, pool the retained classifiers,
// classify OUT when the ensemble item-level probability crosses the
// threshold. No crowd votes are spent.
std::vector<sr::ItemState> machines_only_decisions(Strategy strategy,
                                                   const ExperimentConfig& config,
                                                   const RepetitionSetup& setup) {
    const int n_filters = setup.world.n_filters();
    auto profiles = classifier_gate::select_classifiers(
        classifier_gate::test_classifiers(setup.pool.outputs, setup.gold, n_filters,
                                          config.gate_prior),
        config.selection_threshold);

    std::vector<std::vector<std::size_t>> retained_of(n_filters);
    for (std::size_t c = 0; c < profiles.size(); ++c)
        for (int f = 0; f < n_filters; ++f)
            if (profiles[c].retained_for(f)) retained_of[f].push_back(c);

    // Per-filter stacked models trained on the expert-labeled slice.
    std::vector<std::optional<ensemble::StackedModel>> stacked(n_filters);
    if (strategy == Strategy::MACHINES_STACKED) {
        for (int f = 0; f < n_filters; ++f) {
            if (retained_of[f].empty()) continue;
            std::vector<ensemble::StackerSample> samples;
            for (int item : setup.training_items) {
                ensemble::StackerSample s;
                s.target = setup.world.applies(item, f) ? 1.0 : 0.0;
                for (std::size_t c : retained_of[f])
                    s.labels.push_back(*setup.pool.outputs[profiles[c].classifier_id].get(item, f));
                samples.push_back(std::move(s));
            }
            if (static_cast<int>(samples.size()) < config.stacker.min_training_size) continue;
            std::vector<int> ids;
            for (std::size_t c : retained_of[f]) ids.push_back(profiles[c].classifier_id);
            stacked[f] = ensemble::train_stacker(samples, std::move(ids), config.stacker);
        }
    }

    // Best retained classifier per filter, by posterior-mean accuracy.
    std::vector<int> best_of(n_filters, -1);
    if (strategy == Strategy::BEST_SINGLE) {
        for (int f = 0; f < n_filters; ++f) {
            double best_acc = -1.0;
            for (std::size_t c : retained_of[f]) {
                const double acc = profiles[c].accuracy_mean(f);
                if (acc > best_acc) {
                    best_acc = acc;
                    best_of[f] = static_cast<int>(c);
                }
            }
        }
    }

    std::vector<sr::ItemState> decisions;
    decisions.reserve(setup.eval_items.size());
    std::vector<VoteLabel> labels;
    std::vector<double> accuracies;
    for (int item : setup.eval_items) {
        sr::ItemState state;
        state.item_id = item;
        state.in_posteriors.resize(n_filters);
        double all_in = 1.0;
        for (int f = 0; f < n_filters; ++f) {
            double p_out_f = 0.5;
            if (strategy == Strategy::BEST_SINGLE) {
                if (best_of[f] >= 0) {
                    const auto& profile = profiles[best_of[f]];
                    const VoteLabel l = *setup.pool.outputs[profile.classifier_id].get(item, f);
                    const double a = profile.accuracy_mean(f);
                    p_out_f = l == VoteLabel::OUT ? a : 1.0 - a;
                }
            } else if (!retained_of[f].empty()) {
                labels.clear();
                accuracies.clear();
                for (std::size_t c : retained_of[f]) {
                    labels.push_back(*setup.pool.outputs[profiles[c].classifier_id].get(item, f));
                    accuracies.push_back(profiles[c].accuracy_mean(f));
                }
                if (strategy == Strategy::MACHINES_STACKED && stacked[f])
                    p_out_f = ensemble::stacked_prob(*stacked[f], labels);
                else
                    p_out_f = ensemble::nb_ensemble_prob(labels, accuracies);
            }
            state.in_posteriors[f] = 1.0 - p_out_f;
            all_in *= 1.0 - p_out_f;
        }
        state.status =
            1.0 - all_in > config.engine.p_out_threshold ? sr::ItemStatus::OUT : sr::ItemStatus::IN;
        decisions.push_back(std::move(state));
    }
    return decisions;
}

MetricsReport metrics_from(std::span<const sr::ItemState> decisions,
                           const ExperimentConfig& config, const RepetitionSetup& setup,
                           const sr::CostLedger& ledger) {
    MetricsReport m;
    const int n = static_cast<int>(decisions.size());
    const ErrorCounts counts = count_errors(decisions, setup.world);
    m.loss_per_item = compute_loss(decisions, setup.world, config.loss, n);
    const RecallPrecision rp = compute_recall_precision(decisions, setup.world);
    m.recall = rp.recall;
    m.precision = rp.precision;
    m.crowd_votes = ledger.crowd_votes();
    m.false_inclusions = counts.false_inclusions;
    m.false_exclusions = counts.false_exclusions;
    m.true_inclusions = counts.true_inclusions;
    m.gold_cost = ledger.gold_cost;
    m.price_ratio = compute_price_ratio(m.crowd_votes, m.false_inclusions, config.loss, n,
                                        m.gold_cost, config.include_gold_cost);
    m.run_seed = setup.vote_seed;
    return m;
}

} // namespace

MetricsReport run_strategy(Strategy strategy, const ExperimentConfig& config,
                           const RepetitionSetup& setup, VoteSource& crowd,
                           sr::RunResult* run_out, hsr::HsrResult* hsr_out) {
    const int n_filters = setup.world.n_filters();
    switch (strategy) {
    case Strategy::SR: {
        sr::RunResult run =
            sr::sr_classify(setup.eval_items, n_filters, crowd, config.engine, config.loss);
        MetricsReport m = metrics_from(run.items, config, setup, run.ledger);
        if (run_out) *run_out = std::move(run);
        return m;
    }
    case Strategy::HSR_NB:
    case Strategy::HSR_STACKED: {
        hsr::HsrJob job;
        job.config = config.engine;
        job.prior_mode = strategy == Strategy::HSR_NB ? ensemble::PriorMode::NAIVE_BAYES
                                                      : ensemble::PriorMode::STACKED;
        job.gold = setup.gold;
        job.selection_threshold = config.selection_threshold;
        job.gate_prior = config.gate_prior;
        job.stacker = config.stacker;
        hsr::HsrResult result = hsr::hsr_classify(setup.eval_items, n_filters, crowd,
                                                  setup.pool.outputs, job, config.loss);
        MetricsReport m = metrics_from(result.run.items, config, setup, result.run.ledger);
        if (run_out) *run_out = result.run;
        if (hsr_out) *hsr_out = std::move(result);
        return m;
    }
    case Strategy::MACHINES_NB:
    case Strategy::MACHINES_STACKED:
    case Strategy::BEST_SINGLE: {
        auto decisions = machines_only_decisions(strategy, config, setup);
        sr::CostLedger ledger;
        ledger.gold_cost = setup.gold.acquisition_cost;
        MetricsReport m = metrics_from(decisions, config, setup, ledger);
        if (run_out) {
            run_out->items = std::move(decisions);
            run_out->ledger = ledger;
        }
        return m;
    }
    }
    throw std::logic_error("unreachable strategy");
}

const AggregateRow& ExperimentReport::row(double sweep_value, Strategy s,
                                          const std::string& metric) const {
    for (const AggregateRow& r : rows)
        if (r.sweep_value == sweep_value && r.strategy == s && r.metric == metric) return r;
    throw std::out_of_range("no aggregate row for requested (sweep, strategy, metric)");
}

double ExperimentReport::mean_of(double sweep_value, Strategy s, const std::string& metric) const {
    return row(sweep_value, s, metric).mean;
}

ExperimentReport run_experiment(const ExperimentConfig& config, int jobs) {
    config.validate();
    if (jobs < 1) jobs = 1;

    ExperimentReport report;
    report.sweep_values = config.sweep ? config.sweep->values : std::vector<double>{0.0};
    report.strategies = config.strategies;
    const std::size_t n_sweep = report.sweep_values.size();
    const std::size_t n_strat = config.strategies.size();

    report.raw.assign(n_sweep, std::vector<std::vector<std::optional<MetricsReport>>>(
                                   n_strat, std::vector<std::optional<MetricsReport>>(
                                                config.n_repetitions)));

    struct Task {
        std::size_t sweep_index;
        int repetition;
    };
    std::vector<Task> tasks;
    for (std::size_t s = 0; s < n_sweep; ++s)
        for (int r = 0; r < config.n_repetitions; ++r) tasks.push_back({s, r});

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t t = next.fetch_add(1);
            if (t >= tasks.size()) return;
            const Task task = tasks[t];

            ExperimentConfig point = config;
            if (config.sweep)
                apply_sweep_value(point, config.sweep->parameter,
                                  report.sweep_values[task.sweep_index]);
            RepetitionSetup setup;
            try {
                setup = make_repetition_setup(point, task.sweep_index, task.repetition);
            } catch (const std::exception&) {
                continue; // every strategy of this repetition counts as failed
            }
            for (std::size_t s = 0; s < n_strat; ++s) {
                try {
                    simworld::SimCrowdSource crowd(setup.world, point.crowd, setup.vote_seed);
                    report.raw[task.sweep_index][s][task.repetition] =
                        run_strategy(config.strategies[s], point, setup, crowd);
                } catch (const std::exception&) {
                    // recorded as a failure via the empty optional
                }
            }
        }
    };

    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int j = 0; j < jobs; ++j) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    const std::vector<std::string> metric_names = {
        "loss", "recall", "precision", "price_ratio",
        "crowd_votes", "false_inclusions", "false_exclusions", "gold_cost"};
    auto metric_value = [](const MetricsReport& m, const std::string& name) -> double {
        if (name == "loss") return m.loss_per_item;
        if (name == "recall") return m.recall;
        if (name == "precision") return m.precision;
        if (name == "price_ratio") return m.price_ratio;
        if (name == "crowd_votes") return static_cast<double>(m.crowd_votes);
        if (name == "false_inclusions") return m.false_inclusions;
        if (name == "false_exclusions") return m.false_exclusions;
        return m.gold_cost;
    };

    for (std::size_t sv = 0; sv < n_sweep; ++sv) {
        for (std::size_t s = 0; s < n_strat; ++s) {
            for (const std::string& metric : metric_names) {
                AggregateRow row;
                row.sweep_value = report.sweep_values[sv];
                row.strategy = config.strategies[s];
                row.metric = metric;
                double sum = 0.0;
                for (int r = 0; r < config.n_repetitions; ++r) {
                    const auto& m = report.raw[sv][s][r];
                    if (!m) {
                        ++row.n_failed;
                        continue;
                    }
                    ++row.n_ok;
                    sum += metric_value(*m, metric);
                }
                row.mean = row.n_ok > 0 ? sum / row.n_ok : 0.0;
                double ss = 0.0;
                for (int r = 0; r < config.n_repetitions; ++r) {
                    const auto& m = report.raw[sv][s][r];
                    if (!m) continue;
                    const double d = metric_value(*m, metric) - row.mean;
                    ss += d * d;
                }
                row.stddev = row.n_ok > 0 ? std::sqrt(ss / row.n_ok) : 0.0;
                report.rows.push_back(std::move(row));
            }
        }
    }
    return report;
}

} // namespace screening::experiments
