#include "screening/simworld.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "screening/prob.hpp"

namespace screening::simworld {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
    // splitmix64 finalizer over the combined value
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

WorldTruth generate_world(int n_items, std::vector<FilterSpec> filters, std::uint64_t seed) {
    if (n_items < 0) throw std::invalid_argument("generate_world: negative item count");
    for (auto& f : filters) f.validate();

    WorldTruth world;
    world.n_items = n_items;
    world.filters = std::move(filters);
    world.seed = seed;
    world.truth.assign(static_cast<std::size_t>(n_items) * world.filters.size(), 0);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (int i = 0; i < n_items; ++i)
        for (std::size_t f = 0; f < world.filters.size(); ++f)
            world.truth[static_cast<std::size_t>(i) * world.filters.size() + f] =
                uniform(rng) < world.filters[f].power ? 1 : 0;
    return world;
}

double power_for_pass_rate(double pass_rate, int n_filters) {
    if (!(pass_rate > 0.0 && pass_rate <= 1.0)) throw std::domain_error("pass rate outside (0,1]");
    if (n_filters < 1) throw std::domain_error("need at least one filter");
    return 1.0 - std::pow(pass_rate, 1.0 / n_filters);
}

VoteRecord simulate_crowd_vote(int item_id, int filter_id, const WorldTruth& world,
                               const CrowdModel& crowd, std::mt19937_64& rng, int worker_id) {
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const double base = crowd.accuracy_low +
                        (crowd.accuracy_high - crowd.accuracy_low) * uniform(rng);
    const double accuracy = prob::skew_accuracy(base, world.filters[filter_id].difficulty);
    const bool truth_out = world.applies(item_id, filter_id);
    const bool correct = uniform(rng) < accuracy;
    const bool vote_out = truth_out == correct;
    return {item_id, filter_id, worker_id, vote_out ? VoteLabel::OUT : VoteLabel::IN};
}

MachinePool simulate_classifier_outputs(const WorldTruth& world, const MachinePoolConfig& config,
                                        std::uint64_t seed) {
    config.validate();
    MachinePool pool;
    pool.config = config;
    pool.seed = seed;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    pool.accuracies.resize(config.n_classifiers);
    for (double& a : pool.accuracies)
        a = config.accuracy_low + (config.accuracy_high - config.accuracy_low) * uniform(rng);

    pool.outputs.resize(config.n_classifiers);
    const double rho = config.target_correlation;
    for (int i = 0; i < world.n_items; ++i) {
        for (int f = 0; f < world.n_filters(); ++f) {
            const bool truth_out = world.applies(i, f);
            const double shared = uniform(rng);
            for (int c = 0; c < config.n_classifiers; ++c) {
                const bool coupled = uniform(rng) < rho;
                const double draw = coupled ? shared : uniform(rng);
                const bool err = draw < 1.0 - pool.accuracies[c];
                const bool out = truth_out != err;
                pool.outputs[c].set(i, f, out ? VoteLabel::OUT : VoteLabel::IN);
            }
        }
    }
    return pool;
}

std::vector<std::vector<double>> measure_realized_correlation(const MachinePool& pool,
                                                              const WorldTruth& world) {
    const int n = pool.config.n_classifiers;
    std::vector<std::vector<double>> corr(n, std::vector<double>(n, 1.0));

    // Error indicators per classifier over the grid.
    std::vector<std::vector<std::uint8_t>> err(n);
    for (int c = 0; c < n; ++c) {
        err[c].reserve(static_cast<std::size_t>(world.n_items) * world.n_filters());
        for (int i = 0; i < world.n_items; ++i)
            for (int f = 0; f < world.n_filters(); ++f) {
                const auto label = pool.outputs[c].get(i, f);
                if (!label) throw coverage_error("machine pool output grid incomplete");
                const bool out = *label == VoteLabel::OUT;
                err[c].push_back(out != world.applies(i, f) ? 1 : 0);
            }
    }

    for (int j = 0; j < n; ++j) {
        for (int k = j + 1; k < n; ++k) {
            long long both = 0, either = 0;
            for (std::size_t t = 0; t < err[j].size(); ++t) {
                const bool ej = err[j][t] != 0, ek = err[k][t] != 0;
                if (ej && ek) ++both;
                if (ej || ek) ++either;
            }
            const double v = either == 0 ? std::numeric_limits<double>::quiet_NaN()
                                         : static_cast<double>(both) / static_cast<double>(either);
            corr[j][k] = corr[k][j] = v;
        }
    }
    return corr;
}

void write_world_csv(std::ostream& out, const WorldTruth& world) {
    out << "item_id,filter_id,truth\n";
    for (int i = 0; i < world.n_items; ++i)
        for (int f = 0; f < world.n_filters(); ++f)
            out << i << ',' << f << ',' << (world.applies(i, f) ? 1 : 0) << '\n';
}

WorldTruth read_world_csv(std::istream& in, std::vector<FilterSpec> filters) {
    WorldTruth world;
    world.filters = std::move(filters);
    std::string line;
    if (!std::getline(in, line) || line.rfind("item_id,filter_id,truth", 0) != 0)
        throw std::runtime_error("world csv: missing header");
    std::vector<std::tuple<int, int, int>> rows;
    int max_item = -1;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        int item, filter, truth;
        if (std::sscanf(line.c_str(), "%d,%d,%d", &item, &filter, &truth) != 3)
            throw std::runtime_error("world csv: bad row at line " + std::to_string(line_no));
        rows.emplace_back(item, filter, truth);
        max_item = std::max(max_item, item);
    }
    world.n_items = max_item + 1;
    world.truth.assign(static_cast<std::size_t>(world.n_items) * world.filters.size(), 0);
    for (auto [item, filter, truth] : rows)
        world.truth[static_cast<std::size_t>(item) * world.filters.size() + filter] =
            truth ? 1 : 0;
    return world;
}

void write_pool_csv(std::ostream& out, const MachinePool& pool, int n_items, int n_filters) {
    out << "classifier_id,item_id,filter_id,label\n";
    for (int c = 0; c < pool.config.n_classifiers; ++c)
        for (int i = 0; i < n_items; ++i)
            for (int f = 0; f < n_filters; ++f) {
                const auto label = pool.outputs[c].get(i, f);
                if (!label) throw coverage_error("machine pool output grid incomplete");
                out << c << ',' << i << ',' << f << ',' << to_string(*label) << '\n';
            }
}

std::vector<LabelGrid> read_pool_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("classifier_id,item_id,filter_id,label", 0) != 0)
        throw std::runtime_error("pool csv: missing header");
    std::vector<LabelGrid> grids;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        int c, item, filter;
        char label_buf[8] = {0};
        if (std::sscanf(line.c_str(), "%d,%d,%d,%7[A-Z]", &c, &item, &filter, label_buf) != 4)
            throw std::runtime_error("pool csv: bad row at line " + std::to_string(line_no));
        if (c < 0) throw std::runtime_error("pool csv: negative classifier id at line " +
                                            std::to_string(line_no));
        if (static_cast<std::size_t>(c) >= grids.size()) grids.resize(c + 1);
        grids[c].set(item, filter, vote_label_from_string(label_buf));
    }
    return grids;
}

} // namespace screening::simworld
