#ifndef SCREENING_SIMWORLD_HPP
#define SCREENING_SIMWORLD_HPP

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include "screening/types.hpp"

namespace screening::simworld {

// Ground truth for a synthetic screening problem.
struct WorldTruth {
    int n_items = 0;
    std::vector<FilterSpec> filters;
    std::uint64_t seed = 0;
    std::vector<std::uint8_t> truth; // n_items x |F| row-major, 1 = filter applies

    bool applies(int item_id, int filter_id) const {
        return truth[static_cast<std::size_t>(item_id) * filters.size() + filter_id] != 0;
    }
    // An item passes the screening when no filter applies.
    bool item_passes(int item_id) const {
        for (std::size_t f = 0; f < filters.size(); ++f)
            if (applies(item_id, static_cast<int>(f))) return false;
        return true;
    }
    int n_filters() const { return static_cast<int>(filters.size()); }
};

struct CrowdModel {
    double accuracy_low = 0.55;
    double accuracy_high = 0.8;

    void validate() const {
        if (accuracy_low < 0.5) throw std::domain_error("crowd accuracy_low below 0.5");
        if (accuracy_high > 1.0) throw std::domain_error("crowd accuracy_high above 1");
        if (accuracy_low > accuracy_high) throw std::domain_error("crowd accuracy range inverted");
    }
};

struct MachinePoolConfig {
    int n_classifiers = 10;
    double accuracy_low = 0.5;
    double accuracy_high = 0.95;
    double target_correlation = 0.0; // mixing weight of the shared-error draw

    void validate() const {
        if (n_classifiers < 0) throw std::domain_error("negative classifier count");
        if (accuracy_low < 0.0 || accuracy_high > 1.0 || accuracy_low > accuracy_high)
            throw std::domain_error("machine accuracy range invalid");
        if (target_correlation < 0.0 || target_correlation > 1.0)
            throw std::domain_error("target correlation outside [0,1]");
    }
};

struct MachinePool {
    MachinePoolConfig config;
    std::uint64_t seed = 0;
    std::vector<double> accuracies;  // configured a_c per classifier
    std::vector<LabelGrid> outputs;  // complete over the item x filter grid
};

// Derive an independent substream seed; used to keep world/pool/gold/vote
// randomness decoupled.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag);

WorldTruth generate_world(int n_items, std::vector<FilterSpec> filters, std::uint64_t seed);

// Equal per-filter power hitting a target pass rate: (1 - theta)^n = pass_rate.
double power_for_pass_rate(double pass_rate, int n_filters);

// Draw a fresh worker, skew by the filter difficulty, answer accordingly.
VoteRecord simulate_crowd_vote(int item_id, int filter_id, const WorldTruth& world,
                               const CrowdModel& crowd, std::mt19937_64& rng, int worker_id);

// Correlated classifier outputs: one shared uniform per (item, filter);
// each classifier either thresholds the shared draw at its own error rate
// (with probability target_correlation) or uses an independent draw, so the
// marginal accuracy is preserved exactly.
MachinePool simulate_classifier_outputs(const WorldTruth& world, const MachinePoolConfig& config,
                                        std::uint64_t seed);

// Pairwise P(both err | at least one errs) over the whole grid; diagonal 1;
// NaN when neither classifier of a pair ever errs.
std::vector<std::vector<double>> measure_realized_correlation(const MachinePool& pool,
                                                              const WorldTruth& world);

// Simulated crowd: a fresh worker per vote, independent errors.
class SimCrowdSource : public VoteSource {
public:
    SimCrowdSource(const WorldTruth& world, CrowdModel crowd, std::uint64_t seed)
        : world_(&world), crowd_(crowd), rng_(seed) {
        crowd_.validate();
    }

    VoteRecord next_vote(int item_id, int filter_id) override {
        return simulate_crowd_vote(item_id, filter_id, *world_, crowd_, rng_, next_worker_++);
    }

private:
    const WorldTruth* world_;
    CrowdModel crowd_;
    std::mt19937_64 rng_;
    int next_worker_ = 0;
};

// CSV export/import for replay and cross-implementation checks.
void write_world_csv(std::ostream& out, const WorldTruth& world);
WorldTruth read_world_csv(std::istream& in, std::vector<FilterSpec> filters);
void write_pool_csv(std::ostream& out, const MachinePool& pool, int n_items, int n_filters);
std::vector<LabelGrid> read_pool_csv(std::istream& in);

} // namespace screening::simworld

#endif
