#ifndef SCREENING_TYPES_HPP
#define SCREENING_TYPES_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace screening {

// A vote/label on an (item, filter) pair. OUT means the filter applies and
// the item is screened out by this filter.
enum class VoteLabel : std::uint8_t { IN = 0, OUT = 1 };

inline const char* to_string(VoteLabel v) { return v == VoteLabel::OUT ? "OUT" : "IN"; }

inline VoteLabel vote_label_from_string(const std::string& s) {
    if (s == "IN") return VoteLabel::IN;
    if (s == "OUT") return VoteLabel::OUT;
    throw std::invalid_argument("unknown vote label: '" + s + "' (expected IN or OUT)");
}

// Ground-truth description of one screening filter.
struct FilterSpec {
    int id = 0;
    double power = 0.0;       // proportion of items the filter applies to
    double difficulty = 0.0;  // >= 0, shrinks crowd accuracy toward 0.5

    void validate() const {
        if (power < 0.0 || power > 1.0) throw std::domain_error("filter power outside [0,1]");
        if (difficulty < 0.0) throw std::domain_error("filter difficulty must be >= 0");
    }
};

// Estimated filter parameters (from the baseline run or the ensemble).
struct FilterEstimate {
    int filter_id = 0;
    double power_hat = 0.5;            // estimated probability the filter applies
    double worker_accuracy_hat = 0.5;  // clamped to [0.5, 1]
    bool informed = true;              // false when no votes could inform the estimate
};

// Loss function weights: loss = (k * FE + FI) / n_items.
struct LossParams {
    double k = 10.0;           // false-exclusion weight
    double expert_cost = 20.0; // expert per-item cost, in crowd-vote units

    void validate() const {
        if (k <= 0.0) throw std::domain_error("loss weight k must be > 0");
        if (expert_cost <= 0.0) throw std::domain_error("expert cost must be > 0");
    }
};

// One crowd vote on an (item, filter) pair.
struct VoteRecord {
    int item_id = 0;
    int filter_id = 0;
    int worker_id = 0;
    VoteLabel label = VoteLabel::IN;
};

// Sparse (item, filter) -> label map; used for machine-classifier outputs.
class LabelGrid {
public:
    static std::uint64_t key(int item_id, int filter_id) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(item_id)) << 32) |
               static_cast<std::uint32_t>(filter_id);
    }

    void set(int item_id, int filter_id, VoteLabel label) { labels_[key(item_id, filter_id)] = label; }

    std::optional<VoteLabel> get(int item_id, int filter_id) const {
        auto it = labels_.find(key(item_id, filter_id));
        if (it == labels_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t size() const { return labels_.size(); }
    const std::unordered_map<std::uint64_t, VoteLabel>& raw() const { return labels_; }

private:
    std::unordered_map<std::uint64_t, VoteLabel> labels_;
};

// Abstraction over any source of crowd votes: the simulated crowd or a
// replay reader over a recorded vote log.
class VoteSource {
public:
    virtual ~VoteSource() = default;
    virtual VoteRecord next_vote(int item_id, int filter_id) = 0;
};

struct budget_exhausted_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct coverage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct insufficient_data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct degenerate_evidence_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace screening

#endif
