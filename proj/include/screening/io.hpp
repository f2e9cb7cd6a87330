#ifndef SCREENING_IO_HPP
#define SCREENING_IO_HPP

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "screening/experiments.hpp"
#include "screening/hsr_engine.hpp"

namespace screening::io {

std::string format_double(double v);

// --- vote logs -------------------------------------------------------------

// CSV header: item_id,filter_id,worker_id,label
void write_vote_log_csv(std::ostream& out, std::span<const VoteRecord> votes);
std::vector<VoteRecord> read_vote_log_csv(std::istream& in);

// Feeds recorded votes back in per-(item, filter) order. Throws
// coverage_error when a pair's votes are exhausted.
class ReplayVoteSource : public VoteSource {
public:
    explicit ReplayVoteSource(std::span<const VoteRecord> votes);
    VoteRecord next_vote(int item_id, int filter_id) override;

private:
    std::map<std::pair<int, int>, std::vector<VoteRecord>> queues_;
    std::map<std::pair<int, int>, std::size_t> cursors_;
};

// --- decisions and results ---------------------------------------------------

void write_decisions_csv(std::ostream& out, std::span<const sr::ItemState> items);
void write_results_csv(std::ostream& out, const experiments::ExperimentReport& report);

// --- gate report -------------------------------------------------------------

struct GateReportRow {
    int classifier_id = 0;
    int filter_id = 0;
    int correct = 0;
    int failed = 0;
    double alpha = 1.0;
    double beta = 1.0;
    double p_better_than_random = 0.5;
    bool retained = false;
};

std::vector<GateReportRow> gate_report(const classifier_gate::GoldSet& gold,
                                       std::span<const LabelGrid> outputs, int n_filters,
                                       double selection_threshold,
                                       const prob::BetaPosterior& prior = {1.0, 1.0});

void write_gate_report_csv(std::ostream& out, std::span<const GateReportRow> rows);
void write_gate_report_table(std::ostream& out, std::span<const GateReportRow> rows);

// gold CSV: item_id,filter_id,label
std::vector<classifier_gate::GoldEntry> read_gold_csv(std::istream& in);

// --- charts ------------------------------------------------------------------

struct ChartSeries {
    std::string name;
    std::vector<std::pair<double, double>> points;
};

void write_svg_chart(std::ostream& out, const std::string& title, const std::string& x_label,
                     const std::string& y_label, std::span<const ChartSeries> series);

// --- configuration -----------------------------------------------------------

struct RunOptions {
    bool charts = true;
    bool record_votes = false;
};

struct CliConfig {
    experiments::ExperimentConfig experiment;
    RunOptions output;
};

// Strict parse: unknown keys are rejected.
CliConfig parse_config(const nlohmann::json& doc);
CliConfig load_config_file(const std::string& path);

std::uint64_t fnv1a64(std::string_view bytes);

nlohmann::json make_manifest(const nlohmann::json& config_doc, std::uint64_t seed,
                             bool seed_overridden, std::span<const std::string> output_files);

// Per-run JSON report: decisions, vote counts, ledger, gating diagnostics,
// power trajectory.
nlohmann::json run_report_json(const hsr::HsrResult& result);

} // namespace screening::io

#endif
