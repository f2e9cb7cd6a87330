// screensim: experiment runner and utilities for hybrid crowd-machine
// multi-predicate item screening.
//
// Exit codes: 0 on success, 1 on runtime errors, 2 on configuration or
// schema errors.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "screening/experiments.hpp"
#include "screening/io.hpp"
#include "screening/simworld.hpp"

namespace fs = std::filesystem;
using namespace screening;

namespace {

struct RunArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed_override;
    int jobs = 0;
    bool include_gold_cost = false;
};

struct GateArgs {
    std::string gold_path;
    std::string outputs_path;
    double selection_threshold = 0.95;
    std::string out_path = "gate_report.csv";
};

struct ReplayArgs {
    std::string votes_path;
    std::string config_path;
    std::string strategy;
    int repetition = 0;
    int sweep_index = 0;
    std::string out_dir = ".";
};

void write_text_file(const fs::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << contents;
}

void write_charts(const fs::path& dir, const experiments::ExperimentReport& report,
                  std::vector<std::string>& outputs) {
    const struct {
        const char* metric;
        const char* file;
        const char* title;
        const char* y_label;
    } charts[] = {
        {"loss", "loss_vs_price_ratio.svg", "Loss vs price ratio", "loss per item"},
        {"recall", "recall_vs_price_ratio.svg", "Recall vs price ratio", "recall"},
    };
    for (const auto& chart : charts) {
        std::vector<io::ChartSeries> series;
        for (experiments::Strategy s : report.strategies) {
            io::ChartSeries cs;
            cs.name = experiments::to_string(s);
            for (double v : report.sweep_values)
                cs.points.emplace_back(report.mean_of(v, s, "price_ratio"),
                                       report.mean_of(v, s, chart.metric));
            series.push_back(std::move(cs));
        }
        std::ostringstream svg;
        io::write_svg_chart(svg, chart.title, "price ratio", chart.y_label, series);
        write_text_file(dir / chart.file, svg.str());
        outputs.push_back(chart.file);
    }
}

// Re-run the first repetition of the first sweep point and record vote logs,
// decisions, and (for hybrid strategies) the per-run JSON report.
void record_first_repetition(const fs::path& dir, const experiments::ExperimentConfig& config,
                             std::vector<std::string>& outputs) {
    experiments::ExperimentConfig point = config;
    if (config.sweep)
        experiments::apply_sweep_value(point, config.sweep->parameter,
                                       config.sweep->values.front());
    const auto setup = experiments::make_repetition_setup(point, 0, 0);
    for (experiments::Strategy strategy : config.strategies) {
        simworld::SimCrowdSource crowd(setup.world, point.crowd, setup.vote_seed);
        sr::RunResult run;
        hsr::HsrResult hsr_result;
        const bool hybrid = strategy == experiments::Strategy::HSR_NB ||
                            strategy == experiments::Strategy::HSR_STACKED;
        experiments::run_strategy(strategy, point, setup, crowd, &run,
                                  hybrid ? &hsr_result : nullptr);

        const std::string tag = experiments::to_string(strategy);
        {
            std::ostringstream votes;
            io::write_vote_log_csv(votes, run.vote_log);
            write_text_file(dir / ("votes-" + tag + ".csv"), votes.str());
            outputs.push_back("votes-" + tag + ".csv");
        }
        {
            std::ostringstream decisions;
            io::write_decisions_csv(decisions, run.items);
            write_text_file(dir / ("decisions-" + tag + ".csv"), decisions.str());
            outputs.push_back("decisions-" + tag + ".csv");
        }
        if (hybrid) {
            write_text_file(dir / ("run-report-" + tag + ".json"),
                            io::run_report_json(hsr_result).dump(2) + "\n");
            outputs.push_back("run-report-" + tag + ".json");
        }
    }
}

int cmd_run(const RunArgs& args) {
    nlohmann::json config_doc;
    io::CliConfig cli;
    try {
        std::ifstream in(args.config_path);
        if (!in) throw config_error("cannot open config file: " + args.config_path);
        try {
            config_doc = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw config_error(std::string("config is not valid JSON: ") + e.what());
        }
        cli = io::parse_config(config_doc);
    } catch (const config_error& e) {
        nlohmann::json err;
        err["error"] = "config";
        err["message"] = e.what();
        std::cerr << err.dump(2) << '\n';
        return 2;
    }

    try {
        experiments::ExperimentConfig& config = cli.experiment;
        const bool overridden = args.seed_override.has_value();
        if (overridden) config.base_seed = *args.seed_override;
        if (args.include_gold_cost) config.include_gold_cost = true;
        const int jobs = args.jobs > 0
                             ? args.jobs
                             : std::max(1u, std::thread::hardware_concurrency());

        const auto report = experiments::run_experiment(config, jobs);

        fs::create_directories(args.out_dir);
        std::vector<std::string> outputs;
        {
            std::ostringstream csv;
            io::write_results_csv(csv, report);
            write_text_file(fs::path(args.out_dir) / "results.csv", csv.str());
            outputs.push_back("results.csv");
        }
        if (cli.output.charts) write_charts(args.out_dir, report, outputs);
        if (cli.output.record_votes) record_first_repetition(args.out_dir, config, outputs);

        const auto manifest =
            io::make_manifest(config_doc, config.base_seed, overridden, outputs);
        write_text_file(fs::path(args.out_dir) / "manifest.json", manifest.dump(2) + "\n");
        return 0;
    } catch (const std::exception& e) {
        nlohmann::json err;
        err["error"] = "runtime";
        err["message"] = e.what();
        std::cerr << err.dump(2) << '\n';
        return 1;
    }
}

int cmd_gate_report(const GateArgs& args) {
    try {
        std::ifstream gold_in(args.gold_path);
        if (!gold_in) throw std::runtime_error("cannot open gold file: " + args.gold_path);
        std::ifstream outputs_in(args.outputs_path);
        if (!outputs_in)
            throw std::runtime_error("cannot open outputs file: " + args.outputs_path);

        auto entries = io::read_gold_csv(gold_in);
        auto grids = simworld::read_pool_csv(outputs_in);
        if (entries.empty())
            std::cerr << "warning: empty gold set, every classifier will be rejected\n";

        int n_filters = 1;
        for (const auto& e : entries) n_filters = std::max(n_filters, e.filter_id + 1);
        for (const auto& grid : grids)
            for (const auto& [key, label] : grid.raw())
                n_filters = std::max(n_filters, static_cast<int>(key & 0xffffffff) + 1);

        const auto gold = classifier_gate::make_gold_set(std::move(entries), 1.0);
        const auto rows = io::gate_report(gold, grids, n_filters, args.selection_threshold);
        io::write_gate_report_table(std::cout, rows);

        std::ofstream csv(args.out_path, std::ios::binary);
        if (!csv) throw std::runtime_error("cannot write " + args.out_path);
        io::write_gate_report_csv(csv, rows);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

int cmd_replay(const ReplayArgs& args) {
    io::CliConfig cli;
    try {
        cli = io::load_config_file(args.config_path);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }
    try {
        experiments::ExperimentConfig point = cli.experiment;
        if (point.sweep) {
            if (args.sweep_index < 0 ||
                args.sweep_index >= static_cast<int>(point.sweep->values.size()))
                throw std::runtime_error("sweep index out of range");
            experiments::apply_sweep_value(point, point.sweep->parameter,
                                           point.sweep->values[args.sweep_index]);
        }
        const experiments::Strategy strategy =
            args.strategy.empty() ? point.strategies.front()
                                  : experiments::strategy_from_string(args.strategy);

        std::ifstream votes_in(args.votes_path);
        if (!votes_in) throw std::runtime_error("cannot open vote log: " + args.votes_path);
        const auto votes = io::read_vote_log_csv(votes_in);

        const auto setup =
            experiments::make_repetition_setup(point, args.sweep_index, args.repetition);
        io::ReplayVoteSource source(votes);
        sr::RunResult run;
        experiments::run_strategy(strategy, point, setup, source, &run);

        fs::create_directories(args.out_dir);
        std::ostringstream decisions;
        io::write_decisions_csv(decisions, run.items);
        write_text_file(fs::path(args.out_dir) /
                            ("decisions-replay-" + std::string(experiments::to_string(strategy)) +
                             ".csv"),
                        decisions.str());
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "screensim: hybrid crowd-machine item screening experiments.\n"
        "Exit codes: 0 success, 1 runtime error, 2 config/schema error."};
    app.require_subcommand(1);

    RunArgs run_args;
    CLI::App* run = app.add_subcommand("run", "run a configured experiment");
    run->add_option("config", run_args.config_path, "experiment config (JSON)")->required();
    run->add_option("--out", run_args.out_dir, "output directory (default: .)");
    std::uint64_t seed_value = 0;
    CLI::Option* seed_opt = run->add_option("--seed", seed_value, "override the base seed");
    run->add_option("--jobs", run_args.jobs, "parallel repetitions (default: processors)");
    run->add_flag("--include-gold-cost", run_args.include_gold_cost,
                  "include gold acquisition cost in the price ratio");

    GateArgs gate_args;
    CLI::App* gate = app.add_subcommand("gate-report", "test classifiers against a gold set");
    gate->add_option("gold", gate_args.gold_path, "gold CSV: item_id,filter_id,label")->required();
    gate->add_option("outputs", gate_args.outputs_path,
                     "classifier outputs CSV: classifier_id,item_id,filter_id,label")
        ->required();
    gate->add_option("--sc", gate_args.selection_threshold, "selection threshold (default 0.95)");
    gate->add_option("--out", gate_args.out_path, "report CSV path (default gate_report.csv)");

    ReplayArgs replay_args;
    CLI::App* replay = app.add_subcommand("replay", "re-run a strategy over a recorded vote log");
    replay->add_option("votes", replay_args.votes_path, "vote log CSV")->required();
    replay->add_option("config", replay_args.config_path, "experiment config (JSON)")->required();
    replay->add_option("--strategy", replay_args.strategy,
                       "strategy to replay (default: first configured)");
    replay->add_option("--repetition", replay_args.repetition, "repetition index (default 0)");
    replay->add_option("--sweep-index", replay_args.sweep_index, "sweep point index (default 0)");
    replay->add_option("--out", replay_args.out_dir, "output directory (default: .)");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) {
        if (*seed_opt) run_args.seed_override = seed_value;
        return cmd_run(run_args);
    }
    if (gate->parsed()) return cmd_gate_report(gate_args);
    if (replay->parsed()) return cmd_replay(replay_args);
    return 2;
}
