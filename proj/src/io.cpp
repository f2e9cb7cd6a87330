#include "screening/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace screening::io {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

void write_vote_log_csv(std::ostream& out, std::span<const VoteRecord> votes) {
    out << "item_id,filter_id,worker_id,label\n";
    for (const VoteRecord& v : votes)
        out << v.item_id << ',' << v.filter_id << ',' << v.worker_id << ','
            << to_string(v.label) << '\n';
}

std::vector<VoteRecord> read_vote_log_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("item_id,filter_id,worker_id,label", 0) != 0)
        throw std::runtime_error("vote log: missing header line");
    std::vector<VoteRecord> votes;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        int item, filter, worker;
        char label_buf[8] = {0};
        if (std::sscanf(line.c_str(), "%d,%d,%d,%7[A-Z]", &item, &filter, &worker, label_buf) != 4)
            throw std::runtime_error("vote log: bad row at line " + std::to_string(line_no));
        votes.push_back({item, filter, worker, vote_label_from_string(label_buf)});
    }
    return votes;
}

ReplayVoteSource::ReplayVoteSource(std::span<const VoteRecord> votes) {
    for (const VoteRecord& v : votes) queues_[{v.item_id, v.filter_id}].push_back(v);
}

VoteRecord ReplayVoteSource::next_vote(int item_id, int filter_id) {
    const auto key = std::make_pair(item_id, filter_id);
    auto it = queues_.find(key);
    std::size_t& cursor = cursors_[key];
    if (it == queues_.end() || cursor >= it->second.size())
        throw coverage_error("replay log has no more votes for item " + std::to_string(item_id) +
                             ", filter " + std::to_string(filter_id));
    return it->second[cursor++];
}

void write_decisions_csv(std::ostream& out, std::span<const sr::ItemState> items) {
    out << "item_id,status,difficult,votes_spent\n";
    for (const sr::ItemState& item : items)
        out << item.item_id << ',' << sr::to_string(item.status) << ','
            << (item.difficult ? 1 : 0) << ',' << item.votes_spent << '\n';
}

void write_results_csv(std::ostream& out, const experiments::ExperimentReport& report) {
    out << "sweep_value,strategy,metric,mean,std,n_ok,n_failed\n";
    for (const experiments::AggregateRow& row : report.rows)
        out << format_double(row.sweep_value) << ',' << experiments::to_string(row.strategy)
            << ',' << row.metric << ',' << format_double(row.mean) << ','
            << format_double(row.stddev) << ',' << row.n_ok << ',' << row.n_failed << '\n';
}

std::vector<GateReportRow> gate_report(const classifier_gate::GoldSet& gold,
                                       std::span<const LabelGrid> outputs, int n_filters,
                                       double selection_threshold,
                                       const prob::BetaPosterior& prior) {
    auto profiles = classifier_gate::select_classifiers(
        classifier_gate::test_classifiers(outputs, gold, n_filters, prior), selection_threshold);
    std::vector<GateReportRow> rows;
    for (const auto& p : profiles) {
        for (int f = 0; f < n_filters; ++f) {
            GateReportRow row;
            row.classifier_id = p.classifier_id;
            row.filter_id = f;
            const prob::BetaPosterior& post = p.per_filter_posterior[f];
            row.alpha = post.alpha;
            row.beta = post.beta;
            row.correct = static_cast<int>(std::lround(post.alpha - prior.alpha));
            row.failed = static_cast<int>(std::lround(post.beta - prior.beta));
            row.p_better_than_random = prob::beta_prob_better_than_random(post);
            row.retained = p.retained_for(f);
            rows.push_back(row);
        }
    }
    return rows;
}

void write_gate_report_csv(std::ostream& out, std::span<const GateReportRow> rows) {
    out << "classifier_id,filter_id,correct,failed,alpha,beta,p_better_than_random,retained\n";
    for (const GateReportRow& r : rows)
        out << r.classifier_id << ',' << r.filter_id << ',' << r.correct << ',' << r.failed << ','
            << format_double(r.alpha) << ',' << format_double(r.beta) << ','
            << format_double(r.p_better_than_random) << ',' << (r.retained ? 1 : 0) << '\n';
}

void write_gate_report_table(std::ostream& out, std::span<const GateReportRow> rows) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-12s %-8s %-9s %-8s %-12s %-10s\n", "classifier", "filter",
                  "correct", "failed", "P(acc>0.5)", "retained");
    out << buf;
    for (const GateReportRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-12d %-8d %-9d %-8d %-12.6f %-10s\n", r.classifier_id,
                      r.filter_id, r.correct, r.failed, r.p_better_than_random,
                      r.retained ? "yes" : "no");
        out << buf;
    }
}

std::vector<classifier_gate::GoldEntry> read_gold_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("item_id,filter_id,label", 0) != 0)
        throw std::runtime_error("gold csv: missing header line");
    std::vector<classifier_gate::GoldEntry> entries;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        int item, filter;
        char label_buf[8] = {0};
        if (std::sscanf(line.c_str(), "%d,%d,%7[A-Z]", &item, &filter, label_buf) != 3)
            throw std::runtime_error("gold csv: bad row at line " + std::to_string(line_no));
        entries.push_back({item, filter, vote_label_from_string(label_buf)});
    }
    return entries;
}

namespace {

struct AxisScale {
    double lo = 0.0, hi = 1.0;

    double unit(double v) const { return hi == lo ? 0.5 : (v - lo) / (hi - lo); }
};

AxisScale fit_axis(std::span<const ChartSeries> series, bool x_axis) {
    AxisScale s{std::numeric_limits<double>::infinity(),
                -std::numeric_limits<double>::infinity()};
    for (const ChartSeries& cs : series)
        for (auto [x, y] : cs.points) {
            const double v = x_axis ? x : y;
            s.lo = std::min(s.lo, v);
            s.hi = std::max(s.hi, v);
        }
    if (!std::isfinite(s.lo)) return {0.0, 1.0};
    if (s.hi == s.lo) {
        s.lo -= 0.5;
        s.hi += 0.5;
    }
    const double pad = 0.06 * (s.hi - s.lo);
    return {s.lo - pad, s.hi + pad};
}

const char* kSeriesColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

} // namespace

void write_svg_chart(std::ostream& out, const std::string& title, const std::string& x_label,
                     const std::string& y_label, std::span<const ChartSeries> series) {
    const double width = 640, height = 440;
    const double ml = 70, mr = 160, mt = 40, mb = 55;
    const double pw = width - ml - mr, ph = height - mt - mb;

    const AxisScale xs = fit_axis(series, true);
    const AxisScale ys = fit_axis(series, false);
    auto px = [&](double x) { return ml + xs.unit(x) * pw; };
    auto py = [&](double y) { return mt + (1.0 - ys.unit(y)) * ph; };

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\" "
           "font-family=\"sans-serif\">" << title << "</text>\n";

    // axes
    out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
        << mt + ph << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
        << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 5; ++t) {
        const double fx = xs.lo + (xs.hi - xs.lo) * t / 5.0;
        const double fy = ys.lo + (ys.hi - ys.lo) * t / 5.0;
        out << "<line x1=\"" << px(fx) << "\" y1=\"" << mt + ph << "\" x2=\"" << px(fx)
            << "\" y2=\"" << mt + ph + 5 << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << px(fx) << "\" y=\"" << mt + ph + 20
            << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3g", fx);
        out << buf << "</text>\n";
        out << "<line x1=\"" << ml - 5 << "\" y1=\"" << py(fy) << "\" x2=\"" << ml << "\" y2=\""
            << py(fy) << "\" stroke=\"black\"/>\n";
        std::snprintf(buf, sizeof(buf), "%.3g", fy);
        out << "<text x=\"" << ml - 9 << "\" y=\"" << py(fy) + 4
            << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << buf
            << "</text>\n";
    }
    out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" << x_label
        << "</text>\n";
    out << "<text x=\"18\" y=\"" << mt + ph / 2
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
           "transform=\"rotate(-90 18 " << mt + ph / 2 << ")\">" << y_label << "</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kSeriesColors[s % std::size(kSeriesColors)];
        const ChartSeries& cs = series[s];
        if (cs.points.size() > 1) {
            out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            for (auto [x, y] : cs.points) out << px(x) << ',' << py(y) << ' ';
            out << "\"/>\n";
        }
        for (auto [x, y] : cs.points)
            out << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << color
                << "\"/>\n";
        const double ly = mt + 16 + 18 * static_cast<double>(s);
        out << "<rect x=\"" << ml + pw + 12 << "\" y=\"" << ly - 9
            << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>\n";
        out << "<text x=\"" << ml + pw + 27 << "\" y=\"" << ly
            << "\" font-size=\"12\" font-family=\"sans-serif\">" << cs.name << "</text>\n";
    }
    out << "</svg>\n";
}

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::vector<std::string>& known,
                         const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw config_error("unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

} // namespace

CliConfig parse_config(const nlohmann::json& doc) {
    if (!doc.is_object()) throw config_error("config root must be a JSON object");
    reject_unknown_keys(doc,
                        {"n_items", "filters", "crowd", "machines", "engine", "loss",
                         "gold_items", "selection_threshold", "gate_prior", "stacker",
                         "strategies", "n_repetitions", "base_seed", "sweep",
                         "include_gold_cost", "exclude_gold_from_pool", "output"},
                        "config root");

    CliConfig cli;
    experiments::ExperimentConfig& cfg = cli.experiment;
    read_field(doc, "n_items", cfg.n_items);
    read_field(doc, "gold_items", cfg.gold_items);
    read_field(doc, "selection_threshold", cfg.selection_threshold);
    read_field(doc, "n_repetitions", cfg.n_repetitions);
    read_field(doc, "base_seed", cfg.base_seed);
    read_field(doc, "include_gold_cost", cfg.include_gold_cost);
    read_field(doc, "exclude_gold_from_pool", cfg.exclude_gold_from_pool);

    if (doc.contains("filters")) {
        const json& filters = doc.at("filters");
        if (filters.is_array()) {
            cfg.filters.clear();
            int id = 0;
            for (const json& f : filters) {
                reject_unknown_keys(f, {"power", "difficulty"}, "filters[]");
                FilterSpec spec;
                spec.id = id++;
                spec.power = f.at("power").get<double>();
                read_field(f, "difficulty", spec.difficulty);
                cfg.filters.push_back(spec);
            }
            cfg.n_filters = id;
        } else {
            reject_unknown_keys(filters, {"count", "pass_rate", "difficulty"}, "filters");
            read_field(filters, "count", cfg.n_filters);
            read_field(filters, "pass_rate", cfg.pass_rate);
            read_field(filters, "difficulty", cfg.filter_difficulty);
        }
    }
    if (doc.contains("crowd")) {
        const json& crowd = doc.at("crowd");
        reject_unknown_keys(crowd, {"accuracy_low", "accuracy_high"}, "crowd");
        read_field(crowd, "accuracy_low", cfg.crowd.accuracy_low);
        read_field(crowd, "accuracy_high", cfg.crowd.accuracy_high);
    }
    if (doc.contains("machines")) {
        const json& machines = doc.at("machines");
        reject_unknown_keys(machines,
                            {"count", "accuracy_low", "accuracy_high", "correlation"},
                            "machines");
        read_field(machines, "count", cfg.machines.n_classifiers);
        read_field(machines, "accuracy_low", cfg.machines.accuracy_low);
        read_field(machines, "accuracy_high", cfg.machines.accuracy_high);
        read_field(machines, "correlation", cfg.machines.target_correlation);
    }
    if (doc.contains("engine")) {
        const json& engine = doc.at("engine");
        reject_unknown_keys(engine,
                            {"p_out_threshold", "p_in_threshold", "baseline_items",
                             "baseline_votes_per_pair", "batch_fraction", "n_max",
                             "give_up_cost_factor", "budget", "smoothing",
                             "alpha_reestimate_interval"},
                            "engine");
        read_field(engine, "p_out_threshold", cfg.engine.p_out_threshold);
        read_field(engine, "p_in_threshold", cfg.engine.p_in_threshold);
        read_field(engine, "baseline_items", cfg.engine.baseline_items);
        read_field(engine, "baseline_votes_per_pair", cfg.engine.baseline_votes_per_pair);
        read_field(engine, "batch_fraction", cfg.engine.batch_fraction);
        read_field(engine, "n_max", cfg.engine.n_max);
        read_field(engine, "give_up_cost_factor", cfg.engine.give_up_cost_factor);
        if (engine.contains("budget") && !engine.at("budget").is_null())
            cfg.engine.budget = engine.at("budget").get<long long>();
        if (engine.contains("alpha_reestimate_interval") &&
            !engine.at("alpha_reestimate_interval").is_null())
            cfg.engine.alpha_reestimate_interval =
                engine.at("alpha_reestimate_interval").get<int>();
        if (engine.contains("smoothing")) {
            const json& sm = engine.at("smoothing");
            reject_unknown_keys(sm, {"enabled", "factor", "activation_threshold"},
                                "engine.smoothing");
            read_field(sm, "enabled", cfg.engine.smoothing.enabled);
            read_field(sm, "factor", cfg.engine.smoothing.factor);
            read_field(sm, "activation_threshold", cfg.engine.smoothing.activation_threshold);
        }
    }
    if (doc.contains("loss")) {
        const json& loss = doc.at("loss");
        reject_unknown_keys(loss, {"k", "expert_cost"}, "loss");
        read_field(loss, "k", cfg.loss.k);
        read_field(loss, "expert_cost", cfg.loss.expert_cost);
    }
    if (doc.contains("gate_prior")) {
        const json& prior = doc.at("gate_prior");
        reject_unknown_keys(prior, {"alpha", "beta"}, "gate_prior");
        read_field(prior, "alpha", cfg.gate_prior.alpha);
        read_field(prior, "beta", cfg.gate_prior.beta);
    }
    if (doc.contains("stacker")) {
        const json& stacker = doc.at("stacker");
        reject_unknown_keys(stacker,
                            {"min_training_size", "retrain_decided_threshold", "l2",
                             "training_items"},
                            "stacker");
        read_field(stacker, "min_training_size", cfg.stacker.min_training_size);
        read_field(stacker, "retrain_decided_threshold", cfg.stacker.retrain_decided_threshold);
        read_field(stacker, "l2", cfg.stacker.l2);
        read_field(stacker, "training_items", cfg.stacker_training_items);
    }
    if (doc.contains("strategies")) {
        cfg.strategies.clear();
        for (const json& s : doc.at("strategies"))
            cfg.strategies.push_back(experiments::strategy_from_string(s.get<std::string>()));
    }
    if (doc.contains("sweep") && !doc.at("sweep").is_null()) {
        const json& sweep = doc.at("sweep");
        reject_unknown_keys(sweep, {"parameter", "values"}, "sweep");
        experiments::SweepAxis axis;
        axis.parameter = sweep.at("parameter").get<std::string>();
        for (const json& v : sweep.at("values")) axis.values.push_back(v.get<double>());
        cfg.sweep = std::move(axis);
    }
    if (doc.contains("output")) {
        const json& output = doc.at("output");
        reject_unknown_keys(output, {"charts", "record_votes"}, "output");
        read_field(output, "charts", cli.output.charts);
        read_field(output, "record_votes", cli.output.record_votes);
    }

    try {
        cfg.validate();
        // Sweep parameter names must resolve against the config.
        if (cfg.sweep) {
            experiments::ExperimentConfig probe = cfg;
            experiments::apply_sweep_value(probe, cfg.sweep->parameter, cfg.sweep->values.front());
        }
    } catch (const std::exception& e) {
        throw config_error(e.what());
    }
    return cli;
}

CliConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw config_error(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(doc);
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char b : bytes) {
        hash ^= b;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

nlohmann::json make_manifest(const nlohmann::json& config_doc, std::uint64_t seed,
                             bool seed_overridden, std::span<const std::string> output_files) {
    char hash_buf[32];
    std::snprintf(hash_buf, sizeof(hash_buf), "fnv1a:%016llx",
                  static_cast<unsigned long long>(fnv1a64(config_doc.dump())));
    nlohmann::json manifest;
    manifest["config_hash"] = hash_buf;
    manifest["seed"] = seed;
    manifest["seed_overridden"] = seed_overridden;
    manifest["tool"] = "screensim";
    manifest["version"] = "0.1.0";
    manifest["outputs"] = nlohmann::json::array();
    for (const std::string& f : output_files) manifest["outputs"].push_back(f);
    return manifest;
}

nlohmann::json run_report_json(const hsr::HsrResult& result) {
    nlohmann::json report;
    report["effective_prior_mode"] = ensemble::to_string(result.effective_mode);
    report["iterations"] = result.run.iterations;
    report["stacker_retrains"] = result.stacker_retrains;

    nlohmann::json ledger;
    ledger["baseline_votes"] = result.run.ledger.baseline_votes;
    ledger["adaptive_votes"] = result.run.ledger.adaptive_votes;
    ledger["gold_cost"] = result.run.ledger.gold_cost;
    ledger["total"] = result.run.ledger.total();
    report["ledger"] = ledger;

    nlohmann::json decisions = nlohmann::json::array();
    for (const sr::ItemState& item : result.run.items) {
        nlohmann::json d;
        d["item_id"] = item.item_id;
        d["status"] = sr::to_string(item.status);
        d["difficult"] = item.difficult;
        d["votes_spent"] = item.votes_spent;
        decisions.push_back(std::move(d));
    }
    report["decisions"] = std::move(decisions);

    nlohmann::json gating = nlohmann::json::array();
    for (const auto& profile : result.profiles) {
        nlohmann::json g;
        g["classifier_id"] = profile.classifier_id;
        nlohmann::json per_filter = nlohmann::json::array();
        for (std::size_t f = 0; f < profile.per_filter_posterior.size(); ++f) {
            nlohmann::json entry;
            entry["filter_id"] = f;
            entry["alpha"] = profile.per_filter_posterior[f].alpha;
            entry["beta"] = profile.per_filter_posterior[f].beta;
            entry["retained"] = profile.retained_for(static_cast<int>(f));
            per_filter.push_back(std::move(entry));
        }
        g["filters"] = std::move(per_filter);
        gating.push_back(std::move(g));
    }
    report["gating"] = std::move(gating);

    report["initial_power"] = result.initial_power;
    nlohmann::json trajectory = nlohmann::json::array();
    for (const auto& step : result.power_trajectory) {
        nlohmann::json powers = nlohmann::json::array();
        for (const FilterEstimate& est : step) powers.push_back(est.power_hat);
        trajectory.push_back(std::move(powers));
    }
    report["power_trajectory"] = std::move(trajectory);
    return report;
}

} // namespace screening::io
