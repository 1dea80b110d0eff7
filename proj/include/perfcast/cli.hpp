#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "perfcast/io.hpp"

namespace perfcast::cli {

using nlohmann::json;

/// Bad invocation or configuration (exit 1), as opposed to bad data (exit 2).
class UsageError : public Error {
public:
    using Error::Error;
};

inline constexpr std::uint64_t kDefaultSeed = 20170801;

struct RunConfig {
    std::string systems, micros, lineage;
    std::string conversions, trend, gp, quantiles, region;
    Suite target = Suite::Spec2017;
    ConversionMethod method = ConversionMethod::Constant;
    std::optional<MonthIndex> trend_from, trend_to;
    std::vector<double> taus = default_taus();
    std::string out;
    std::uint64_t seed = kDefaultSeed;
    std::string format = "csv";

    void validate() const {
        for (const auto* p : {&systems, &micros, &lineage, &conversions, &trend, &gp, &quantiles, &region})
            if (!p->empty() && !std::filesystem::is_regular_file(*p)) throw UsageError("file not found: " + *p);
        for (double t : taus)
            if (!(t > 0.0 && t < 1.0)) throw UsageError("quantile levels must lie in (0, 1)");
        if (format != "csv" && format != "json") throw UsageError("--format must be csv or json");
    }
};

/// Reads a RunConfig JSON file. Relative paths are taken as given (relative to the working directory).
inline RunConfig load_run_config(const std::string& path) {
    if (!std::filesystem::is_regular_file(path)) throw UsageError("config file not found: " + path);
    const json j = io::read_json_file(path);
    RunConfig c;
    auto str = [&](const char* key, std::string& dst) {
        if (auto v = io::get_opt<std::string>(j, key)) dst = *v;
    };
    str("systems", c.systems);
    str("micros", c.micros);
    str("lineage", c.lineage);
    str("conversions", c.conversions);
    str("trend", c.trend);
    str("gp", c.gp);
    str("quantiles", c.quantiles);
    str("region", c.region);
    str("out", c.out);
    str("format", c.format);
    if (j.contains("target_suite") && !j["target_suite"].is_null())
        c.target = parse_suite(j["target_suite"].is_number() ? std::to_string(j["target_suite"].get<int>())
                                                               : j["target_suite"].get<std::string>());
    if (auto m = io::get_opt<std::string>(j, "method")) c.method = parse_method(*m);
    if (j.contains("trend_window")) {
        const json& w = j["trend_window"];
        if (auto f = io::get_opt<std::string>(w, "from")) c.trend_from = MonthIndex::parse(*f);
        if (auto t = io::get_opt<std::string>(w, "to")) c.trend_to = MonthIndex::parse(*t);
    }
    if (auto q = io::get_opt<std::vector<double>>(j, "quantiles_tau")) c.taus = *q;
    if (auto s = io::get_opt<std::uint64_t>(j, "seed")) c.seed = *s;
    return c;
}

/// Writes named artifacts under the output directory, or to stdout when none is given.
class Output {
public:
    Output(std::string dir, std::uint64_t seed, std::ostream& out) : dir_(std::move(dir)), seed_(seed), out_(out) {}

    void csv(const std::string& name, const std::string& body) const {
        write(name, "# seed: " + std::to_string(seed_) + "\n" + body);
    }

    void json(const std::string& name, nlohmann::json j) const {
        j["seed"] = seed_;
        write(name, j.dump(2) + "\n");
    }

    void text(const std::string& name, const std::string& body) const { write(name, body); }

private:
    void write(const std::string& name, const std::string& body) const {
        if (dir_.empty()) {
            out_ << body;
            return;
        }
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw UsageError("cannot create output directory '" + dir_ + "': " + ec.message());
        const auto path = std::filesystem::path(dir_) / name;
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw UsageError("cannot write '" + path.string() + "'");
        f << body;
    }

    std::string dir_;
    std::uint64_t seed_;
    std::ostream& out_;
};

// data loading ------------------------------------------------------------------

inline std::vector<BenchmarkRecord> load_records(const RunConfig& c) {
    if (c.systems.empty()) throw UsageError("--systems is required");
    std::ifstream sys(c.systems);
    if (!sys) throw UsageError("cannot open " + c.systems);
    std::optional<std::ifstream> mic;
    if (!c.micros.empty()) {
        mic.emplace(c.micros);
        if (!*mic) throw UsageError("cannot open " + c.micros);
    }
    return parse_records(sys, mic ? &*mic : nullptr, builtin_suites());
}

inline ConversionTable conversion_table(const std::vector<BenchmarkRecord>& records, const RunConfig& c,
                                        bool with_cv) {
    if (!c.conversions.empty()) return io::conversion_table_from_json(io::read_json_file(c.conversions));
    ChainOptions opt;
    opt.target = c.target;
    opt.method = c.method;
    opt.cv.seed = c.seed;
    opt.with_cv = with_cv;
    return fit_conversions(records, opt);
}

inline std::vector<BenchmarkRecord> normalized_records(const RunConfig& c) {
    auto records = load_records(c);
    const ConversionTable table = conversion_table(records, c, false);
    return chain_normalize(std::move(records), c.target, table);
}

inline TrendModel fit_trend_records(const std::vector<BenchmarkRecord>& records, const RunConfig& c) {
    std::vector<double> t, y;
    for (const auto& r : records) {
        auto s = r.modeling_score();
        if (!s) continue;
        if (c.trend_from && r.date < *c.trend_from) continue;
        if (c.trend_to && *c.trend_to < r.date) continue;
        t.push_back(r.date.value);
        y.push_back(std::log(*s));
    }
    return fit_trend(std::span<const double>(t), std::span<const double>(y));
}

inline TrendModel trend_model(const RunConfig& c) {
    if (!c.trend.empty()) return io::trend_from_json(io::read_json_file(c.trend));
    return fit_trend_records(normalized_records(c), c);
}

inline FeasibleRegion region_for(const RunConfig& c) {
    if (!c.region.empty()) return io::region_from_json(io::read_json_file(c.region));
    if (!c.systems.empty()) return hull_region(load_records(c));
    return builtin_region();
}

inline std::string fmt(double v) { return csv::format_real(v); }

inline std::string opt_cell(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

inline std::vector<MonthIndex> parse_months(const std::vector<std::string>& items) {
    std::vector<MonthIndex> out;
    for (const auto& s : items) out.push_back(MonthIndex::parse(s));
    return out;
}

// subcommands -------------------------------------------------------------------

struct Flags {
    RunConfig cfg;
    std::string config_path;
    // command-specific
    std::string suite;
    std::string target = "2017";
    std::string method = "constant";
    std::string score = "speed";
    std::string start = "1996-04";
    int horizon = 420;
    std::string rounding = "chained";
    std::optional<double> alpha, beta, gamma;
    std::string date;
    int cores = 0;
    double freq = 0.0, l3_kb = -1.0, threads = 1.0;
    double tol = 1e-3;
    double fraction = 0.2;
    std::string window_from, trend_from, trend_to;
    std::vector<std::string> dates;
    std::vector<double> qs{0.5};
    std::vector<std::string> fields = sensitivity_fields();
    int folds = 5;
    std::vector<std::string> factors;
};

struct Context {
    const Flags& f;
    const RunConfig& c;
    const Output& o;
    std::ostream& out;
    std::ostream& err;
};

inline Suite suite_or(const Flags& f, Suite fallback) { return f.suite.empty() ? fallback : parse_suite(f.suite); }

inline int cmd_ingest_check(const Context& x) {
    if (x.c.systems.empty()) throw UsageError("--systems is required");
    std::ifstream sys(x.c.systems);
    std::optional<std::ifstream> mic;
    if (!x.c.micros.empty()) mic.emplace(x.c.micros);
    ParseReport rep = parse_records_lenient(sys, mic ? &*mic : nullptr, builtin_suites());
    std::string body = csv::join_row({"line", "reason"});
    for (const auto& r : rep.rejected) body += csv::join_row({std::to_string(r.line), r.reason});
    x.o.csv("rejected.csv", body);
    std::map<Suite, std::size_t> counts;
    for (const auto& r : rep.records) ++counts[r.suite];
    std::string per;
    for (auto [s, n] : counts) per += " " + to_string(s) + ":" + std::to_string(n);
    x.out << "accepted " << rep.records.size() << ", rejected " << rep.rejected.size() << " of " << rep.input_rows
          << " rows;" << per << "\n";
    for (const auto& r : rep.rejected) x.err << "line " << r.line << ": " << r.reason << "\n";
    return rep.rejected.empty() ? 0 : 2;
}

inline int cmd_summarize(const Context& x) {
    const auto records = load_records(x.c);
    const ScoreKind kind = x.f.score == "rate" ? ScoreKind::Rate : ScoreKind::Speed;
    std::vector<SuiteSummary> rows;
    if (!x.f.suite.empty()) {
        rows.push_back(summarize(records, parse_suite(x.f.suite), kind));
    } else {
        for (Suite s : kAllSuites)
            if (std::any_of(records.begin(), records.end(), [&](const auto& r) { return r.suite == s; }))
                rows.push_back(summarize(records, s, kind));
    }
    if (x.c.format == "json") {
        json a = json::array();
        for (const auto& s : rows) a.push_back(io::to_json(s));
        x.o.json("summary.json", {{"summaries", a}});
    } else {
        std::string body = csv::join_row({"suite", "score", "max", "mean", "min", "n", "mean_cores", "mean_freq_mhz",
                                          "mean_l3_kb", "mean_threads_per_core"});
        for (const auto& s : rows)
            body += csv::join_row({to_string(s.suite), x.f.score, fmt(s.max), fmt(s.mean), fmt(s.min),
                                   std::to_string(s.count), opt_cell(s.mean_cores), opt_cell(s.mean_freq_mhz),
                                   opt_cell(s.mean_l3_kb), opt_cell(s.mean_threads_per_core)});
        x.o.csv("summary.csv", body);
    }
    char line[160];
    for (const auto& s : rows) {
        std::snprintf(line, sizeof line, "%s %s  max %.2f  mean %.2f  min %.2f  n %zu\n", to_string(s.suite).c_str(),
                      x.f.score.c_str(), s.max, s.mean, s.min, s.count);
        x.out << line;
    }
    return 0;
}

inline int cmd_normalize(const Context& x) {
    auto records = load_records(x.c);
    RunConfig c = x.c;
    c.conversions.clear();
    ChainOptions opt;
    opt.target = c.target;
    opt.method = c.method;
    opt.cv.seed = c.seed;
    opt.cv.folds = static_cast<std::size_t>(x.f.folds);
    if (x.f.factors.size() == 1 && x.f.factors[0] == "none")
        opt.auto_factors = false;
    else
        opt.cv.factors = x.f.factors;
    const ConversionTable table =
        x.c.conversions.empty() ? fit_conversions(records, opt)
                                : io::conversion_table_from_json(io::read_json_file(x.c.conversions));
    const auto normalized = chain_normalize(records, c.target, table);
    x.o.json("conversions.json", io::to_json(table, c.target));

    std::vector<std::string> shared{"gcc", "perl"};
    if (x.c.format == "json") {
        json a = json::array();
        for (const auto& r : normalized)
            a.push_back({{"record_id", r.record_id},
                         {"suite", suite_year(r.suite)},
                         {"date", r.date.str()},
                         {"score_speed", io::opt(r.score_speed)},
                         {"normalized_speed", io::opt(r.normalized_speed)},
                         {"normalized_micros", r.normalized_micros}});
        x.o.json("normalized.json", {{"target", suite_year(c.target)}, {"records", a}});
    } else {
        std::string body = csv::join_row(
            {"record_id", "suite", "date", "score_speed", "normalized_speed", "normalized_gcc", "normalized_perl"});
        for (const auto& r : normalized) {
            auto micro = [&](const std::string& k) {
                auto it = r.normalized_micros.find(k);
                return it == r.normalized_micros.end() ? std::string() : fmt(it->second);
            };
            body += csv::join_row({r.record_id, to_string(r.suite), r.date.str(), opt_cell(r.score_speed),
                                   opt_cell(r.normalized_speed), micro("gcc"), micro("perl")});
        }
        x.o.csv("normalized.csv", body);
    }
    for (const auto& [key, conv] : table.steps) {
        x.out << to_string(key.first) << "->" << to_string(key.second) << " " << to_string(c.method);
        std::visit(
            [&](const auto& v) {
                if constexpr (std::is_same_v<std::decay_t<decltype(v)>, ConversionFactor>)
                    x.out << " factor " << fmt(v.factor);
                else
                    x.out << " intercept " << fmt(v.beta0);
                x.out << " n " << v.n_pairs << " r2_cv " << (v.r2_cv ? fmt(*v.r2_cv) : "NA");
            },
            conv);
        x.out << "\n";
    }
    return 0;
}

inline int cmd_compose_check(const Context& x) {
    if (x.c.micros.empty()) throw UsageError("--micros is required");
    const auto records = load_records(x.c);
    const auto defs = builtin_suites();
    std::string body = csv::join_row({"record_id", "suite", "residual", "flagged"});
    std::size_t checked = 0, flagged = 0;
    for (const auto& r : records) {
        if (!x.f.suite.empty() && r.suite != parse_suite(x.f.suite)) continue;
        const auto& def = defs.at(r.suite);
        if (!r.score_speed || r.micros.size() != def.p()) continue;
        const CompositionCheck chk = verify_composition(r, def, x.f.tol);
        ++checked;
        flagged += chk.flagged;
        body += csv::join_row({r.record_id, to_string(r.suite), fmt(chk.residual), chk.flagged ? "1" : "0"});
    }
    x.o.csv("composition.csv", body);
    x.out << "checked " << checked << " records, flagged " << flagged << " (tol " << fmt(x.f.tol) << ")\n";
    return 0;
}

inline int cmd_influence(const Context& x) {
    if (x.c.micros.empty()) throw UsageError("--micros is required");
    const auto records = load_records(x.c);
    const Suite s = suite_or(x.f, Suite::Spec2006);
    const InfluenceReport rep = influence_stats(records, builtin_suites().at(s));
    if (x.c.format == "json") {
        x.o.json("influence.json", io::to_json(rep));
    } else {
        std::string body = csv::join_row({"micro", "log_variance", "log_range", "slope", "correlation", "leverage",
                                          "overall_to_micro_mean", "overall_to_micro_variance"});
        for (const auto& m : rep.micros)
            body += csv::join_row({m.name, fmt(m.log_variance), fmt(m.log_range), opt_cell(m.slope),
                                   opt_cell(m.correlation), fmt(m.leverage), fmt(m.overall_to_micro_mean),
                                   fmt(m.overall_to_micro_variance)});
        x.o.csv("influence.csv", body);
    }
    x.out << "suite " << to_string(s) << ", " << rep.n_records << " records; most variable micro "
          << rep.micros.front().name << (rep.top_tied ? " (tied)" : "") << "\n";
    return 0;
}

inline int cmd_factor_reg(const Context& x) {
    const FactorRegression fr = fit_factor_regression(normalized_records(x.c));
    if (x.c.format == "json")
        x.o.json("factor_regression.json", io::to_json(fr));
    else
        x.o.text("factor_regression.txt", format_coefficient_table(fr.coefficients));
    x.out << "n " << fr.n << ", residual variance " << fmt(fr.residual_variance) << "\n";
    return 0;
}

inline int cmd_lineage(const Context& x) {
    if (x.c.lineage.empty()) throw UsageError("--lineage is required");
    const auto records = normalized_records(x.c);
    std::ifstream in(x.c.lineage);
    const LineageResult res = lineage_series(in, records);
    x.o.json("lineage.json", io::to_json(res));
    x.out << res.series.size() << " branches, " << res.lag1_pairs.size() << " lag-1 pairs, correlation "
          << (res.lag1_correlation ? fmt(*res.lag1_correlation) : "undefined") << "\n";
    return 0;
}

inline int cmd_fit_trend(const Context& x) {
    const TrendModel m = fit_trend_records(normalized_records(x.c), x.c);
    x.o.json("trend.json", io::to_json(m));
    x.out << "alpha " << fmt(m.alpha) << " beta " << fmt(m.beta) << " gamma " << fmt(m.gamma) << " sigma2 "
          << fmt(m.sigma2) << " n " << m.n << "\n";
    return 0;
}

inline int cmd_doubling(const Context& x) {
    TrendModel m;
    if (x.f.alpha || x.f.beta || x.f.gamma) {
        if (!x.f.alpha || !x.f.beta) throw UsageError("--alpha and --beta are both required");
        m.alpha = *x.f.alpha;
        m.beta = *x.f.beta;
        m.gamma = x.f.gamma.value_or(0.0);
    } else if (!x.c.trend.empty()) {
        m = io::trend_from_json(io::read_json_file(x.c.trend));
    } else {
        m = trend_model(x.c);
    }
    if (x.f.rounding != "chained" && x.f.rounding != "nearest")
        throw UsageError("--rounding must be chained or nearest");
    const auto rounding =
        x.f.rounding == "nearest" ? DoublingRounding::ClosedFormNearest : DoublingRounding::ChainedMonth;
    const auto rows = doubling_times(m, MonthIndex::parse(x.f.start), x.f.horizon, rounding);
    if (x.c.format == "json") {
        json a = json::array();
        for (const auto& r : rows) a.push_back({{"date", r.date.str()}, {"gap", r.gap}, {"exact_time", r.exact_time}});
        x.o.json("doubling.json", {{"doublings", a}});
    } else {
        std::string body = csv::join_row({"date", "gap", "exact_time"});
        for (const auto& r : rows) body += csv::join_row({r.date.str(), std::to_string(r.gap), fmt(r.exact_time)});
        x.o.csv("doubling.csv", body);
    }
    x.out << rows.size() - 1 << " doublings from " << x.f.start << "; gaps";
    for (std::size_t i = 1; i < rows.size(); ++i) x.out << " " << rows[i].gap;
    x.out << "\n";
    return 0;
}

inline int cmd_fit_quantiles(const Context& x) {
    const auto records = load_records(x.c);
    const MonthIndex from = x.f.window_from.empty() ? kHardwareWindowStart : MonthIndex::parse(x.f.window_from);
    const auto lines = fit_hardware_quantiles(records, x.c.taus, from);
    x.o.json("quantiles.json", io::to_json(lines));
    x.out << lines.size() << " quantile lines from " << from.str() << "\n";
    return 0;
}

inline HardwareConfig config_from_flags(const Flags& f) {
    if (f.cores < 1 || !(f.freq > 0.0) || f.l3_kb < 0.0)
        throw UsageError("--cores, --freq and --l3-kb are required");
    HardwareConfig h;
    h.cores = f.cores;
    h.freq_mhz = f.freq;
    h.l3_kb = f.l3_kb;
    h.threads_per_core = f.threads;
    h.validate();
    return h;
}

inline int cmd_feasible_check(const Context& x) {
    const FeasibleRegion region = region_for(x.c);
    x.o.json("region.json", io::to_json(region));
    if (x.f.date.empty()) {
        x.out << "region with " << region.eras.size() << " eras\n";
        return 0;
    }
    const HardwareConfig h = config_from_flags(x.f);
    const MonthIndex t = MonthIndex::parse(x.f.date);
    const bool ok = is_feasible(h, region, t);
    x.out << (ok ? "feasible" : "infeasible") << ": cores " << h.cores << " freq_mhz " << fmt(h.freq_mhz) << " l3_mb "
          << fmt(h.l3_mb()) << " at " << t.str() << "\n";
    return 0;
}

inline GpFitOptions gp_options(const RunConfig& c) {
    GpFitOptions o;
    o.seed = c.seed;
    return o;
}

inline int cmd_fit_gp(const Context& x) {
    const auto records = normalized_records(x.c);
    const TrendModel trend = x.c.trend.empty() ? fit_trend_records(records, x.c)
                                               : io::trend_from_json(io::read_json_file(x.c.trend));
    const ResidualDataset data = build_residuals(records, trend, suite_or(x.f, Suite::Spec2017));
    const GpModel gp = fit_gp(data, gp_options(x.c));
    x.o.json("gp.json", io::to_json(gp));
    x.out << "theta " << fmt(gp.theta) << " g " << fmt(gp.g) << " tau2 " << fmt(gp.tau2) << " n " << gp.x.rows()
          << " dropped " << data.dropped << "\n";
    return 0;
}

inline int cmd_gp_validate(const Context& x) {
    const auto records = normalized_records(x.c);
    const TrendModel trend = x.c.trend.empty() ? fit_trend_records(records, x.c)
                                               : io::trend_from_json(io::read_json_file(x.c.trend));
    const HoldoutResult h =
        holdout_validate(records, trend, x.f.fraction, suite_or(x.f, Suite::Spec2017), gp_options(x.c));
    if (x.c.format == "json") {
        json pairs = json::array();
        for (auto [p, o] : h.pairs) pairs.push_back({{"predicted", p}, {"observed", o}});
        x.o.json("holdout.json", {{"rmse", h.rmse},
                                  {"n_train", h.n_train},
                                  {"n_test", h.n_test},
                                  {"split_date", h.split_date.str()},
                                  {"pairs", pairs}});
    } else {
        std::string body = csv::join_row({"predicted", "observed"});
        for (auto [p, o] : h.pairs) body += csv::join_row({fmt(p), fmt(o)});
        x.o.csv("holdout.csv", body);
    }
    x.out << "rmse " << fmt(h.rmse) << " (train " << h.n_train << ", test " << h.n_test << ", split "
          << h.split_date.str() << ")\n";
    return 0;
}

inline GpModel load_gp(const RunConfig& c) {
    if (c.gp.empty()) throw UsageError("--gp is required");
    return io::gp_from_json(io::read_json_file(c.gp));
}

inline TrendModel load_trend(const RunConfig& c) {
    if (c.trend.empty()) throw UsageError("--trend is required");
    return io::trend_from_json(io::read_json_file(c.trend));
}

inline int cmd_predict(const Context& x) {
    const TrendModel trend = load_trend(x.c);
    const GpModel gp = load_gp(x.c);
    if (x.f.date.empty()) throw UsageError("--date is required");
    const MonthIndex t = MonthIndex::parse(x.f.date);
    const HardwareConfig h = config_from_flags(x.f);
    const IndividualPrediction p = predict_individual(trend, gp, t.value, h);
    const double half = stats::kZ95 * std::sqrt(p.variance);
    x.o.json("prediction.json", {{"date", t.str()},
                                 {"t", t.value},
                                 {"config", io::to_json(h)},
                                 {"mean_log", p.mean_log},
                                 {"var", p.variance},
                                 {"lo95", p.mean_log - half},
                                 {"hi95", p.mean_log + half},
                                 {"extrapolated", p.extrapolated}});
    if (p.extrapolated) x.err << "warning: configuration outside GP training range\n";
    x.out << "mean_log " << fmt(p.mean_log) << " var " << fmt(p.variance) << " 95% [" << fmt(p.mean_log - half)
          << ", " << fmt(p.mean_log + half) << "]\n";
    return 0;
}

inline int cmd_scenario(const Context& x) {
    const TrendModel trend = load_trend(x.c);
    const GpModel gp = load_gp(x.c);
    if (x.c.quantiles.empty()) throw UsageError("--quantiles is required");
    const auto lines = io::quantile_lines_from_json(io::read_json_file(x.c.quantiles));
    const FeasibleRegion region = region_for(x.c);
    if (x.f.dates.empty()) throw UsageError("--dates is required");
    const SweepResult res = scenario_sweep(trend, gp, lines, region, parse_months(x.f.dates), x.f.qs, x.c.taus);
    if (x.c.format == "json")
        x.o.json("scenario.json", io::sweep_json(res));
    else
        x.o.csv("scenario.csv", io::sweep_csv(res));
    for (const auto& e : res.errors) x.err << e.t.str() << " q=" << fmt(e.q) << ": " << e.message << "\n";
    x.out << res.rows.size() << " scenario rows, " << res.errors.size() << " failed cells\n";
    return res.rows.empty() ? 2 : 0;
}

inline int cmd_sensitivity_export(const Context& x) {
    const auto records = normalized_records(x.c);
    x.o.csv("sensitivity.csv", emit_sensitivity_table(records, x.f.fields));
    x.out << "sensitivity table with " << x.f.fields.size() << " fields\n";
    return 0;
}

// dispatch ----------------------------------------------------------------------

struct Command {
    const char* name;
    const char* help;
    int (*fn)(const Context&);
};

inline const std::vector<Command>& commands() {
    static const std::vector<Command> c{
        {"ingest-check", "validate systems/micros CSVs and report rejected rows", cmd_ingest_check},
        {"summarize", "per-suite score and hardware summary", cmd_summarize},
        {"normalize", "fit cross-suite conversions and rescale scores", cmd_normalize},
        {"compose-check", "check scores against the geometric mean of their micros", cmd_compose_check},
        {"influence", "per-microbenchmark variability and influence", cmd_influence},
        {"factor-reg", "regress log normalized score on cores and auto-parallel", cmd_factor_reg},
        {"lineage", "lag-1 correlation along processor lineages", cmd_lineage},
        {"fit-trend", "fit the power-law performance trend", cmd_fit_trend},
        {"doubling", "doubling times under a fitted trend", cmd_doubling},
        {"fit-quantiles", "quantile lines for cores, frequency and L3", cmd_fit_quantiles},
        {"feasible-check", "export the feasible region or test one configuration", cmd_feasible_check},
        {"fit-gp", "fit the residual Gaussian process", cmd_fit_gp},
        {"gp-validate", "date-split holdout of trend + GP", cmd_gp_validate},
        {"predict", "predict one configuration's log score", cmd_predict},
        {"scenario", "quantile scenario bounds over dates", cmd_scenario},
        {"sensitivity-export", "long-format table for factor plots", cmd_sensitivity_export},
    };
    return c;
}

inline void add_common(CLI::App* s, Flags& f) {
    s->add_option("--systems", f.cfg.systems, "systems CSV");
    s->add_option("--micros", f.cfg.micros, "micros CSV");
    s->add_option("--config", f.config_path, "run configuration JSON");
    s->add_option("--out", f.cfg.out, "output directory");
    s->add_option("--seed", f.cfg.seed, "seed for CV folds and optimizer starts");
    s->add_option("--format", f.cfg.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
}

inline void add_specific(CLI::App* s, const std::string& name, Flags& f) {
    auto model_inputs = [&] {
        s->add_option("--target", f.target, "target suite")->check(CLI::IsMember({"1995", "2000", "2006", "2017"}));
        s->add_option("--method", f.method, "constant or regression")->check(CLI::IsMember({"constant", "regression"}));
        s->add_option("--conversions", f.cfg.conversions, "conversions JSON from normalize");
    };
    auto hw = [&] {
        s->add_option("--date", f.date, "YYYY-MM");
        s->add_option("--cores", f.cores);
        s->add_option("--freq", f.freq, "MHz");
        s->add_option("--l3-kb", f.l3_kb, "KB");
        s->add_option("--threads", f.threads, "threads per core");
    };
    auto window = [&] {
        s->add_option("--from", f.trend_from, "trend window start YYYY-MM");
        s->add_option("--to", f.trend_to, "trend window end YYYY-MM");
    };
    if (name == "summarize") {
        s->add_option("--suite", f.suite);
        s->add_option("--score", f.score)->check(CLI::IsMember({"speed", "rate"}));
    } else if (name == "normalize") {
        model_inputs();
        s->add_option("--folds", f.folds)->check(CLI::Range(2, 1000));
        s->add_option("--factors", f.factors, "regression factors, comma-separated, or 'none'")->delimiter(',');
    } else if (name == "compose-check") {
        s->add_option("--suite", f.suite);
        s->add_option("--tol", f.tol);
    } else if (name == "influence") {
        s->add_option("--suite", f.suite);
    } else if (name == "factor-reg" || name == "sensitivity-export") {
        model_inputs();
        if (name == "sensitivity-export") s->add_option("--fields", f.fields)->delimiter(',');
    } else if (name == "lineage") {
        model_inputs();
        s->add_option("--lineage", f.cfg.lineage, "lineage CSV");
    } else if (name == "fit-trend") {
        model_inputs();
        window();
    } else if (name == "doubling") {
        model_inputs();
        window();
        s->add_option("--trend", f.cfg.trend, "trend JSON");
        s->add_option("--alpha", f.alpha);
        s->add_option("--beta", f.beta);
        s->add_option("--gamma", f.gamma);
        s->add_option("--start", f.start, "YYYY-MM");
        s->add_option("--horizon", f.horizon, "months after start");
        s->add_option("--rounding", f.rounding, "chained or nearest");
    } else if (name == "fit-quantiles") {
        s->add_option("--window-from", f.window_from, "YYYY-MM");
        s->add_option("--taus", f.cfg.taus)->delimiter(',');
    } else if (name == "feasible-check") {
        s->add_option("--region", f.cfg.region, "region JSON");
        hw();
    } else if (name == "fit-gp" || name == "gp-validate") {
        model_inputs();
        window();
        s->add_option("--trend", f.cfg.trend, "trend JSON");
        s->add_option("--suite", f.suite);
        if (name == "gp-validate") s->add_option("--fraction", f.fraction, "training share, earliest by date");
    } else if (name == "predict") {
        s->add_option("--trend", f.cfg.trend, "trend JSON");
        s->add_option("--gp", f.cfg.gp, "GP JSON");
        hw();
    } else if (name == "scenario") {
        s->add_option("--trend", f.cfg.trend, "trend JSON");
        s->add_option("--gp", f.cfg.gp, "GP JSON");
        s->add_option("--quantiles", f.cfg.quantiles, "quantile lines JSON");
        s->add_option("--region", f.cfg.region, "region JSON");
        s->add_option("--dates", f.dates, "comma-separated YYYY-MM")->delimiter(',');
        s->add_option("--qs", f.qs, "comma-separated quantile levels")->delimiter(',');
        s->add_option("--taus", f.cfg.taus)->delimiter(',');
    }
}

/// Flags given on the command line win over the config file.
inline RunConfig merge_config(const CLI::App& sub, Flags f) {
    f.cfg.target = parse_suite(f.target);
    f.cfg.method = parse_method(f.method);
    if (f.config_path.empty()) return f.cfg;
    RunConfig c = load_run_config(f.config_path);
    auto given = [&](const char* flag) { return sub.get_option_no_throw(flag) && sub.count(flag) > 0; };
    auto take = [&](const char* flag, auto& dst, const auto& src) {
        if (given(flag)) dst = src;
    };
    take("--systems", c.systems, f.cfg.systems);
    take("--micros", c.micros, f.cfg.micros);
    take("--lineage", c.lineage, f.cfg.lineage);
    take("--conversions", c.conversions, f.cfg.conversions);
    take("--trend", c.trend, f.cfg.trend);
    take("--gp", c.gp, f.cfg.gp);
    take("--quantiles", c.quantiles, f.cfg.quantiles);
    take("--region", c.region, f.cfg.region);
    take("--out", c.out, f.cfg.out);
    take("--seed", c.seed, f.cfg.seed);
    take("--format", c.format, f.cfg.format);
    take("--target", c.target, f.cfg.target);
    take("--method", c.method, f.cfg.method);
    take("--taus", c.taus, f.cfg.taus);
    return c;
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Cross-suite benchmark normalization and performance forecasting", "perfcast"};
    app.require_subcommand(1, 1);
    Flags f;
    std::map<std::string, CLI::App*> subs;
    for (const auto& c : commands()) {
        CLI::App* s = app.add_subcommand(c.name, c.help);
        add_common(s, f);
        add_specific(s, c.name, f);
        subs[c.name] = s;
    }

    if (!args.empty() && !args[0].empty() && args[0][0] != '-' && !subs.count(args[0])) {
        err << "error: unknown subcommand '" << args[0] << "'\n\n" << app.help();
        return 1;
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    const Command* cmd = nullptr;
    CLI::App* sub = nullptr;
    for (const auto& c : commands())
        if (subs[c.name]->parsed()) cmd = &c, sub = subs[c.name];

    try {
        RunConfig cfg = merge_config(*sub, f);
        if (!f.trend_from.empty()) cfg.trend_from = MonthIndex::parse(f.trend_from);
        if (!f.trend_to.empty()) cfg.trend_to = MonthIndex::parse(f.trend_to);
        cfg.validate();
        const Output o(cfg.out, cfg.seed, out);
        return cmd->fn(Context{f, cfg, o, out, err});
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace perfcast::cli
