#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "perfcast/analysis.hpp"
#include "perfcast/error.hpp"
#include "perfcast/gp.hpp"
#include "perfcast/hwforecast.hpp"
#include "perfcast/ingest.hpp"
#include "perfcast/normalize.hpp"
#include "perfcast/scenario.hpp"
#include "perfcast/trend.hpp"

namespace perfcast::io {

using nlohmann::json;

template <typename T>
json opt(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

template <typename T>
T get(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(std::string("JSON field '") + key + "' missing");
    try {
        return it->get<T>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("JSON field '") + key + "': " + e.what());
    }
}

template <typename T>
std::optional<T> get_opt(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return get<T>(j, key);
}

// conversions ---------------------------------------------------------------

inline json to_json(const ConversionFactor& f) {
    return {{"old", suite_year(f.old_suite)}, {"new", suite_year(f.new_suite)}, {"method", "constant"},
            {"factor", f.factor},             {"n_pairs", f.n_pairs},           {"r2_cv", opt(f.r2_cv)}};
}

inline json to_json(const RegressionConversion& r) {
    json factors = json::object();
    for (std::size_t i = 0; i < r.factors.size(); ++i) factors[r.factors[i]] = r.beta_factors[i];
    json coef = {{"intercept", r.beta0}, {"factors", factors}};
    coef["log_score_old"] = r.uses_log_old ? json(r.beta1) : json(nullptr);
    return {{"old", suite_year(r.old_suite)},
            {"new", suite_year(r.new_suite)},
            {"method", "regression"},
            {"coefficients", coef},
            {"factor_order", r.factors},
            {"residual_variance", r.residual_variance},
            {"n_pairs", r.n_pairs},
            {"r2_cv", opt(r.r2_cv)}};
}

inline Conversion conversion_from_json(const json& j) {
    const Suite old_suite = parse_suite(std::to_string(get<int>(j, "old")));
    const Suite new_suite = parse_suite(std::to_string(get<int>(j, "new")));
    const auto method = parse_method(get<std::string>(j, "method"));
    if (method == ConversionMethod::Constant) {
        ConversionFactor f{old_suite, new_suite, get<double>(j, "factor"), get_opt<std::size_t>(j, "n_pairs").value_or(0),
                           get_opt<double>(j, "r2_cv")};
        if (!(f.factor > 0.0)) throw ParseError("conversion factor must be > 0");
        return f;
    }
    RegressionConversion r;
    r.old_suite = old_suite;
    r.new_suite = new_suite;
    const json& c = j.at("coefficients");
    r.beta0 = get<double>(c, "intercept");
    auto b1 = get_opt<double>(c, "log_score_old");
    r.uses_log_old = b1.has_value();
    r.beta1 = b1.value_or(0.0);
    r.factors = get_opt<std::vector<std::string>>(j, "factor_order").value_or(std::vector<std::string>{});
    const json& fj = c.at("factors");
    for (const auto& f : r.factors) r.beta_factors.push_back(get<double>(fj, f.c_str()));
    r.residual_variance = get_opt<double>(j, "residual_variance").value_or(0.0);
    r.n_pairs = get_opt<std::size_t>(j, "n_pairs").value_or(0);
    r.r2_cv = get_opt<double>(j, "r2_cv");
    return r;
}

inline json to_json(const ConversionTable& t, Suite target) {
    json steps = json::array();
    for (const auto& [_, c] : t.steps) steps.push_back(std::visit([](const auto& v) { return to_json(v); }, c));
    json micros = json::array();
    for (const auto& [pair, per] : t.micro_steps)
        for (const auto& [name, f] : per) {
            json m = to_json(f);
            m["micro"] = name;
            micros.push_back(m);
        }
    return {{"target", suite_year(target)}, {"conversions", steps}, {"micro_conversions", micros}};
}

inline ConversionTable conversion_table_from_json(const json& j) {
    ConversionTable t;
    for (const auto& c : j.at("conversions")) {
        Conversion conv = conversion_from_json(c);
        auto key = std::visit([](const auto& v) { return std::make_pair(v.old_suite, v.new_suite); }, conv);
        t.steps[key] = conv;
    }
    if (j.contains("micro_conversions"))
        for (const auto& m : j.at("micro_conversions")) {
            auto conv = conversion_from_json(m);
            auto f = std::get<ConversionFactor>(conv);
            t.micro_steps[{f.old_suite, f.new_suite}][get<std::string>(m, "micro")] = f;
        }
    return t;
}

// trend -----------------------------------------------------------------------

inline json to_json(const TrendModel& m) {
    std::vector<double> cov;
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) cov.push_back(m.cov(i, k));
    return {{"alpha", m.alpha}, {"beta", m.beta}, {"gamma", m.gamma}, {"sigma2", m.sigma2},
            {"cov", cov},       {"t_origin", m.t_origin.str()},       {"n", m.n}};
}

inline TrendModel trend_from_json(const json& j) {
    TrendModel m;
    m.alpha = get<double>(j, "alpha");
    m.beta = get<double>(j, "beta");
    m.gamma = get<double>(j, "gamma");
    m.sigma2 = get<double>(j, "sigma2");
    auto cov = get<std::vector<double>>(j, "cov");
    if (cov.size() != 9) throw ParseError("trend 'cov' must hold 9 values");
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) m.cov(i, k) = cov[static_cast<std::size_t>(3 * i + k)];
    if (auto o = get_opt<std::string>(j, "t_origin")) m.t_origin = MonthIndex::parse(*o);
    if (m.t_origin.value != 0) throw ParseError("trend t_origin must be 1995-08");
    m.n = get_opt<std::size_t>(j, "n").value_or(0);
    if (m.sigma2 < 0.0) throw ParseError("trend sigma2 must be >= 0");
    return m;
}

// hardware forecasting --------------------------------------------------------

inline json to_json(const std::vector<QuantileLine>& lines) {
    json a = json::array();
    for (const auto& l : lines)
        a.push_back({{"factor", l.factor},
                     {"tau", l.tau},
                     {"intercept", l.intercept},
                     {"slope", l.slope},
                     {"window_from", l.window_from.str()},
                     {"window_to", l.window_to.str()}});
    return {{"lines", a}};
}

inline std::vector<QuantileLine> quantile_lines_from_json(const json& j) {
    std::vector<QuantileLine> out;
    for (const auto& l : j.at("lines")) {
        QuantileLine q;
        q.factor = get<std::string>(l, "factor");
        q.tau = get<double>(l, "tau");
        q.intercept = get<double>(l, "intercept");
        q.slope = get<double>(l, "slope");
        q.window_from = MonthIndex::parse(get<std::string>(l, "window_from"));
        q.window_to = MonthIndex::parse(get<std::string>(l, "window_to"));
        out.push_back(q);
    }
    return out;
}

inline json polygon_json(const Polygon& p) {
    json a = json::array();
    for (const auto& v : p) a.push_back({v.x, v.y});
    return a;
}

inline Polygon polygon_from_json(const json& j) {
    Polygon p;
    for (const auto& v : j) {
        if (!v.is_array() || v.size() != 2) throw ParseError("polygon vertices must be [x, y] pairs");
        p.push_back({v[0].get<double>(), v[1].get<double>()});
    }
    return p;
}

inline json to_json(const FeasibleRegion& r) {
    json eras = json::array();
    for (const auto& e : r.eras)
        eras.push_back({{"from", e.from.str()},
                        {"to", e.to.str()},
                        {"freq_cores_poly", polygon_json(e.freq_cores)},
                        {"freq_l3_poly", polygon_json(e.freq_l3)}});
    return {{"min_cache_per_core_mb", r.min_cache_per_core_mb}, {"eras", eras}};
}

inline FeasibleRegion region_from_json(const json& j) {
    FeasibleRegion r;
    r.min_cache_per_core_mb = get_opt<double>(j, "min_cache_per_core_mb").value_or(0.5);
    for (const auto& e : j.at("eras"))
        r.eras.push_back({MonthIndex::parse(get<std::string>(e, "from")), MonthIndex::parse(get<std::string>(e, "to")),
                          polygon_from_json(e.at("freq_cores_poly")), polygon_from_json(e.at("freq_l3_poly"))});
    r.validate();
    return r;
}

// gp --------------------------------------------------------------------------

inline json to_json(const GpModel& m) {
    std::vector<double> x, mean, sd;
    for (Eigen::Index i = 0; i < m.x.rows(); ++i)
        for (Eigen::Index k = 0; k < m.x.cols(); ++k) x.push_back(m.x(i, k));
    for (Eigen::Index k = 0; k < m.x.cols(); ++k) mean.push_back(m.standardization.mean(k)), sd.push_back(m.standardization.sd(k));
    std::vector<double> y(m.y.data(), m.y.data() + m.y.size());
    std::vector<std::string> cols(kGpColumns.begin(), kGpColumns.end());
    return {{"standardization", {{"columns", cols}, {"mean", mean}, {"sd", sd}}},
            {"theta", m.theta},
            {"tau2", m.tau2},
            {"g", m.g},
            {"n", m.x.rows()},
            {"d", m.x.cols()},
            {"X", x},
            {"y", y}};
}

inline GpModel gp_from_json(const json& j) {
    const auto n = get<Eigen::Index>(j, "n");
    const auto d = get<Eigen::Index>(j, "d");
    auto x = get<std::vector<double>>(j, "X");
    auto y = get<std::vector<double>>(j, "y");
    if (static_cast<Eigen::Index>(x.size()) != n * d || static_cast<Eigen::Index>(y.size()) != n)
        throw ParseError("GP X/y sizes disagree with n and d");
    ResidualDataset data;
    data.x.resize(n, d);
    data.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < d; ++k) data.x(i, k) = x[static_cast<std::size_t>(i * d + k)];
        data.y(i) = y[static_cast<std::size_t>(i)];
    }
    GpModel m = condition_gp(data, get<double>(j, "theta"), get<double>(j, "g"));
    m.tau2 = get<double>(j, "tau2");
    if (!(m.tau2 > 0.0)) throw ParseError("GP tau2 must be > 0");
    return m;
}

// analysis and reports --------------------------------------------------------

inline json to_json(const stats::Coefficient& c) {
    return {{"parameter", c.name}, {"coef", c.estimate}, {"se", c.se},        {"t", c.t_value},
            {"p", c.p_value},      {"ci_lo", c.ci_lo},   {"ci_hi", c.ci_hi}};
}

inline json to_json(const FactorRegression& f) {
    json rows = json::array();
    for (const auto& c : f.coefficients) rows.push_back(to_json(c));
    return {{"coefficients", rows}, {"residual_variance", f.residual_variance}, {"n", f.n}};
}

inline json to_json(const InfluenceReport& r) {
    json micros = json::array();
    for (const auto& m : r.micros)
        micros.push_back({{"micro", m.name},
                          {"log_variance", m.log_variance},
                          {"log_range", m.log_range},
                          {"slope", opt(m.slope)},
                          {"correlation", opt(m.correlation)},
                          {"leverage", m.leverage},
                          {"overall_to_micro_mean", m.overall_to_micro_mean},
                          {"overall_to_micro_variance", m.overall_to_micro_variance}});
    return {{"suite", suite_year(r.suite)}, {"n_records", r.n_records}, {"top_tied", r.top_tied}, {"micros", micros}};
}

inline json to_json(const SuiteSummary& s) {
    return {{"suite", suite_year(s.suite)},
            {"score", s.kind == ScoreKind::Speed ? "speed" : "rate"},
            {"max", s.max},
            {"mean", s.mean},
            {"min", s.min},
            {"n", s.count},
            {"mean_cores", opt(s.mean_cores)},
            {"mean_freq_mhz", opt(s.mean_freq_mhz)},
            {"mean_l3_kb", opt(s.mean_l3_kb)},
            {"mean_threads_per_core", opt(s.mean_threads_per_core)}};
}

inline json to_json(const LineageResult& r) {
    json series = json::array();
    for (const auto& s : r.series) {
        json gens = json::array();
        for (const auto& g : s.generations)
            gens.push_back({{"genus", g.genus}, {"date", g.date.str()}, {"mean_log_score", g.mean_log_score}, {"n", g.n}});
        series.push_back({{"leaf", s.genus}, {"generations", gens}});
    }
    json pairs = json::array();
    for (auto [a, b] : r.lag1_pairs) pairs.push_back({a, b});
    return {{"series", series},
            {"lag1_pairs", pairs},
            {"lag1_correlation", opt(r.lag1_correlation)},
            {"correlation_defined", r.lag1_correlation.has_value()}};
}

inline json to_json(const HardwareConfig& c) {
    return {{"cores", c.cores}, {"freq_mhz", c.freq_mhz}, {"l3_kb", c.l3_kb}, {"threads_per_core", c.threads_per_core}};
}

inline json to_json(const ScenarioBound& b) {
    return {{"t", b.t.value},
            {"date", b.t.str()},
            {"q", b.q},
            {"config", to_json(b.config)},
            {"mean_log", b.mean_log_score},
            {"var", b.variance},
            {"lo95", b.lo95},
            {"hi95", b.hi95},
            {"n_candidates", b.n_candidates},
            {"warnings", b.warnings}};
}

inline const std::vector<std::string>& sweep_csv_header() {
    static const std::vector<std::string> h{"t",     "date",    "q",   "cores", "freq_mhz", "l3_kb",
                                            "threads", "mean_log", "var", "lo95",  "hi95"};
    return h;
}

inline std::string sweep_csv(const SweepResult& s) {
    std::string out = csv::join_row(sweep_csv_header());
    for (const auto& b : s.rows)
        out += csv::join_row({std::to_string(b.t.value), b.t.str(), csv::format_real(b.q), std::to_string(b.config.cores),
                              csv::format_real(b.config.freq_mhz), csv::format_real(b.config.l3_kb),
                              csv::format_real(b.config.threads_per_core), csv::format_real(b.mean_log_score),
                              csv::format_real(b.variance), csv::format_real(b.lo95), csv::format_real(b.hi95)});
    return out;
}

inline json sweep_json(const SweepResult& s) {
    json rows = json::array(), errors = json::array();
    for (const auto& b : s.rows) rows.push_back(to_json(b));
    for (const auto& e : s.errors) errors.push_back({{"date", e.t.str()}, {"q", e.q}, {"error", e.message}});
    return {{"rows", rows}, {"errors", errors}};
}

// files -----------------------------------------------------------------------

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("'" + path + "': " + e.what());
    }
}

}  // namespace perfcast::io
