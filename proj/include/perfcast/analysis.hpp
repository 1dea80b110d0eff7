#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "perfcast/csv.hpp"
#include "perfcast/error.hpp"
#include "perfcast/records.hpp"
#include "perfcast/stats.hpp"

namespace perfcast {

/// Geometric mean of the suite's microbenchmark ratios.
inline double compose_score(const std::map<std::string, double>& micros, const SuiteDefinition& def) {
    if (def.micros.empty()) throw DataError("suite definition lists no microbenchmarks");
    for (const auto& [name, _] : micros)
        if (!def.has_micro(name)) throw DataError("unexpected microbenchmark '" + name + "'");
    double log_sum = 0.0;
    for (const auto& name : def.micros) {
        auto it = micros.find(name);
        if (it == micros.end()) throw DataError("missing microbenchmark '" + name + "'");
        if (!(it->second > 0.0)) throw DataError("microbenchmark '" + name + "' ratio must be > 0");
        log_sum += std::log(it->second);
    }
    return std::exp(log_sum / static_cast<double>(def.p()) + def.composition_constant);
}

struct CompositionCheck {
    double residual = 0.0;  // log(score) - (mean log micro + c)
    bool flagged = false;   // |residual| > tol
};

inline CompositionCheck verify_composition(const BenchmarkRecord& record, const SuiteDefinition& def, double tol) {
    if (!record.score_speed) throw DataError("record '" + record.record_id + "' has no speed score");
    double log_sum = 0.0;
    for (const auto& name : def.micros) {
        auto it = record.micros.find(name);
        if (it == record.micros.end())
            throw DataError("record '" + record.record_id + "' lacks microbenchmark '" + name + "'");
        log_sum += std::log(it->second);
    }
    CompositionCheck c;
    c.residual = std::log(*record.score_speed) - (log_sum / static_cast<double>(def.p()) + def.composition_constant);
    c.flagged = std::abs(c.residual) > tol;
    return c;
}

struct MicroInfluence {
    std::string name;
    double log_variance = 0.0;  // sample variance of log ratio
    double log_range = 0.0;
    std::optional<double> slope;        // d log(score) / d log(micro); nullopt if micro is constant
    std::optional<double> correlation;  // Pearson, log scale
    double leverage = 0.0;              // composition weight 1/p
    double overall_to_micro_mean = 0.0;      // mean of log(score / micro)
    double overall_to_micro_variance = 0.0;  // variance of log(score / micro)
};

struct InfluenceReport {
    Suite suite = Suite::Spec2006;
    std::size_t n_records = 0;
    std::vector<MicroInfluence> micros;  // ranked by log_variance, largest first
    bool top_tied = false;               // leading variance not strictly largest
};

/// Per-microbenchmark variability and association with the overall score.
inline InfluenceReport influence_stats(const std::vector<BenchmarkRecord>& records, const SuiteDefinition& def) {
    std::vector<const BenchmarkRecord*> rows;
    for (const auto& r : records) {
        if (r.suite != def.suite || !r.score_speed) continue;
        bool full = std::all_of(def.micros.begin(), def.micros.end(),
                                [&](const std::string& m) { return r.micros.count(m) > 0; });
        if (full) rows.push_back(&r);
    }
    if (rows.size() < 10)
        throw DataError("influence analysis needs >= 10 records with full micro sets, found " +
                        std::to_string(rows.size()));

    InfluenceReport rep;
    rep.suite = def.suite;
    rep.n_records = rows.size();
    std::vector<double> log_score;
    for (const auto* r : rows) log_score.push_back(std::log(*r->score_speed));
    const double leverage = 1.0 / static_cast<double>(def.p());

    for (const auto& name : def.micros) {
        MicroInfluence mi;
        mi.name = name;
        mi.leverage = leverage;
        std::vector<double> lm, ratio;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            lm.push_back(std::log(rows[i]->micros.at(name)));
            ratio.push_back(log_score[i] - lm.back());
        }
        auto [lo, hi] = std::minmax_element(lm.begin(), lm.end());
        mi.log_range = *hi - *lo;
        // an exactly constant micro can still leave rounding dust in the variance
        const bool constant = mi.log_range == 0.0;
        mi.log_variance = constant ? 0.0 : stats::variance(lm);
        mi.correlation = stats::pearson(lm, log_score);
        if (!constant) {
            double mx = stats::mean(lm), my = stats::mean(log_score), sxy = 0.0, sxx = 0.0;
            for (std::size_t i = 0; i < lm.size(); ++i) {
                sxy += (lm[i] - mx) * (log_score[i] - my);
                sxx += (lm[i] - mx) * (lm[i] - mx);
            }
            mi.slope = sxy / sxx;
        }
        mi.overall_to_micro_mean = stats::mean(ratio);
        mi.overall_to_micro_variance = stats::variance(ratio);
        rep.micros.push_back(std::move(mi));
    }
    std::stable_sort(rep.micros.begin(), rep.micros.end(),
                     [](const MicroInfluence& a, const MicroInfluence& b) { return a.log_variance > b.log_variance; });
    if (rep.micros.size() > 1) {
        double a = rep.micros[0].log_variance, b = rep.micros[1].log_variance;
        rep.top_tied = a - b <= 1e-12 * std::max(1.0, a);
    }
    return rep;
}

struct FactorRegression {
    std::vector<stats::Coefficient> coefficients;  // intercept, cores, auto_parallel
    double residual_variance = 0.0;
    std::size_t n = 0;
};

/// OLS of log normalized speed on cores and the auto-parallel flag.
///
/// Frequency is left out: it is strongly collinear with date and cores.
inline FactorRegression fit_factor_regression(const std::vector<BenchmarkRecord>& records) {
    std::vector<const BenchmarkRecord*> rows;
    for (const auto& r : records)
        if (r.modeling_score() && r.hw.cores && r.hw.auto_parallel) rows.push_back(&r);
    if (rows.size() < 4) throw DataError("factor regression needs >= 4 complete records");
    std::set<bool> ap;
    std::set<int> cores;
    for (const auto* r : rows) ap.insert(*r->hw.auto_parallel), cores.insert(*r->hw.cores);
    if (ap.size() < 2) throw DataError("degenerate predictor: auto_parallel takes a single value");
    if (cores.size() < 2) throw DataError("degenerate predictor: cores takes a single value");

    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd x(n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto* r = rows[static_cast<std::size_t>(i)];
        x(i, 0) = 1.0;
        x(i, 1) = *r->hw.cores;
        x(i, 2) = *r->hw.auto_parallel ? 1.0 : 0.0;
        y(i) = std::log(*r->modeling_score());
    }
    auto fit = stats::ols(x, y, {"(Intercept)", "cores", "auto_parallel"});
    return {fit.coefficients, fit.residual_variance, fit.n};
}

/// Aligned-column table: Parameter, Coef., SE, t-val, p-val, CI bounds.
inline std::string format_coefficient_table(const std::vector<stats::Coefficient>& rows) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line, "%-16s %10s %10s %10s %10s %10s %10s\n", "Parameter", "Coef.", "SE", "t-val",
                  "p-val", "2.5%", "97.5%");
    out += line;
    for (const auto& c : rows) {
        std::snprintf(line, sizeof line, "%-16s %10.4f %10.4f %10.2f %10.4f %10.4f %10.4f\n", c.name.c_str(),
                      c.estimate, c.se, c.t_value, c.p_value, c.ci_lo, c.ci_hi);
        out += line;
    }
    return out;
}

inline const std::vector<std::string>& sensitivity_fields() {
    static const std::vector<std::string> f{"date",     "score",           "cores",        "freq_mhz",
                                            "l3_kb",    "threads_per_core", "auto_parallel"};
    return f;
}

/// Long-format CSV, one row per record with a score, for external plotting.
inline std::string emit_sensitivity_table(const std::vector<BenchmarkRecord>& records,
                                          const std::vector<std::string>& fields) {
    for (const auto& f : fields)
        if (std::find(sensitivity_fields().begin(), sensitivity_fields().end(), f) == sensitivity_fields().end())
            throw DataError("unknown sensitivity field '" + f + "'");
    auto opt = [](const auto& v) -> std::string {
        if (!v) return {};
        if constexpr (std::is_same_v<std::decay_t<decltype(*v)>, bool>) return *v ? "1" : "0";
        else return csv::format_real(static_cast<double>(*v));
    };
    std::string out = csv::join_row(fields);
    for (const auto& r : records) {
        auto score = r.modeling_score();
        if (!score) continue;
        std::vector<std::string> cells;
        for (const auto& f : fields) {
            if (f == "date") cells.push_back(r.date.str());
            else if (f == "score") cells.push_back(csv::format_real(*score));
            else if (f == "cores") cells.push_back(opt(r.hw.cores));
            else if (f == "freq_mhz") cells.push_back(opt(r.hw.freq_mhz));
            else if (f == "l3_kb") cells.push_back(opt(r.hw.l3_kb));
            else if (f == "threads_per_core") cells.push_back(opt(r.hw.threads_per_core));
            else cells.push_back(opt(r.hw.auto_parallel));
        }
        out += csv::join_row(cells);
    }
    return out;
}

}  // namespace perfcast
