#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "perfcast/error.hpp"
#include "perfcast/gp.hpp"
#include "perfcast/hwforecast.hpp"
#include "perfcast/stats.hpp"
#include "perfcast/trend.hpp"

namespace perfcast {

struct IndividualPrediction {
    double mean_log = 0.0;
    double variance = 0.0;
    bool extrapolated = false;  // config outside the GP training range
};

/// Trend mean plus GP residual mean; trend (delta-method) variance plus GP variance.
inline IndividualPrediction predict_individual(const TrendModel& trend, const GpModel& gp, double t,
                                               const HardwareConfig& x) {
    if (t < 0.0) throw DataError("prediction time precedes the time origin");
    const GpPrediction r = gp_predict(gp, x);
    return {trend_mean(trend, t) + r.mean, trend_variance(trend, t) + r.variance, is_extrapolation(gp, x)};
}

struct ScenarioBound {
    MonthIndex t;
    double q = 0.5;
    HardwareConfig config;
    double mean_log_score = 0.0;
    double variance = 0.0;
    double lo95 = 0.0;
    double hi95 = 0.0;
    std::size_t n_candidates = 0;
    std::vector<std::string> warnings;
};

/// Index (0-based) of the lower nearest-rank q-quantile among m sorted values: ceil(q m) - 1.
inline std::size_t nearest_rank_index(double q, std::size_t m) {
    if (!(q > 0.0 && q < 1.0)) throw DataError("quantile level must lie in (0, 1)");
    if (m == 0) throw DataError("no values to take a quantile of");
    auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(m) - 1e-12));
    return std::clamp<std::size_t>(k, 1, m) - 1;
}

/// Predicts every candidate, takes the q-th empirical quantile of the predicted
/// log scores (lower nearest rank) and reports the configuration realising it.
/// Among tied predictions the smallest configuration in enumeration order wins.
inline ScenarioBound select_quantile_config(const TrendModel& trend, const GpModel& gp, MonthIndex t,
                                            const std::vector<HardwareConfig>& candidates, double q) {
    if (candidates.empty()) throw DataError("no feasible configurations at " + t.str());
    std::vector<HardwareConfig> cfg = candidates;
    std::sort(cfg.begin(), cfg.end());
    std::vector<IndividualPrediction> pred;
    pred.reserve(cfg.size());
    for (const auto& c : cfg) pred.push_back(predict_individual(trend, gp, t.value, c));

    std::vector<double> sorted;
    for (const auto& p : pred) sorted.push_back(p.mean_log);
    std::sort(sorted.begin(), sorted.end());
    const double target = sorted[nearest_rank_index(q, sorted.size())];
    std::size_t chosen = 0;
    while (pred[chosen].mean_log != target) ++chosen;

    ScenarioBound b;
    b.t = t;
    b.q = q;
    b.config = cfg[chosen];
    b.mean_log_score = pred[chosen].mean_log;
    b.variance = pred[chosen].variance;
    const double half = stats::kZ95 * std::sqrt(b.variance);
    b.lo95 = b.mean_log_score - half;
    b.hi95 = b.mean_log_score + half;
    b.n_candidates = cfg.size();
    if (pred[chosen].extrapolated) b.warnings.push_back("configuration outside GP training range");
    return b;
}

/// Quantile scenario bound at time t: predict factor quantiles, enumerate and
/// filter configurations, then select the q-th quantile prediction.
inline ScenarioBound scenario_bound(const TrendModel& trend, const GpModel& gp, const std::vector<QuantileLine>& lines,
                                    const FeasibleRegion& region, MonthIndex t, double q,
                                    const std::vector<double>& taus = default_taus()) {
    if (!(q > 0.0 && q < 1.0)) throw DataError("quantile level must lie in (0, 1)");
    const FactorQuantiles fq = predict_factor_quantiles(lines, t.value, taus);
    const std::vector<HardwareConfig> feasible = enumerate_configs(fq, region, t);
    return select_quantile_config(trend, gp, t, feasible, q);
}

struct SweepError {
    MonthIndex t;
    double q = 0.0;
    std::string message;
};

struct SweepResult {
    std::vector<ScenarioBound> rows;  // time-major, in input order
    std::vector<SweepError> errors;
};

inline SweepResult scenario_sweep(const TrendModel& trend, const GpModel& gp, const std::vector<QuantileLine>& lines,
                                  const FeasibleRegion& region, const std::vector<MonthIndex>& times,
                                  const std::vector<double>& qs, const std::vector<double>& taus = default_taus()) {
    if (times.empty() || qs.empty()) throw DataError("scenario sweep needs at least one time and one quantile");
    SweepResult out;
    for (const auto t : times)
        for (const double q : qs) {
            try {
                out.rows.push_back(scenario_bound(trend, gp, lines, region, t, q, taus));
            } catch (const Error& e) {
                out.errors.push_back({t, q, e.what()});
            }
        }
    return out;
}

}  // namespace perfcast
