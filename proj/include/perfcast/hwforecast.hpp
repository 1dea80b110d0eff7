#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "perfcast/error.hpp"
#include "perfcast/month.hpp"
#include "perfcast/records.hpp"

namespace perfcast {

// Quantile-line factor names. Core counts are modeled on the log2 scale.
inline constexpr const char* kLog2Cores = "log2_cores";
inline constexpr const char* kFreqMhz = "freq_mhz";
inline constexpr const char* kL3Mb = "l3_mb";

struct QuantileLine {
    std::string factor;
    double tau = 0.5;
    double intercept = 0.0;
    double slope = 0.0;  // per month
    MonthIndex window_from;
    MonthIndex window_to;

    double at(double t) const { return intercept + slope * t; }
};

inline double pinball(double residual, double tau) { return residual >= 0.0 ? tau * residual : (tau - 1.0) * residual; }

inline double pinball_loss(std::span<const double> t, std::span<const double> y, double tau, double intercept,
                           double slope) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) s += pinball(y[i] - intercept - slope * t[i], tau);
    return s;
}

namespace detail {

/// Best intercept for a fixed slope: the tau-quantile (order statistic) of y - slope*t.
inline double quantile_intercept(std::span<const double> t, std::span<const double> y, double tau, double slope,
                                 std::vector<double>& scratch) {
    scratch.resize(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) scratch[i] = y[i] - slope * t[i];
    auto k = static_cast<std::size_t>(std::ceil(tau * static_cast<double>(t.size()))) - 1;
    k = std::min(k, t.size() - 1);
    std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k), scratch.end());
    return scratch[k];
}

}  // namespace detail

/// Linear quantile regression of values on time under the pinball loss.
///
/// Profiling out the intercept leaves a convex piecewise-linear function of the
/// slope; every optimal line passes through two data points, so the slope lies
/// within +/- (range of y) / (smallest gap between distinct times). A golden
/// section search over that bracket runs to machine precision.
inline QuantileLine fit_quantile(std::span<const double> times, std::span<const double> values, double tau,
                                 std::string factor = {}) {
    const std::size_t n = times.size();
    if (n != values.size()) throw DataError("times and values differ in length");
    if (!(tau > 0.0 && tau < 1.0)) throw DataError("tau must lie in (0, 1)");
    if (n < 20) throw DataError("quantile fit needs n >= 20, got " + std::to_string(n));
    std::vector<double> ts(times.begin(), times.end());
    std::sort(ts.begin(), ts.end());
    double min_gap = INFINITY;
    for (std::size_t i = 1; i < n; ++i)
        if (ts[i] > ts[i - 1]) min_gap = std::min(min_gap, ts[i] - ts[i - 1]);
    if (!std::isfinite(min_gap)) throw DataError("quantile fit: all times equal");
    auto [ylo, yhi] = std::minmax_element(values.begin(), values.end());

    std::vector<double> scratch;
    auto profile = [&](double s) {
        const double b = detail::quantile_intercept(times, values, tau, s, scratch);
        return pinball_loss(times, values, tau, b, s);
    };
    const double bound = (*yhi - *ylo) / min_gap;
    double lo = -bound, hi = bound;
    if (bound > 0.0) {
        const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
        double a = hi - phi * (hi - lo), b = lo + phi * (hi - lo);
        double fa = profile(a), fb = profile(b);
        for (int it = 0; it < 400 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo) + std::abs(hi)); ++it) {
            if (fa <= fb) {
                hi = b, b = a, fb = fa;
                a = hi - phi * (hi - lo);
                fa = profile(a);
            } else {
                lo = a, a = b, fa = fb;
                b = lo + phi * (hi - lo);
                fb = profile(b);
            }
        }
    }
    double slope = 0.5 * (lo + hi);
    if (profile(0.0) <= profile(slope)) slope = 0.0;

    QuantileLine line;
    line.factor = std::move(factor);
    line.tau = tau;
    line.slope = slope;
    line.intercept = detail::quantile_intercept(times, values, tau, slope, scratch);
    line.window_from = MonthIndex(static_cast<int>(std::floor(ts.front())));
    line.window_to = MonthIndex(static_cast<int>(std::ceil(ts.back())));
    return line;
}

inline const std::vector<double>& default_taus() {
    static const std::vector<double> t{0.25, 0.5, 0.75, 0.95};
    return t;
}

/// Default start of the hardware-trajectory fit window.
inline constexpr MonthIndex kHardwareWindowStart = MonthIndex::from_year_month(2000, 1);

/// Fits log2(cores), frequency and L3 (MB) quantile lines over records dated >= window start.
inline std::vector<QuantileLine> fit_hardware_quantiles(const std::vector<BenchmarkRecord>& records,
                                                        const std::vector<double>& taus = default_taus(),
                                                        MonthIndex from = kHardwareWindowStart) {
    std::vector<double> tc, yc, tf, yf, tl, yl;
    for (const auto& r : records) {
        if (r.date < from) continue;
        const double t = r.date.value;
        if (r.hw.cores) tc.push_back(t), yc.push_back(std::log2(static_cast<double>(*r.hw.cores)));
        if (r.hw.freq_mhz) tf.push_back(t), yf.push_back(*r.hw.freq_mhz);
        if (r.hw.l3_kb) tl.push_back(t), yl.push_back(*r.hw.l3_kb / 1024.0);
    }
    std::vector<QuantileLine> out;
    for (double tau : taus) {
        out.push_back(fit_quantile(tc, yc, tau, kLog2Cores));
        out.push_back(fit_quantile(tf, yf, tau, kFreqMhz));
        out.push_back(fit_quantile(tl, yl, tau, kL3Mb));
    }
    return out;
}

/// factor ("cores", "freq_mhz", "l3_mb") -> tau -> predicted value on the natural scale.
using FactorQuantiles = std::map<std::string, std::map<double, double>>;

/// Evaluates quantile lines at t. Cores come back as 2^(log2 prediction),
/// rounded to a whole count; values are floored at cores >= 1, freq > 0, l3 >= 0.
inline FactorQuantiles predict_factor_quantiles(const std::vector<QuantileLine>& lines, double t,
                                                const std::vector<double>& taus = default_taus()) {
    FactorQuantiles out;
    for (const char* f : {kLog2Cores, kFreqMhz, kL3Mb}) {
        for (double tau : taus) {
            auto it = std::find_if(lines.begin(), lines.end(), [&](const QuantileLine& l) {
                return l.factor == f && std::abs(l.tau - tau) < 1e-12;
            });
            if (it == lines.end())
                throw DataError("no quantile line for factor '" + std::string(f) + "' at tau " + std::to_string(tau));
            const double v = it->at(t);
            if (std::string_view(f) == kLog2Cores)
                out["cores"][tau] = std::max(1.0, std::round(std::exp2(v)));
            else if (std::string_view(f) == kFreqMhz)
                out["freq_mhz"][tau] = std::max(v, 1.0);
            else
                out["l3_mb"][tau] = std::max(v, 0.0);
        }
    }
    return out;
}

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

using Polygon = std::vector<Point2>;

inline double cross(const Point2& o, const Point2& a, const Point2& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

/// Andrew's monotone chain; counter-clockwise, collinear points dropped.
inline Polygon convex_hull(std::vector<Point2> pts) {
    std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    pts.erase(std::unique(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) { return a.x == b.x && a.y == b.y; }),
              pts.end());
    if (pts.size() < 3) return pts;
    Polygon h(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(h[k - 2], h[k - 1], p) <= 0) --k;
        h[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
        h[k++] = pts[i];
    }
    h.resize(k - 1);
    return h;
}

/// True if the polygon has >= 3 vertices and turns consistently.
inline bool is_convex(const Polygon& poly) {
    if (poly.size() < 3) return false;
    int sign = 0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const double c = cross(poly[i], poly[(i + 1) % poly.size()], poly[(i + 2) % poly.size()]);
        if (c == 0.0) continue;
        const int s = c > 0 ? 1 : -1;
        if (sign != 0 && s != sign) return false;
        sign = s;
    }
    return sign != 0;
}

/// Point-in-convex-polygon; the boundary counts as inside.
inline bool contains(const Polygon& poly, Point2 p) {
    if (poly.size() < 3) return false;
    bool pos = false, neg = false;
    double scale = 0.0;
    for (const auto& v : poly) scale = std::max({scale, std::abs(v.x), std::abs(v.y)});
    const double eps = 1e-12 * std::max(1.0, scale * scale);
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const double c = cross(poly[i], poly[(i + 1) % poly.size()], p);
        if (c > eps) pos = true;
        if (c < -eps) neg = true;
        if (pos && neg) return false;
    }
    return true;
}

struct Era {
    MonthIndex from;
    MonthIndex to;  // inclusive
    Polygon freq_cores;  // (freq_mhz, cores)
    Polygon freq_l3;     // (freq_mhz, l3 MB)
};

struct FeasibleRegion {
    double min_cache_per_core_mb = 0.5;
    std::vector<Era> eras;

    const Era& era_at(MonthIndex t) const {
        for (const auto& e : eras)
            if (e.from <= t && t <= e.to) return e;
        throw DataError("no era defined for " + t.str());
    }

    void validate() const {
        if (!(min_cache_per_core_mb > 0.0)) throw DataError("min_cache_per_core_mb must be > 0");
        for (const auto& e : eras) {
            if (e.to < e.from) throw DataError("era " + e.from.str() + " ends before it starts");
            if (!is_convex(e.freq_cores) || !is_convex(e.freq_l3))
                throw DataError("era " + e.from.str() + " polygons must be convex with >= 3 vertices");
        }
    }
};

/// The three eras used for feasibility: 2000-2015, 2016-2020, 2021-2025.
inline std::vector<std::pair<MonthIndex, MonthIndex>> default_era_ranges() {
    return {{MonthIndex::from_year_month(2000, 1), MonthIndex::from_year_month(2015, 12)},
            {MonthIndex::from_year_month(2016, 1), MonthIndex::from_year_month(2020, 12)},
            {MonthIndex::from_year_month(2021, 1), MonthIndex::from_year_month(2025, 12)}};
}

/// Built-in stand-in region for use without data: broad triangular-ish hulls
/// that narrow in frequency as core counts grow.
inline FeasibleRegion builtin_region() {
    FeasibleRegion r;
    const auto ranges = default_era_ranges();
    const Polygon fc[3] = {
        {{500, 1}, {4000, 1}, {4400, 4}, {3000, 24}, {1600, 24}, {500, 2}},
        {{1000, 1}, {4500, 1}, {5000, 8}, {3200, 64}, {1800, 64}, {1000, 8}},
        {{1000, 1}, {5000, 1}, {5800, 16}, {3600, 256}, {1800, 256}, {1000, 16}},
    };
    const Polygon fl[3] = {
        {{500, 0}, {4000, 0}, {4400, 8}, {3000, 64}, {1600, 64}, {500, 8}},
        {{1000, 0}, {4500, 0}, {5000, 32}, {3200, 256}, {1800, 256}, {1000, 32}},
        {{1000, 0}, {5000, 0}, {5800, 64}, {3600, 1024}, {1800, 1024}, {1000, 64}},
    };
    for (int i = 0; i < 3; ++i) r.eras.push_back({ranges[i].first, ranges[i].second, fc[i], fl[i]});
    return r;
}

namespace detail {

inline double percentile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(i);
    return i + 1 < v.size() ? v[i] * (1.0 - frac) + v[i + 1] * frac : v[i];
}

/// Hull of the points whose coordinates both lie within their 1st..99th percentiles.
inline Polygon trimmed_hull(const std::vector<Point2>& pts) {
    if (pts.size() < 3) return {};
    std::vector<double> xs, ys;
    for (const auto& p : pts) xs.push_back(p.x), ys.push_back(p.y);
    const double x0 = percentile(xs, 0.01), x1 = percentile(xs, 0.99);
    const double y0 = percentile(ys, 0.01), y1 = percentile(ys, 0.99);
    std::vector<Point2> kept;
    for (const auto& p : pts)
        if (p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1) kept.push_back(p);
    Polygon h = convex_hull(kept);
    return h.size() >= 3 ? h : Polygon{};
}

}  // namespace detail

/// Era polygons as trimmed convex hulls of the loaded data. Eras without
/// enough data (including future eras) take the hull of all eras' points.
inline FeasibleRegion hull_region(const std::vector<BenchmarkRecord>& records,
                                  const std::vector<std::pair<MonthIndex, MonthIndex>>& ranges = default_era_ranges(),
                                  double min_cache_per_core_mb = 0.5) {
    FeasibleRegion r;
    r.min_cache_per_core_mb = min_cache_per_core_mb;
    std::vector<Point2> all_fc, all_fl;
    std::vector<std::pair<Polygon, Polygon>> per_era;
    for (const auto& [from, to] : ranges) {
        std::vector<Point2> fc, fl;
        for (const auto& rec : records) {
            if (rec.date < from || to < rec.date || !rec.hw.freq_mhz) continue;
            if (rec.hw.cores) fc.push_back({*rec.hw.freq_mhz, static_cast<double>(*rec.hw.cores)});
            if (rec.hw.l3_kb) fl.push_back({*rec.hw.freq_mhz, *rec.hw.l3_kb / 1024.0});
        }
        all_fc.insert(all_fc.end(), fc.begin(), fc.end());
        all_fl.insert(all_fl.end(), fl.begin(), fl.end());
        per_era.emplace_back(detail::trimmed_hull(fc), detail::trimmed_hull(fl));
    }
    const Polygon fallback_fc = convex_hull(all_fc), fallback_fl = convex_hull(all_fl);
    if (fallback_fc.size() < 3 || fallback_fl.size() < 3)
        throw DataError("not enough hardware data to build feasibility polygons");
    for (std::size_t i = 0; i < ranges.size(); ++i) {
        Era e{ranges[i].first, ranges[i].second, per_era[i].first, per_era[i].second};
        if (e.freq_cores.empty()) e.freq_cores = fallback_fc;
        if (e.freq_l3.empty()) e.freq_l3 = fallback_fl;
        r.eras.push_back(std::move(e));
    }
    return r;
}

/// Cache-per-core rule plus both era polygons.
inline bool is_feasible(const HardwareConfig& c, const FeasibleRegion& region, MonthIndex t) {
    const Era& era = region.era_at(t);
    if (c.l3_mb() / static_cast<double>(c.cores) < region.min_cache_per_core_mb) return false;
    return contains(era.freq_cores, {c.freq_mhz, static_cast<double>(c.cores)}) &&
           contains(era.freq_l3, {c.freq_mhz, c.l3_mb()});
}

inline const std::vector<double>& thread_options() {
    static const std::vector<double> v{1.0, 2.0};
    return v;
}

/// Feasible members of the Cartesian product of per-factor quantile values and
/// threads-per-core {1, 2}, sorted by (cores, freq, l3, threads).
inline std::vector<HardwareConfig> enumerate_configs(const FactorQuantiles& q, const FeasibleRegion& region,
                                                     MonthIndex t) {
    auto values = [&](const char* f) {
        auto it = q.find(f);
        if (it == q.end() || it->second.empty()) throw DataError("missing quantile predictions for '" + std::string(f) + "'");
        std::set<double> s;
        for (const auto& [_, v] : it->second) s.insert(v);
        return s;
    };
    const auto cores = values("cores"), freq = values("freq_mhz"), l3 = values("l3_mb");
    std::vector<HardwareConfig> out;
    for (double c : cores)
        for (double f : freq)
            for (double l : l3)
                for (double th : thread_options()) {
                    HardwareConfig cfg;
                    cfg.cores = static_cast<int>(c);
                    cfg.freq_mhz = f;
                    cfg.l3_kb = l * 1024.0;
                    cfg.threads_per_core = th;
                    if (is_feasible(cfg, region, t)) out.push_back(cfg);
                }
    if (out.empty()) throw DataError("no feasible configurations at " + t.str());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace perfcast
