#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "perfcast/error.hpp"
#include "perfcast/records.hpp"
#include "perfcast/trend.hpp"

namespace perfcast {

/// GP input columns, in order.
inline constexpr std::array<const char*, 4> kGpColumns{"cores", "freq_mhz", "l3_kb", "threads_per_core"};

inline Eigen::RowVectorXd config_row(const HardwareConfig& c) {
    Eigen::RowVectorXd r(4);
    r << static_cast<double>(c.cores), c.freq_mhz, c.l3_kb, c.threads_per_core;
    return r;
}

/// Hardware factors and trend residuals log(score) - f(t) for one suite.
struct ResidualDataset {
    Eigen::MatrixXd x;  // n x 4, columns kGpColumns
    Eigen::VectorXd y;
    std::vector<std::string> record_ids;
    std::vector<MonthIndex> dates;
    std::size_t dropped = 0;  // rows lacking a factor or a score
};

inline ResidualDataset build_residuals(const std::vector<BenchmarkRecord>& records, const TrendModel& trend,
                                       Suite suite = Suite::Spec2017) {
    std::vector<const BenchmarkRecord*> rows;
    ResidualDataset d;
    for (const auto& r : records) {
        if (r.suite != suite) continue;
        if (!r.modeling_score() || !r.complete_config()) {
            ++d.dropped;
            continue;
        }
        rows.push_back(&r);
    }
    const auto n = static_cast<Eigen::Index>(rows.size());
    if (n < static_cast<Eigen::Index>(kGpColumns.size()) + 2)
        throw DataError("GP needs >= " + std::to_string(kGpColumns.size() + 2) + " complete records, found " +
                        std::to_string(n));
    d.x.resize(n, static_cast<Eigen::Index>(kGpColumns.size()));
    d.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto* r = rows[static_cast<std::size_t>(i)];
        d.x.row(i) = config_row(*r->complete_config());
        d.y(i) = std::log(*r->modeling_score()) - trend_mean(trend, r->date.value);
        d.record_ids.push_back(r->record_id);
        d.dates.push_back(r->date);
    }
    return d;
}

struct Standardization {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd sd;

    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
        return (x.rowwise() - mean).array().rowwise() / sd.array();
    }
    Eigen::MatrixXd invert(const Eigen::MatrixXd& z) const {
        return (z.array().rowwise() * sd.array()).matrix().rowwise() + mean;
    }
};

/// Per-column mean and sample SD; a constant column raises DataError naming it.
inline Standardization fit_standardization(const Eigen::MatrixXd& x) {
    Standardization s;
    s.mean = x.colwise().mean();
    s.sd.resize(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double ss = (x.col(j).array() - s.mean(j)).square().sum();
        s.sd(j) = std::sqrt(ss / static_cast<double>(std::max<Eigen::Index>(x.rows() - 1, 1)));
        if (!(s.sd(j) > 0.0)) {
            std::string name = j < static_cast<Eigen::Index>(kGpColumns.size()) ? kGpColumns[j] : std::to_string(j);
            throw DataError("constant GP input column '" + name + "'");
        }
    }
    return s;
}

/// Isotropic Gaussian kernel exp(-|a - b|^2 / theta) between the rows of a and b.
inline Eigen::MatrixXd gaussian_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double theta) {
    Eigen::MatrixXd k(a.rows(), b.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < b.rows(); ++j) k(i, j) = std::exp(-(a.row(i) - b.row(j)).squaredNorm() / theta);
    return k;
}

inline constexpr double kMinNugget = 1e-8;
inline constexpr double kMinTau2 = 1e-300;

/// Zero-mean GP on standardized hardware factors with the scale profiled out.
struct GpModel {
    Standardization standardization;
    double theta = 1.0;
    double tau2 = 1.0;
    double g = kMinNugget;
    Eigen::MatrixXd x;   // raw training inputs
    Eigen::MatrixXd xs;  // standardized training inputs
    Eigen::VectorXd y;
    Eigen::LLT<Eigen::MatrixXd> chol;  // of C + g I
    Eigen::VectorXd weights;           // (C + g I)^-1 y
    double log_likelihood = 0.0;       // concentrated, up to a constant
    Eigen::RowVectorXd x_min, x_max;   // training support, for extrapolation checks
};

/// -n/2 log(y' K^-1 y / n) - 1/2 log|K|, with K = C + g I. nullopt if K is not positive definite.
inline std::optional<double> concentrated_log_likelihood(const Eigen::MatrixXd& xs, const Eigen::VectorXd& y,
                                                         double theta, double g) {
    Eigen::MatrixXd k = gaussian_kernel(xs, xs, theta);
    k.diagonal().array() += g;
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() != Eigen::Success) return std::nullopt;
    const double n = static_cast<double>(y.size());
    const double quad = y.dot(llt.solve(y));
    if (!(quad > 0.0)) return std::nullopt;
    const Eigen::MatrixXd l = llt.matrixL();
    const double half_logdet = l.diagonal().array().log().sum();
    return -0.5 * n * std::log(quad / n) - half_logdet;
}

/// Conditions the GP on data at fixed (theta, g); tau2 takes its closed-form estimate.
inline GpModel condition_gp(const ResidualDataset& data, double theta, double g) {
    if (!(theta > 0.0)) throw DataError("GP lengthscale must be > 0");
    if (!(g >= 0.0)) throw DataError("GP nugget must be >= 0");
    if (data.x.rows() != data.y.size()) throw DataError("GP inputs and targets differ in length");
    GpModel m;
    m.standardization = fit_standardization(data.x);
    m.theta = theta;
    m.g = g;
    m.x = data.x;
    m.xs = m.standardization.apply(data.x);
    m.y = data.y;
    m.x_min = data.x.colwise().minCoeff();
    m.x_max = data.x.colwise().maxCoeff();
    Eigen::MatrixXd k = gaussian_kernel(m.xs, m.xs, theta);
    k.diagonal().array() += g;
    m.chol.compute(k);
    if (m.chol.info() != Eigen::Success)
        throw FitError("GP kernel matrix not positive definite (theta " + std::to_string(theta) + ", g " +
                       std::to_string(g) + ")");
    m.weights = m.chol.solve(m.y);
    const double n = static_cast<double>(m.y.size());
    m.tau2 = std::max(m.y.dot(m.weights) / n, kMinTau2);
    const Eigen::MatrixXd l = m.chol.matrixL();
    m.log_likelihood = -0.5 * n * std::log(m.tau2) - l.diagonal().array().log().sum();
    return m;
}

struct GpFitOptions {
    std::uint64_t seed = 20170801;
    int starts = 5;
    double log_theta_min = -6.0, log_theta_max = 6.0;
    double log_g_min = -18.0, log_g_max = 0.0;
    int max_iterations = 300;
};

class GpFitError : public FitError {
public:
    GpFitError(const std::string& what, double theta, double g) : FitError(what), theta_(theta), g_(g) {}
    double theta() const { return theta_; }
    double g() const { return g_; }

private:
    double theta_, g_;
};

namespace detail {

/// Nelder-Mead maximization in (log theta, log g), clamped to the search box.
template <typename Objective>
std::pair<Eigen::Vector2d, double> nelder_mead_max(Objective&& f, Eigen::Vector2d start, const Eigen::Vector2d& lo,
                                                   const Eigen::Vector2d& hi, int max_iter) {
    auto clamp = [&](Eigen::Vector2d p) { return p.cwiseMax(lo).cwiseMin(hi).eval(); };
    auto value = [&](const Eigen::Vector2d& p) {
        double v = f(p);
        return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();  // minimize -f
    };
    std::array<Eigen::Vector2d, 3> s{clamp(start), clamp(start + Eigen::Vector2d(1.0, 0.0)),
                                     clamp(start + Eigen::Vector2d(0.0, 1.0))};
    for (int i = 1; i < 3; ++i)
        if ((s[i] - s[0]).norm() < 1e-9) s[i] = clamp(start - Eigen::Vector2d(i == 1, i == 2));
    std::array<double, 3> fv{value(s[0]), value(s[1]), value(s[2])};
    for (int it = 0; it < max_iter; ++it) {
        std::array<int, 3> idx{0, 1, 2};
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fv[a] < fv[b]; });
        const int b = idx[0], m = idx[1], w = idx[2];
        if (std::isfinite(fv[w]) && std::abs(fv[w] - fv[b]) <= 1e-10 * (1.0 + std::abs(fv[b])) &&
            (s[w] - s[b]).norm() < 1e-6)
            break;
        const Eigen::Vector2d c = 0.5 * (s[b] + s[m]);
        const Eigen::Vector2d r = clamp(c + (c - s[w]));
        const double fr = value(r);
        if (fr < fv[b]) {
            const Eigen::Vector2d e = clamp(c + 2.0 * (c - s[w]));
            const double fe = value(e);
            if (fe < fr) s[w] = e, fv[w] = fe;
            else s[w] = r, fv[w] = fr;
        } else if (fr < fv[m]) {
            s[w] = r, fv[w] = fr;
        } else {
            const Eigen::Vector2d k = clamp(fr < fv[w] ? c + 0.5 * (r - c) : c + 0.5 * (s[w] - c));
            const double fk = value(k);
            if (fk < std::min(fr, fv[w])) {
                s[w] = k, fv[w] = fk;
            } else {
                for (int j : {m, w}) s[j] = clamp(s[b] + 0.5 * (s[j] - s[b])), fv[j] = value(s[j]);
            }
        }
    }
    int best = 0;
    for (int i = 1; i < 3; ++i)
        if (fv[i] < fv[best]) best = i;
    return {s[best], -fv[best]};
}

}  // namespace detail

/// Maximum-likelihood (theta, g) by multistart Nelder-Mead, then conditions the model.
///
/// The first start sits at the centre of the box; the others are drawn from
/// the seed, so the fit is deterministic.
inline GpModel fit_gp(const ResidualDataset& data, const GpFitOptions& opt = {}) {
    const Standardization st = fit_standardization(data.x);
    const Eigen::MatrixXd xs = st.apply(data.x);
    if (data.y.squaredNorm() == 0.0) return condition_gp(data, 1.0, kMinNugget);

    const double log_g_floor = std::max(opt.log_g_min, std::log(kMinNugget));
    const Eigen::Vector2d lo(opt.log_theta_min, log_g_floor), hi(opt.log_theta_max, opt.log_g_max);
    auto objective = [&](const Eigen::Vector2d& p) {
        auto ll = concentrated_log_likelihood(xs, data.y, std::exp(p(0)), std::exp(p(1)));
        return ll ? *ll : -std::numeric_limits<double>::infinity();
    };
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> ut(lo(0), hi(0)), ug(lo(1), hi(1));
    Eigen::Vector2d best_p = 0.5 * (lo + hi);
    double best = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < std::max(opt.starts, 1); ++s) {
        Eigen::Vector2d start = s == 0 ? Eigen::Vector2d(0.5 * (lo + hi)) : Eigen::Vector2d(ut(rng), ug(rng));
        auto [p, v] = detail::nelder_mead_max(objective, start, lo, hi, opt.max_iterations);
        if (v > best) best = v, best_p = p;
    }
    if (!std::isfinite(best))
        throw GpFitError("GP hyperparameter search failed: no positive-definite kernel found", std::exp(best_p(0)),
                         std::exp(best_p(1)));
    return condition_gp(data, std::exp(best_p(0)), std::exp(best_p(1)));
}

struct GpPrediction {
    double mean = 0.0;
    double variance = 0.0;
};

/// Conditional mean k' K^-1 y and variance tau2 (1 - k' K^-1 k) at a raw input row.
/// The nugget sits on the training diagonal only.
inline GpPrediction gp_predict(const GpModel& m, const Eigen::RowVectorXd& raw) {
    const Eigen::MatrixXd z = m.standardization.apply(raw);
    const Eigen::VectorXd k = gaussian_kernel(m.xs, z, m.theta).col(0);
    GpPrediction p;
    p.mean = k.dot(m.weights);
    const double reduction = k.dot(m.chol.solve(k));
    p.variance = std::max(0.0, m.tau2 * (1.0 - reduction));
    return p;
}

inline GpPrediction gp_predict(const GpModel& m, const HardwareConfig& c) { return gp_predict(m, config_row(c)); }

/// True when any coordinate lies outside the training range.
inline bool is_extrapolation(const GpModel& m, const HardwareConfig& c) {
    const Eigen::RowVectorXd r = config_row(c);
    return (r.array() < m.x_min.array()).any() || (r.array() > m.x_max.array()).any();
}

struct HoldoutResult {
    double rmse = 0.0;
    std::vector<std::pair<double, double>> pairs;  // (predicted, observed) log score
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    MonthIndex split_date;  // first date of the test side
    GpModel model;
};

/// Fits on the earliest `train_fraction` of records by date and predicts the rest.
inline HoldoutResult holdout_validate(const std::vector<BenchmarkRecord>& records, const TrendModel& trend,
                                      double train_fraction = 0.2, Suite suite = Suite::Spec2017,
                                      const GpFitOptions& opt = {}) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw DataError("train fraction must lie in (0, 1)");
    ResidualDataset all = build_residuals(records, trend, suite);
    const auto n = static_cast<std::size_t>(all.y.size());
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::tie(all.dates[a], all.record_ids[a]) < std::tie(all.dates[b], all.record_ids[b]);
    });
    const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n)));
    if (n_train < kGpColumns.size() + 2 || n_train >= n)
        throw DataError("holdout split leaves an empty or too-small side (" + std::to_string(n_train) + " train of " +
                        std::to_string(n) + ")");

    ResidualDataset train;
    train.x.resize(static_cast<Eigen::Index>(n_train), all.x.cols());
    train.y.resize(static_cast<Eigen::Index>(n_train));
    for (std::size_t i = 0; i < n_train; ++i) {
        const auto src = static_cast<Eigen::Index>(order[i]);
        train.x.row(static_cast<Eigen::Index>(i)) = all.x.row(src);
        train.y(static_cast<Eigen::Index>(i)) = all.y(src);
        train.record_ids.push_back(all.record_ids[order[i]]);
        train.dates.push_back(all.dates[order[i]]);
    }

    HoldoutResult res;
    res.model = fit_gp(train, opt);
    res.n_train = n_train;
    res.n_test = n - n_train;
    res.split_date = all.dates[order[n_train]];
    double ss = 0.0;
    for (std::size_t i = n_train; i < n; ++i) {
        const auto src = static_cast<Eigen::Index>(order[i]);
        const double f = trend_mean(trend, all.dates[order[i]].value);
        const double observed = all.y(src) + f;
        const double predicted = f + gp_predict(res.model, Eigen::RowVectorXd(all.x.row(src))).mean;
        res.pairs.emplace_back(predicted, observed);
        ss += (predicted - observed) * (predicted - observed);
    }
    res.rmse = std::sqrt(ss / static_cast<double>(res.n_test));
    return res;
}

}  // namespace perfcast
