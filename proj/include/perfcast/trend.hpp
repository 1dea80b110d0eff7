#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "perfcast/error.hpp"
#include "perfcast/month.hpp"
#include "perfcast/stats.hpp"

namespace perfcast {

/// Power-law mean trend of log score in months: log y = alpha * t^beta + gamma + N(0, sigma2).
struct TrendModel {
    double alpha = 0.0;
    double beta = 1.0;
    double gamma = 0.0;
    double sigma2 = 0.0;                            // MLE noise variance, RSS / n
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();  // Var(theta-hat), order (alpha, beta, gamma)
    MonthIndex t_origin{0};
    std::size_t n = 0;
    int iterations = 0;

    Eigen::Vector3d theta() const { return {alpha, beta, gamma}; }
};

/// t^beta with 0^beta = 0.
inline double power_term(double t, double beta) { return t > 0.0 ? std::pow(t, beta) : 0.0; }

/// Gradient of the mean function with respect to (alpha, beta, gamma); (0, 0, 1) at t = 0.
inline Eigen::Vector3d trend_gradient(double alpha, double beta, double t) {
    const double tb = power_term(t, beta);
    return {tb, t > 0.0 ? alpha * tb * std::log(t) : 0.0, 1.0};
}

inline double trend_mean(const TrendModel& m, double t) {
    if (t < 0.0) throw DataError("trend evaluated before the time origin");
    return m.alpha * power_term(t, m.beta) + m.gamma;
}

/// Delta-method variance of the fitted mean: g' Var(theta) g.
inline double trend_variance(const TrendModel& m, double t) {
    if (t < 0.0) throw DataError("trend evaluated before the time origin");
    Eigen::Vector3d g = trend_gradient(m.alpha, m.beta, t);
    return std::max(0.0, g.dot(m.cov * g));
}

/// mean -/+ z * sqrt(Var[mean] + sigma2), in log-score units.
inline std::pair<double, double> prediction_interval(const TrendModel& m, double t, double level = 0.95) {
    if (!(level > 0.0 && level < 1.0)) throw DataError("interval level must lie in (0, 1)");
    const double mu = trend_mean(m, t);
    const double half = stats::two_sided_z(level) * std::sqrt(trend_variance(m, t) + m.sigma2);
    return {mu - half, mu + half};
}

class TrendFitError : public FitError {
public:
    TrendFitError(const std::string& what, Eigen::Vector3d last) : FitError(what), last_(last) {}
    const Eigen::Vector3d& last_iterate() const { return last_; }

private:
    Eigen::Vector3d last_;
};

struct TrendFitOptions {
    int max_iterations = 500;
    double relative_tolerance = 1e-10;
};

namespace detail {

inline double trend_rss(std::span<const double> t, std::span<const double> y, const Eigen::Vector3d& th) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double r = y[i] - (th(0) * power_term(t[i], th(1)) + th(2));
        s += r * r;
    }
    return s;
}

/// Grid over beta with gamma0 = min(y) - 0.1 and alpha0 from a no-intercept regression.
inline Eigen::Vector3d trend_start(std::span<const double> t, std::span<const double> y) {
    const double gamma0 = *std::min_element(y.begin(), y.end()) - 0.1;
    Eigen::Vector3d best(1.0, 0.5, gamma0);
    double best_rss = INFINITY;
    for (int k = 1; k <= 9; ++k) {
        const double b = 0.1 * k;
        double su = 0.0, szu = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double u = power_term(t[i], b);
            su += u * u;
            szu += (y[i] - gamma0) * u;
        }
        if (su <= 0.0) continue;
        Eigen::Vector3d cand(szu / su, b, gamma0);
        const double rss = trend_rss(t, y, cand);
        if (rss < best_rss) best_rss = rss, best = cand;
    }
    return best;
}

}  // namespace detail

/// Maximum-likelihood fit of the power-law trend (damped Gauss-Newton / Levenberg-Marquardt).
inline TrendModel fit_trend(std::span<const double> times, std::span<const double> log_scores,
                            const TrendFitOptions& opt = {}) {
    const std::size_t n = times.size();
    if (n != log_scores.size()) throw DataError("times and scores differ in length");
    if (n < 10) throw DataError("trend fit: n >= 10 required, got " + std::to_string(n));
    std::set<double> distinct;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(times[i] >= 0.0) || !std::isfinite(times[i])) throw DataError("trend fit: times must be >= 0");
        if (!std::isfinite(log_scores[i])) throw DataError("trend fit: non-finite log score");
        distinct.insert(times[i]);
    }
    if (distinct.size() == 1) throw DataError("trend fit: all times identical");
    if (distinct.size() < 3) throw DataError("trend fit: at least 3 distinct times required");

    Eigen::Vector3d theta = detail::trend_start(times, log_scores);
    double rss = detail::trend_rss(times, log_scores, theta);
    double scale = 0.0;
    for (double v : log_scores) scale += v * v;

    Eigen::MatrixXd jac(n, 3);
    Eigen::VectorXd resid(n);
    auto linearize = [&](const Eigen::Vector3d& th) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = static_cast<Eigen::Index>(i);
            jac.row(row) = trend_gradient(th(0), th(1), times[i]).transpose();
            resid(row) = log_scores[i] - (th(0) * power_term(times[i], th(1)) + th(2));
        }
    };

    double lambda = 1e-3;
    bool converged = false;
    int iter = 0;
    for (; iter < opt.max_iterations && !converged; ++iter) {
        linearize(theta);
        const Eigen::Matrix3d jtj = jac.transpose() * jac;
        const Eigen::Vector3d jtr = jac.transpose() * resid;
        const double dmax = jtj.diagonal().maxCoeff();
        bool accepted = false;
        while (!accepted) {
            Eigen::Matrix3d damped = jtj;
            for (int d = 0; d < 3; ++d) damped(d, d) += lambda * std::max(jtj(d, d), 1e-12 * dmax);
            const Eigen::Vector3d step = damped.ldlt().solve(jtr);
            const Eigen::Vector3d cand = theta + step;
            const double cand_rss =
                (cand.allFinite() && cand(1) > 0.0) ? detail::trend_rss(times, log_scores, cand) : INFINITY;
            if (cand_rss < rss) {
                const double rel = (rss - cand_rss) / std::max(rss, 1e-300);
                theta = cand;
                rss = cand_rss;
                lambda = std::max(lambda / 10.0, 1e-15);
                accepted = true;
                if (rel < opt.relative_tolerance || rss <= 1e-28 * std::max(scale, 1.0) ||
                    step.norm() <= 1e-15 * (theta.norm() + 1e-15))
                    converged = true;
            } else {
                lambda *= 10.0;
                if (lambda > 1e20) {  // no descent direction left: at a minimum
                    converged = true;
                    break;
                }
            }
        }
    }
    if (!converged)
        throw TrendFitError("trend fit did not converge in " + std::to_string(opt.max_iterations) + " iterations",
                            theta);

    TrendModel m;
    m.alpha = theta(0);
    m.beta = theta(1);
    m.gamma = theta(2);
    m.n = n;
    m.iterations = iter;
    m.sigma2 = rss / static_cast<double>(n);
    linearize(theta);
    const Eigen::Matrix3d jtj = jac.transpose() * jac;
    Eigen::FullPivLU<Eigen::Matrix3d> lu(jtj);
    if (!lu.isInvertible()) throw FitError("trend fit: singular information matrix");
    m.cov = m.sigma2 * lu.inverse();
    m.cov = 0.5 * (m.cov + m.cov.transpose()).eval();
    return m;
}

inline TrendModel fit_trend(std::span<const MonthIndex> months, std::span<const double> log_scores,
                            const TrendFitOptions& opt = {}) {
    std::vector<double> t;
    t.reserve(months.size());
    for (auto m : months) t.push_back(m.value);
    return fit_trend(std::span<const double>(t), log_scores, opt);
}

enum class DoublingRounding {
    // Each doubling is measured from the previous tabulated month (truncated to its month).
    ChainedMonth,
    // t_k = (t_start^beta + k ln2 / alpha)^(1/beta), each rounded to the nearest month.
    ClosedFormNearest,
};

struct DoublingEntry {
    MonthIndex date;
    int gap = 0;              // months since the previous entry (0 for the start row)
    double exact_time = 0.0;  // unrounded solution in months
};

/// Successive times at which the fitted mean score doubles (log score up by ln 2).
inline std::vector<DoublingEntry> doubling_times(const TrendModel& m, MonthIndex t_start, int horizon,
                                                 DoublingRounding rounding = DoublingRounding::ChainedMonth) {
    if (!(m.alpha > 0.0) || !(m.beta > 0.0)) throw DataError("no doubling under fitted trend (alpha, beta must be > 0)");
    if (horizon < 0) throw DataError("horizon must be >= 0");
    const double step = std::numbers::ln2 / m.alpha;
    const double inv_beta = 1.0 / m.beta;
    const int end = t_start.value + horizon;

    std::vector<DoublingEntry> out{{t_start, 0, static_cast<double>(t_start.value)}};
    for (int k = 1;; ++k) {
        double exact;
        int month;
        if (rounding == DoublingRounding::ClosedFormNearest) {
            exact = std::pow(power_term(t_start.value, m.beta) + k * step, inv_beta);
            month = static_cast<int>(std::lround(exact));
        } else {
            exact = std::pow(power_term(out.back().date.value, m.beta) + step, inv_beta);
            month = static_cast<int>(std::floor(exact + 1e-9));
            if (month <= out.back().date.value)
                throw DataError("doubling time under one month; use closed-form rounding");
        }
        if (!std::isfinite(exact) || month > end) break;
        out.push_back({MonthIndex(month), month - out.back().date.value, exact});
    }
    return out;
}

}  // namespace perfcast
