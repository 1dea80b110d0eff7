#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "perfcast/error.hpp"

namespace perfcast::stats {

/// Standard-normal quantile.
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DataError("quantile level must lie in (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

/// z such that [-z, z] has the given central coverage (1.959964 for 0.95).
inline double two_sided_z(double level) { return normal_quantile(0.5 + level / 2.0); }

inline constexpr double kZ95 = 1.959963984540054;

/// Two-sided p-value for a t statistic: normal approximation when dof > 200, Student-t otherwise.
inline double two_sided_p(double t_value, double dof) {
    if (!std::isfinite(t_value)) return 0.0;
    double a = std::abs(t_value);
    if (dof > 200.0) return 2.0 * boost::math::cdf(boost::math::complement(boost::math::normal_distribution<double>(), a));
    return 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t_distribution<double>(dof), a));
}

inline double mean(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

/// Sample variance (n - 1 denominator); 0 for a single value.
inline double variance(std::span<const double> x) {
    if (x.size() < 2) return 0.0;
    double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
}

/// Pearson correlation; nullopt when either series has zero variance.
inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) return std::nullopt;
    auto flat = [](std::span<const double> v) {
        return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
    };
    if (flat(x) || flat(y)) return std::nullopt;
    double mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
    double r = sxy / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

struct Coefficient {
    std::string name;
    double estimate = 0.0;
    double se = 0.0;
    double t_value = 0.0;
    double p_value = 1.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
};

struct OlsFit {
    std::vector<Coefficient> coefficients;
    Eigen::VectorXd beta;
    Eigen::MatrixXd covariance;     // residual_variance * (X'X)^-1
    double residual_variance = 0.0;  // RSS / (n - p)
    double rss = 0.0;
    std::size_t n = 0;
};

/// Ordinary least squares via Householder QR.
///
/// Columns of `design` are named by `names`. A column that adds no rank over
/// the ones before it raises DataError naming that column.
inline OlsFit ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, const std::vector<std::string>& names) {
    const auto n = design.rows();
    const auto p = design.cols();
    if (static_cast<std::size_t>(p) != names.size()) throw DataError("design/name size mismatch");
    if (n <= p) throw DataError("need more observations (" + std::to_string(n) + ") than coefficients (" +
                                std::to_string(p) + ")");

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> full(design);
    if (full.rank() < p) {
        for (Eigen::Index k = 1; k <= p; ++k) {
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> partial(design.leftCols(k));
            if (partial.rank() < k) throw DataError("rank-deficient design: column '" + names[k - 1] + "'");
        }
    }

    Eigen::HouseholderQR<Eigen::MatrixXd> qr(design);
    OlsFit fit;
    fit.n = static_cast<std::size_t>(n);
    fit.beta = qr.solve(y);
    Eigen::VectorXd resid = y - design * fit.beta;
    fit.rss = resid.squaredNorm();
    const double dof = static_cast<double>(n - p);
    fit.residual_variance = fit.rss / dof;

    Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
    Eigen::MatrixXd r_inv = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
    fit.covariance = fit.residual_variance * (r_inv * r_inv.transpose());

    for (Eigen::Index j = 0; j < p; ++j) {
        Coefficient c;
        c.name = names[j];
        c.estimate = fit.beta(j);
        c.se = std::sqrt(std::max(0.0, fit.covariance(j, j)));
        c.t_value = c.se > 0.0 ? c.estimate / c.se : (c.estimate == 0.0 ? 0.0 : INFINITY);
        c.p_value = two_sided_p(c.t_value, dof);
        c.ci_lo = c.estimate - kZ95 * c.se;
        c.ci_hi = c.estimate + kZ95 * c.se;
        fit.coefficients.push_back(c);
    }
    return fit;
}

}  // namespace perfcast::stats
