#include <cmath>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace perfcast;

namespace {

TrendModel published_trend() {
    TrendModel m;
    m.alpha = 2.69;
    m.beta = 0.25;
    m.gamma = -9.14;
    return m;
}

}  // namespace

TEST(TrendGradient, MatchesFiniteDifferences) {
    const double h = 1e-6;
    for (double t : {1.0, 7.0, 48.0, 250.0}) {
        for (Eigen::Vector3d th : {Eigen::Vector3d(2.69, 0.25, -9.14), Eigen::Vector3d(0.3, 0.9, 1.0)}) {
            auto f = [&](const Eigen::Vector3d& p) { return p(0) * std::pow(t, p(1)) + p(2); };
            const Eigen::Vector3d g = trend_gradient(th(0), th(1), t);
            for (int j = 0; j < 3; ++j) {
                Eigen::Vector3d up = th, dn = th;
                up(j) += h;
                dn(j) -= h;
                EXPECT_NEAR(g(j), (f(up) - f(dn)) / (2 * h), 1e-6 * std::max(1.0, std::abs(g(j))));
            }
        }
    }
}

TEST(TrendGradient, ZeroTimeIsInterceptOnly) {
    const Eigen::Vector3d g = trend_gradient(2.69, 0.25, 0.0);
    EXPECT_EQ(g, Eigen::Vector3d(0, 0, 1));
    auto m = published_trend();
    EXPECT_EQ(trend_mean(m, 0.0), m.gamma);
}

TEST(FitTrend, ZeroNoiseRecovery) {
    auto s = testing_support::trend_sample(2.69, 0.25, -9.14, 0.0, 400, 1);
    auto m = fit_trend(std::span<const double>(s.t), std::span<const double>(s.y));
    EXPECT_NEAR(m.alpha, 2.69, 1e-6);
    EXPECT_NEAR(m.beta, 0.25, 1e-6);
    EXPECT_NEAR(m.gamma, -9.14, 1e-6);
    EXPECT_LT(m.sigma2, 1e-12);
}

TEST(FitTrend, ZeroNoiseOtherShapes) {
    for (auto [a, b, g] : {std::tuple{0.05, 0.8, 1.0}, std::tuple{1.0, 0.5, -3.0}, std::tuple{4.0, 0.15, -12.0}}) {
        auto s = testing_support::trend_sample(a, b, g, 0.0, 200, 2);
        auto m = fit_trend(std::span<const double>(s.t), std::span<const double>(s.y));
        EXPECT_NEAR(m.alpha, a, 1e-6 * std::max(1.0, a));
        EXPECT_NEAR(m.beta, b, 1e-6);
        EXPECT_NEAR(m.gamma, g, 1e-6 * std::max(1.0, std::abs(g)));
    }
}

TEST(FitTrend, SigmaIsMleAndCovarianceIsGaussNewton) {
    auto s = testing_support::trend_sample(2.69, 0.25, -9.14, 0.3, 800, 3);
    auto m = fit_trend(std::span<const double>(s.t), std::span<const double>(s.y));
    double rss = 0.0;
    Eigen::MatrixXd j(s.t.size(), 3);
    for (std::size_t i = 0; i < s.t.size(); ++i) {
        const double r = s.y[i] - trend_mean(m, s.t[i]);
        rss += r * r;
        j.row(static_cast<Eigen::Index>(i)) = trend_gradient(m.alpha, m.beta, s.t[i]).transpose();
    }
    EXPECT_NEAR(m.sigma2, rss / s.t.size(), 1e-12);
    const Eigen::Matrix3d cov = m.sigma2 * (j.transpose() * j).inverse();
    EXPECT_LT((cov - m.cov).cwiseAbs().maxCoeff(), 1e-8 * cov.cwiseAbs().maxCoeff());
    // normal equations hold at the optimum
    Eigen::VectorXd resid(s.t.size());
    for (std::size_t i = 0; i < s.t.size(); ++i) resid(static_cast<Eigen::Index>(i)) = s.y[i] - trend_mean(m, s.t[i]);
    EXPECT_LT((j.transpose() * resid).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(FitTrend, Preconditions) {
    std::vector<double> t{1, 2, 3, 4, 5}, y{1, 2, 3, 4, 5};
    try {
        fit_trend(std::span<const double>(t), std::span<const double>(y));
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("n >= 10 required"), std::string::npos);
    }
    std::vector<double> same(12, 40.0), ys(12, 1.0);
    for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = static_cast<double>(i);
    EXPECT_THROW(fit_trend(std::span<const double>(same), std::span<const double>(ys)), DataError);
    std::vector<double> neg{-1, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    EXPECT_THROW(fit_trend(std::span<const double>(neg), std::span<const double>(ys.data(), 10)), DataError);
}

TEST(FitTrend, NonConvergenceReportsLastIterate) {
    auto s = testing_support::trend_sample(2.69, 0.25, -9.14, 0.3, 200, 4);
    TrendFitOptions opt;
    opt.max_iterations = 1;
    try {
        fit_trend(std::span<const double>(s.t), std::span<const double>(s.y), opt);
        FAIL();
    } catch (const TrendFitError& e) {
        EXPECT_TRUE(e.last_iterate().allFinite());
    }
}

TEST(TrendVariance, DeltaMethodQuadraticForm) {
    auto m = published_trend();
    m.cov << 0.04, 0.001, -0.1, 0.001, 0.0004, -0.002, -0.1, -0.002, 0.3;
    for (double t : {0.0, 10.0, 200.0}) {
        const Eigen::Vector3d g = trend_gradient(m.alpha, m.beta, t);
        EXPECT_NEAR(trend_variance(m, t), g.dot(m.cov * g), 1e-15);
    }
    EXPECT_NEAR(trend_variance(m, 0.0), 0.3, 1e-15);
}

TEST(PredictionInterval, UsesNormalQuantile) {
    auto m = published_trend();
    m.sigma2 = 0.09;
    m.cov = Eigen::Matrix3d::Identity() * 1e-4;
    const double t = 100.0;
    auto [lo, hi] = prediction_interval(m, t, 0.95);
    const double half = 1.959963984540054 * std::sqrt(trend_variance(m, t) + 0.09);
    EXPECT_NEAR(lo, trend_mean(m, t) - half, 1e-12);
    EXPECT_NEAR(hi, trend_mean(m, t) + half, 1e-12);
    EXPECT_THROW(prediction_interval(m, t, 1.0), DataError);
}

TEST(Doubling, ClosedFormSolvesDoublingEquation) {
    auto m = published_trend();
    auto rows = doubling_times(m, MonthIndex::parse("1996-04"), 400, DoublingRounding::ClosedFormNearest);
    const double base = m.alpha * std::pow(8.0, m.beta);
    for (std::size_t k = 1; k < rows.size(); ++k) {
        EXPECT_NEAR(m.alpha * std::pow(rows[k].exact_time, m.beta) - base, k * std::log(2.0), 1e-9);
        EXPECT_EQ(rows[k].date.value, std::lround(rows[k].exact_time));
        EXPECT_EQ(rows[k].gap, rows[k].date.value - rows[k - 1].date.value);
    }
}

TEST(Doubling, ChainedGapsOneDoublingApart) {
    auto rows = doubling_times(published_trend(), MonthIndex::parse("1996-04"), 420);
    std::vector<int> gaps;
    for (std::size_t i = 1; i < rows.size(); ++i) gaps.push_back(rows[i].gap);
    const std::vector<int> expected{6, 9, 12, 17, 23, 29, 37, 47, 58, 70, 84};
    EXPECT_EQ(gaps, expected);
    // each step is exactly one doubling from the previous tabulated month
    for (std::size_t k = 1; k < rows.size(); ++k)
        EXPECT_NEAR(2.69 * (std::pow(rows[k].exact_time, 0.25) - std::pow(rows[k - 1].date.value, 0.25)),
                    std::log(2.0), 1e-9);
}

TEST(Doubling, HorizonStopsEnumeration) {
    auto rows = doubling_times(published_trend(), MonthIndex::parse("1996-04"), 14);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1].date.str(), "1996-10");
}

TEST(Doubling, RequiresGrowth) {
    auto m = published_trend();
    m.alpha = -1.0;
    EXPECT_THROW(doubling_times(m, MonthIndex(8), 100), DataError);
    m.alpha = 1.0;
    m.beta = 0.0;
    EXPECT_THROW(doubling_times(m, MonthIndex(8), 100), DataError);
}
