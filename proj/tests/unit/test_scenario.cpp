#include <cmath>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace perfcast;

namespace {

TrendModel known_trend() {
    TrendModel m;
    m.alpha = 2.69, m.beta = 0.25, m.gamma = -9.14, m.sigma2 = 0.09;
    m.cov << 0.04, 0.001, -0.1, 0.001, 0.0004, -0.002, -0.1, -0.002, 0.3;
    return m;
}

std::vector<HardwareConfig> four_configs() {
    return {{8, 2000.0, 8192.0, 1.0}, {16, 2400.0, 16384.0, 2.0}, {24, 2800.0, 32768.0, 1.0},
            {32, 3200.0, 24576.0, 2.0}};
}

// Interpolating GP whose training rows are the candidates themselves.
GpModel gp_through(const std::vector<HardwareConfig>& cfgs, const std::vector<double>& y) {
    ResidualDataset d;
    d.x.resize(static_cast<Eigen::Index>(cfgs.size()), 4);
    d.y.resize(static_cast<Eigen::Index>(cfgs.size()));
    for (std::size_t i = 0; i < cfgs.size(); ++i) {
        d.x.row(static_cast<Eigen::Index>(i)) = config_row(cfgs[i]);
        d.y(static_cast<Eigen::Index>(i)) = y[i];
    }
    return condition_gp(d, 0.2, kMinNugget);
}

std::vector<QuantileLine> flat_lines(double log2_cores_lo, double freq_lo, double l3_lo) {
    std::vector<QuantileLine> lines;
    for (double tau : default_taus()) {
        lines.push_back({kLog2Cores, tau, log2_cores_lo + tau, 0.0, {}, {}});
        lines.push_back({kFreqMhz, tau, freq_lo + 1000 * tau, 0.0, {}, {}});
        lines.push_back({kL3Mb, tau, l3_lo + 32 * tau, 0.0, {}, {}});
    }
    return lines;
}

}  // namespace

TEST(NearestRank, LowerNearestRank) {
    EXPECT_EQ(nearest_rank_index(0.5, 4), 1u);
    EXPECT_EQ(nearest_rank_index(0.25, 4), 0u);
    EXPECT_EQ(nearest_rank_index(0.95, 20), 18u);
    EXPECT_EQ(nearest_rank_index(0.01, 3), 0u);
    EXPECT_EQ(nearest_rank_index(0.99, 3), 2u);
    EXPECT_EQ(nearest_rank_index(0.5, 1), 0u);
    EXPECT_THROW(nearest_rank_index(0.0, 3), DataError);
    EXPECT_THROW(nearest_rank_index(0.5, 0), DataError);
}

TEST(PredictIndividual, SumsTrendAndGp) {
    const auto cfgs = four_configs();
    const auto gp = gp_through(cfgs, {0.3, -0.1, 0.5, 0.0});
    const auto trend = known_trend();
    HardwareConfig x{12, 2200.0, 12000.0, 2.0};
    auto p = predict_individual(trend, gp, 270.0, x);
    const auto r = gp_predict(gp, x);
    EXPECT_DOUBLE_EQ(p.mean_log, trend_mean(trend, 270.0) + r.mean);
    EXPECT_DOUBLE_EQ(p.variance, trend_variance(trend, 270.0) + r.variance);
    EXPECT_FALSE(p.extrapolated);
    EXPECT_TRUE(predict_individual(trend, gp, 270.0, HardwareConfig{64, 2200.0, 12000.0, 2.0}).extrapolated);
    EXPECT_THROW(predict_individual(trend, gp, -1.0, x), DataError);
}

TEST(SelectQuantile, SingleConfig) {
    const auto cfgs = four_configs();
    const auto gp = gp_through(cfgs, {0.3, -0.1, 0.5, 0.0});
    const auto trend = known_trend();
    const MonthIndex t = MonthIndex::from_year_month(2019, 1);
    for (double q : {0.05, 0.5, 0.95}) {
        auto b = select_quantile_config(trend, gp, t, {cfgs[2]}, q);
        EXPECT_EQ(b.config, cfgs[2]);
        EXPECT_NEAR(b.mean_log_score, trend_mean(trend, t.value) + 0.5, 1e-6);
        EXPECT_EQ(b.n_candidates, 1u);
    }
}

TEST(SelectQuantile, FourConfigsAnalytic) {
    const auto cfgs = four_configs();
    const auto gp = gp_through(cfgs, {0.3, -0.1, 0.5, 0.0});
    const auto trend = known_trend();
    const MonthIndex t = MonthIndex::from_year_month(2019, 1);
    const double f = trend_mean(trend, t.value);
    // sorted residuals: -0.1 (cfg1), 0.0 (cfg3), 0.3 (cfg0), 0.5 (cfg2)
    struct Case {
        double q;
        std::size_t cfg;
        double resid;
    };
    for (auto c : {Case{0.25, 1, -0.1}, Case{0.5, 3, 0.0}, Case{0.75, 0, 0.3}, Case{0.95, 2, 0.5}}) {
        auto b = select_quantile_config(trend, gp, t, cfgs, c.q);
        EXPECT_EQ(b.config, cfgs[c.cfg]) << c.q;
        EXPECT_NEAR(b.mean_log_score, f + c.resid, 1e-6);
        // GP interpolates, so only the trend's own uncertainty remains
        EXPECT_NEAR(b.variance, trend_variance(trend, t.value), 1e-6);
        EXPECT_NEAR(b.hi95 - b.mean_log_score, 1.959963984540054 * std::sqrt(b.variance), 1e-12);
        EXPECT_NEAR(b.mean_log_score - b.lo95, 1.959963984540054 * std::sqrt(b.variance), 1e-12);
        EXPECT_TRUE(b.warnings.empty());
    }
}

TEST(SelectQuantile, TiesGoToFirstInEnumerationOrder) {
    const auto cfgs = four_configs();
    const auto gp = gp_through(cfgs, {0.0, 0.0, 0.0, 0.0});
    std::vector<HardwareConfig> shuffled{cfgs[3], cfgs[1], cfgs[2], cfgs[0]};
    for (double q : {0.1, 0.5, 0.9}) {
        auto b = select_quantile_config(known_trend(), gp, MonthIndex::from_year_month(2019, 1), shuffled, q);
        EXPECT_EQ(b.config, cfgs[0]);
    }
}

TEST(SelectQuantile, EmptyCandidates) {
    const auto gp = gp_through(four_configs(), {0.3, -0.1, 0.5, 0.0});
    EXPECT_THROW(select_quantile_config(known_trend(), gp, MonthIndex(270), {}, 0.5), DataError);
}

TEST(ScenarioBound, MonotoneInQ) {
    const auto cfgs = four_configs();
    const auto gp = gp_through(cfgs, {0.3, -0.1, 0.5, 0.0});
    const auto lines = flat_lines(3.0, 2000.0, 8.0);
    const MonthIndex t = MonthIndex::from_year_month(2019, 6);
    double prev = -INFINITY;
    for (double q : {0.05, 0.25, 0.5, 0.75, 0.95}) {
        auto b = scenario_bound(known_trend(), gp, lines, builtin_region(), t, q);
        EXPECT_GE(b.mean_log_score, prev);
        prev = b.mean_log_score;
        EXPECT_TRUE(is_feasible(b.config, builtin_region(), t));
    }
}

TEST(ScenarioSweep, ContinuesPastFailingCells) {
    const auto gp = gp_through(four_configs(), {0.3, -0.1, 0.5, 0.0});
    const auto lines = flat_lines(3.0, 2000.0, 8.0);
    const std::vector<MonthIndex> times{MonthIndex::from_year_month(2019, 6), MonthIndex::from_year_month(2030, 1),
                                        MonthIndex::from_year_month(2022, 6)};
    auto res = scenario_sweep(known_trend(), gp, lines, builtin_region(), times, {0.25, 0.75});
    ASSERT_EQ(res.rows.size(), 4u);
    ASSERT_EQ(res.errors.size(), 2u);
    EXPECT_EQ(res.errors[0].t.str(), "2030-01");
    EXPECT_NE(res.errors[0].message.find("no era"), std::string::npos);
    EXPECT_EQ(res.rows[0].t.str(), "2019-06");
    EXPECT_EQ(res.rows[3].t.str(), "2022-06");
    EXPECT_EQ(res.rows[3].q, 0.75);
}

TEST(ScenarioSweep, CsvIsByteStable) {
    const auto gp = gp_through(four_configs(), {0.3, -0.1, 0.5, 0.0});
    const auto lines = flat_lines(3.0, 2000.0, 8.0);
    const std::vector<MonthIndex> times{MonthIndex::from_year_month(2018, 1), MonthIndex::from_year_month(2020, 1)};
    const std::string a = io::sweep_csv(scenario_sweep(known_trend(), gp, lines, builtin_region(), times, {0.5}));
    const std::string b = io::sweep_csv(scenario_sweep(known_trend(), gp, lines, builtin_region(), times, {0.5}));
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.substr(0, a.find('\n')), "t,date,q,cores,freq_mhz,l3_kb,threads,mean_log,var,lo95,hi95");
    EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 3);
}

TEST(ScenarioSweep, NeedsTimesAndQuantiles) {
    const auto gp = gp_through(four_configs(), {0.3, -0.1, 0.5, 0.0});
    EXPECT_THROW(scenario_sweep(known_trend(), gp, flat_lines(3, 2000, 8), builtin_region(), {}, {0.5}), DataError);
}
