#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace perfcast;

namespace {

std::map<std::string, double> random_micros(const SuiteDefinition& def, std::mt19937_64& rng) {
    std::lognormal_distribution<double> d(2.0, 1.0);
    std::map<std::string, double> m;
    for (const auto& name : def.micros) m[name] = d(rng);
    return m;
}

BenchmarkRecord with_micros(const SuiteDefinition& def, const std::map<std::string, double>& micros) {
    BenchmarkRecord r = testing_support::make_record("m", def.suite, 100, 1.0);
    r.micros = micros;
    r.score_speed = compose_score(micros, def);
    return r;
}

}  // namespace

TEST(Composition, BruteForceGeometricMean) {
    const auto def = builtin_suites().at(Suite::Spec2006);
    std::mt19937_64 rng(1);
    auto m = random_micros(def, rng);
    long double prod = 1.0L;
    for (const auto& [_, v] : m) prod *= v;
    const double brute = static_cast<double>(std::pow(prod, 1.0L / def.p()));
    EXPECT_NEAR(compose_score(m, def), brute, 1e-12 * brute);
}

TEST(Composition, IdentityOnRandomMaps) {
    std::mt19937_64 rng(20170801);
    for (const auto& [suite, def] : builtin_suites())
        for (int i = 0; i < 250; ++i) {
            auto r = with_micros(def, random_micros(def, rng));
            EXPECT_LT(std::abs(verify_composition(r, def, 1e-9).residual), 1e-12);
        }
}

TEST(Composition, ScaleConsistency) {
    const auto def = builtin_suites().at(Suite::Spec2017);
    std::mt19937_64 rng(2);
    for (int i = 0; i < 50; ++i) {
        auto m = random_micros(def, rng);
        const double base = compose_score(m, def);
        for (double lambda : {0.5, 2.0, 10.0}) {
            auto scaled = m;
            for (auto& [_, v] : scaled) v *= lambda;
            EXPECT_NEAR(compose_score(scaled, def), lambda * base, 1e-12 * lambda * base);
        }
    }
}

TEST(Composition, MissingAndExtraMicrosNamed) {
    const auto def = builtin_suites().at(Suite::Spec2017);
    std::mt19937_64 rng(3);
    auto m = random_micros(def, rng);
    m.erase("leela");
    try {
        compose_score(m, def);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("leela"), std::string::npos);
    }
    m = random_micros(def, rng);
    m["libquantum"] = 3.0;
    try {
        compose_score(m, def);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("libquantum"), std::string::npos);
    }
}

TEST(Composition, FlagsInconsistentScore) {
    const auto def = builtin_suites().at(Suite::Spec2006);
    std::mt19937_64 rng(4);
    auto r = with_micros(def, random_micros(def, rng));
    *r.score_speed *= 1.01;
    auto chk = verify_composition(r, def, 1e-3);
    EXPECT_TRUE(chk.flagged);
    EXPECT_NEAR(chk.residual, std::log(1.01), 1e-12);
}

TEST(Composition, FixtureWithinRounding) {
    const auto defs = builtin_suites();
    for (const auto& r : testing_support::load_fixture_records())
        EXPECT_FALSE(verify_composition(r, defs.at(r.suite), 1e-3).flagged) << r.record_id;
}

TEST(Influence, LibquantumRanksFirstOnFixture) {
    auto rep = influence_stats(testing_support::load_fixture_records(), builtin_suites().at(Suite::Spec2006));
    EXPECT_EQ(rep.n_records, 10u);
    EXPECT_EQ(rep.micros.front().name, "libquantum");
    EXPECT_FALSE(rep.top_tied);
    for (std::size_t i = 1; i < rep.micros.size(); ++i)
        EXPECT_GE(rep.micros[i - 1].log_variance, rep.micros[i].log_variance);
    for (const auto& m : rep.micros) EXPECT_DOUBLE_EQ(m.leverage, 1.0 / 12.0);
}

TEST(Influence, NeedsTenRecords) {
    auto recs = testing_support::load_fixture_records();
    recs.erase(std::remove_if(recs.begin(), recs.end(), [](const auto& r) { return r.record_id == "r021"; }),
               recs.end());
    EXPECT_THROW(influence_stats(recs, builtin_suites().at(Suite::Spec2006)), DataError);
}

TEST(Influence, ConstantMicroHasNoSlope) {
    const auto def = builtin_suites().at(Suite::Spec2017);
    std::mt19937_64 rng(5);
    std::vector<BenchmarkRecord> recs;
    for (int i = 0; i < 12; ++i) {
        auto m = random_micros(def, rng);
        m["xz"] = 7.0;
        recs.push_back(with_micros(def, m));
    }
    auto rep = influence_stats(recs, def);
    auto it = std::find_if(rep.micros.begin(), rep.micros.end(), [](const auto& m) { return m.name == "xz"; });
    ASSERT_NE(it, rep.micros.end());
    EXPECT_FALSE(it->slope.has_value());
    EXPECT_FALSE(it->correlation.has_value());
    EXPECT_EQ(it->log_variance, 0.0);
    EXPECT_EQ(rep.micros.back().name, "xz");
}

namespace {

std::vector<BenchmarkRecord> regression_data(std::size_t n, std::uint64_t seed, double noise = 0.3) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> cores(1, 64);
    std::bernoulli_distribution ap(0.5);
    std::normal_distribution<double> eps(0.0, noise);
    std::vector<BenchmarkRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        auto r = testing_support::make_record("r" + std::to_string(i), Suite::Spec2017, 260, 1.0);
        r.hw.cores = cores(rng);
        r.hw.auto_parallel = ap(rng);
        r.normalized_speed = std::exp(-0.7 + 0.03 * *r.hw.cores + 2.2 * (*r.hw.auto_parallel ? 1 : 0) + eps(rng));
        out.push_back(r);
    }
    return out;
}

}  // namespace

TEST(FactorRegression, MatchesNormalEquations) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto recs = regression_data(50 + 45 * seed, seed);
        auto fit = fit_factor_regression(recs);
        const auto n = static_cast<Eigen::Index>(recs.size());
        Eigen::MatrixXd x(n, 3);
        Eigen::VectorXd y(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& r = recs[static_cast<std::size_t>(i)];
            x.row(i) << 1.0, *r.hw.cores, *r.hw.auto_parallel ? 1.0 : 0.0;
            y(i) = std::log(*r.normalized_speed);
        }
        const Eigen::Matrix3d xtx = x.transpose() * x;
        const Eigen::Vector3d beta = xtx.inverse() * (x.transpose() * y);
        const double s2 = (y - x * beta).squaredNorm() / static_cast<double>(n - 3);
        const Eigen::Matrix3d cov = s2 * xtx.inverse();
        for (int j = 0; j < 3; ++j) {
            EXPECT_NEAR(fit.coefficients[j].estimate, beta(j), 1e-9);
            EXPECT_NEAR(fit.coefficients[j].se, std::sqrt(cov(j, j)), 1e-9);
        }
        EXPECT_NEAR(fit.residual_variance, s2, 1e-9);
    }
}

TEST(FactorRegression, CoefficientNamesAndIntervals) {
    auto fit = fit_factor_regression(regression_data(300, 9));
    ASSERT_EQ(fit.coefficients.size(), 3u);
    EXPECT_EQ(fit.coefficients[0].name, "(Intercept)");
    EXPECT_EQ(fit.coefficients[1].name, "cores");
    EXPECT_EQ(fit.coefficients[2].name, "auto_parallel");
    for (const auto& c : fit.coefficients) {
        EXPECT_NEAR(c.ci_hi - c.estimate, 1.959963984540054 * c.se, 1e-12);
        EXPECT_NEAR(c.t_value, c.estimate / c.se, 1e-12);
        EXPECT_GE(c.p_value, 0.0);
        EXPECT_LE(c.p_value, 1.0);
    }
}

TEST(FactorRegression, DegeneratePredictor) {
    auto recs = regression_data(40, 2);
    for (auto& r : recs) r.hw.auto_parallel = true;
    try {
        fit_factor_regression(recs);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("degenerate predictor"), std::string::npos);
    }
}

TEST(FactorRegression, TableLayout) {
    auto fit = fit_factor_regression(regression_data(100, 4));
    const std::string table = format_coefficient_table(fit.coefficients);
    std::istringstream in(table);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header.rfind("Parameter", 0), 0u);
    for (const char* col : {"Coef.", "SE", "t-val", "p-val", "2.5%", "97.5%"})
        EXPECT_NE(header.find(col), std::string::npos) << col;
    int lines = 0;
    for (std::string l; std::getline(in, l);) {
        ++lines;
        EXPECT_EQ(l.size(), header.size());
    }
    EXPECT_EQ(lines, 3);
}

TEST(Sensitivity, LongFormatOneRowPerRecord) {
    auto recs = testing_support::load_fixture_records(false);
    const std::string out = emit_sensitivity_table(recs, {"date", "score", "l3_kb", "auto_parallel"});
    std::istringstream in(out);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "date,score,l3_kb,auto_parallel");
    std::getline(in, line);
    EXPECT_EQ(line, "1995-12,0.7421,,0");
    int n = 1;
    while (std::getline(in, line)) ++n;
    EXPECT_EQ(n, 40);
}

TEST(Sensitivity, UnknownFieldRejected) {
    EXPECT_THROW(emit_sensitivity_table({}, {"date", "voltage"}), DataError);
}
