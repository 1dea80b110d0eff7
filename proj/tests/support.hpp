#pragma once

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "perfcast/perfcast.hpp"

namespace testing_support {

inline std::string fixture(const std::string& name) { return std::string(PERFCAST_FIXTURES) + "/" + name; }

inline std::vector<perfcast::BenchmarkRecord> load_fixture_records(bool with_micros = true) {
    std::ifstream sys(fixture("mini_spec.csv"));
    std::ifstream mic(fixture("mini_micros.csv"));
    return perfcast::parse_records(sys, with_micros ? &mic : nullptr, perfcast::builtin_suites());
}

inline perfcast::BenchmarkRecord make_record(std::string id, perfcast::Suite suite, int month, double score,
                                             std::string system = "box") {
    perfcast::BenchmarkRecord r;
    r.record_id = std::move(id);
    r.suite = suite;
    r.date = perfcast::MonthIndex(month);
    r.vendor = "v";
    r.system = system;
    r.processor = "p";
    r.system_id = perfcast::make_system_id(r.vendor, r.system, r.processor);
    r.score_speed = score;
    return r;
}

/// Log scores drawn from the power-law trend with Gaussian noise.
struct TrendSample {
    std::vector<double> t;
    std::vector<double> y;
};

inline TrendSample trend_sample(double alpha, double beta, double gamma, double sigma, std::size_t n,
                                std::uint64_t seed, double t_max = 300.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ut(0.0, t_max);
    std::normal_distribution<double> noise(0.0, sigma);
    TrendSample s;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = std::round(ut(rng));
        s.t.push_back(t);
        s.y.push_back(alpha * perfcast::power_term(t, beta) + gamma + (sigma > 0 ? noise(rng) : 0.0));
    }
    return s;
}

}  // namespace testing_support
