#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "perfcast/error.hpp"
#include "perfcast/records.hpp"
#include "perfcast/stats.hpp"

namespace perfcast {

struct OverlapPair {
    std::string system_id;
    double score_old = 0.0;
    double score_new = 0.0;
    HardwareFactors hw;  // old-suite row, gaps filled from the new-suite row
};

struct OverlapSet {
    Suite old_suite = Suite::Spec1995;
    Suite new_suite = Suite::Spec2000;
    std::vector<OverlapPair> pairs;
    std::vector<std::string> warnings;
};

struct ConversionFactor {
    Suite old_suite = Suite::Spec1995;
    Suite new_suite = Suite::Spec2000;
    double factor = 1.0;  // new-scale score = old score * factor
    std::size_t n_pairs = 0;
    std::optional<double> r2_cv;
};

struct RegressionConversion {
    Suite old_suite = Suite::Spec1995;
    Suite new_suite = Suite::Spec2000;
    bool uses_log_old = true;
    double beta0 = 0.0;
    double beta1 = 0.0;  // coefficient on log(old score); 0 when !uses_log_old
    std::vector<std::string> factors;
    std::vector<double> beta_factors;
    double residual_variance = 0.0;
    std::size_t n_pairs = 0;
    std::optional<double> r2_cv;

    double predict_log_ratio(double score_old, const HardwareFactors& hw) const;

    double convert(double score_old, const HardwareFactors& hw) const {
        return score_old * std::exp(predict_log_ratio(score_old, hw));
    }
};

using Conversion = std::variant<ConversionFactor, RegressionConversion>;

enum class ConversionMethod { Constant, Regression };

inline std::string to_string(ConversionMethod m) { return m == ConversionMethod::Constant ? "constant" : "regression"; }

inline ConversionMethod parse_method(std::string_view s) {
    if (s == "constant") return ConversionMethod::Constant;
    if (s == "regression") return ConversionMethod::Regression;
    throw ParseError("unknown normalization method '" + std::string(s) + "'");
}

/// Names accepted in a regression conversion's factor list.
inline std::optional<double> factor_value(const HardwareFactors& hw, std::string_view name) {
    if (name == "cores") return hw.cores ? std::optional<double>(*hw.cores) : std::nullopt;
    if (name == "freq_mhz") return hw.freq_mhz;
    if (name == "l3_kb") return hw.l3_kb;
    if (name == "threads_per_core") return hw.threads_per_core;
    if (name == "auto_parallel") return hw.auto_parallel ? std::optional<double>(*hw.auto_parallel) : std::nullopt;
    throw DataError("unknown system factor '" + std::string(name) + "'");
}

inline double RegressionConversion::predict_log_ratio(double score_old, const HardwareFactors& hw) const {
    double v = beta0;
    if (uses_log_old) v += beta1 * std::log(score_old);
    for (std::size_t j = 0; j < factors.size(); ++j) {
        auto x = factor_value(hw, factors[j]);
        if (!x) throw DataError("system factor '" + factors[j] + "' missing for conversion");
        v += beta_factors[j] * *x;
    }
    return v;
}

inline const std::optional<double>& score_of(const BenchmarkRecord& r, bool rate) {
    return rate ? r.score_rate : r.score_speed;
}

/// Machines benchmarked under both suites, joined on system_id.
///
/// A system_id repeated within one suite keeps its earliest-dated row (ties by
/// record_id) and the rest are dropped with a warning.
inline OverlapSet find_overlap(const std::vector<BenchmarkRecord>& records, Suite old_suite, Suite new_suite,
                               bool rate = false) {
    auto index = [&](Suite s, std::vector<std::string>& warnings) {
        std::map<std::string, const BenchmarkRecord*> first;
        for (const auto& r : records) {
            if (r.suite != s || !score_of(r, rate)) continue;
            auto [it, fresh] = first.emplace(r.system_id, &r);
            if (fresh) continue;
            const BenchmarkRecord* keep = it->second;
            const BenchmarkRecord* drop = &r;
            if (std::tie(r.date, r.record_id) < std::tie(keep->date, keep->record_id)) std::swap(keep, drop);
            it->second = keep;
            warnings.push_back("suite " + to_string(s) + ": duplicate system '" + r.system_id + "', dropped record " +
                               drop->record_id);
        }
        return first;
    };
    OverlapSet set;
    set.old_suite = old_suite;
    set.new_suite = new_suite;
    auto olds = index(old_suite, set.warnings);
    auto news = index(new_suite, set.warnings);
    for (const auto& [id, o] : olds) {
        auto it = news.find(id);
        if (it == news.end()) continue;
        const BenchmarkRecord* n = it->second;
        OverlapPair p{id, *score_of(*o, rate), *score_of(*n, rate), o->hw};
        if (!p.hw.cores) p.hw.cores = n->hw.cores;
        if (!p.hw.freq_mhz) p.hw.freq_mhz = n->hw.freq_mhz;
        if (!p.hw.l3_kb) p.hw.l3_kb = n->hw.l3_kb;
        if (!p.hw.threads_per_core) p.hw.threads_per_core = n->hw.threads_per_core;
        if (!p.hw.auto_parallel) p.hw.auto_parallel = n->hw.auto_parallel;
        set.pairs.push_back(std::move(p));
    }
    if (set.pairs.empty())
        throw DataError("no overlap between suites " + to_string(old_suite) + " and " + to_string(new_suite));
    return set;
}

/// Geometric mean of new/old score ratios.
inline ConversionFactor constant_factor(const OverlapSet& overlap) {
    if (overlap.pairs.empty()) throw DataError("empty overlap set");
    double sum = 0.0;
    for (const auto& p : overlap.pairs) sum += std::log(p.score_new / p.score_old);
    ConversionFactor f;
    f.old_suite = overlap.old_suite;
    f.new_suite = overlap.new_suite;
    f.factor = std::exp(sum / static_cast<double>(overlap.pairs.size()));
    f.n_pairs = overlap.pairs.size();
    return f;
}

/// OLS of log(new/old) on [1, log(old)?, factors...].
///
/// With `use_log_old == false` and no factors the fit is the intercept-only
/// model, whose prediction equals the constant method exactly.
inline RegressionConversion fit_regression_conversion(const OverlapSet& overlap,
                                                      const std::vector<std::string>& factors,
                                                      bool use_log_old = true) {
    RegressionConversion rc;
    rc.old_suite = overlap.old_suite;
    rc.new_suite = overlap.new_suite;
    rc.uses_log_old = use_log_old;
    rc.factors = factors;
    rc.n_pairs = overlap.pairs.size();
    const std::size_t n = overlap.pairs.size();
    const std::size_t p = 1 + (use_log_old ? 1 : 0) + factors.size();

    if (!use_log_old && factors.empty()) {
        // Same arithmetic as constant_factor so the two methods agree bit for bit.
        if (n < 2) throw DataError("need at least 2 overlap pairs");
        double sum = 0.0;
        for (const auto& pr : overlap.pairs) sum += std::log(pr.score_new / pr.score_old);
        rc.beta0 = sum / static_cast<double>(n);
        double rss = 0.0;
        for (const auto& pr : overlap.pairs) {
            double r = std::log(pr.score_new / pr.score_old) - sum / static_cast<double>(n);
            rss += r * r;
        }
        rc.residual_variance = rss / static_cast<double>(n - 1);
        return rc;
    }
    if (n <= p + 1)
        throw DataError("overlap of " + std::to_string(n) + " pairs is too small for " + std::to_string(p) +
                        " coefficients");

    Eigen::MatrixXd design(n, p);
    Eigen::VectorXd y(n);
    std::vector<std::string> names{"intercept"};
    if (use_log_old) names.push_back("log_score_old");
    for (const auto& f : factors) names.push_back(f);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& pr = overlap.pairs[i];
        Eigen::Index col = 0;
        design(i, col++) = 1.0;
        if (use_log_old) design(i, col++) = std::log(pr.score_old);
        for (const auto& f : factors) {
            auto v = factor_value(pr.hw, f);
            if (!v) throw DataError("system factor '" + f + "' missing for overlap system '" + pr.system_id + "'");
            design(i, col++) = *v;
        }
        y(i) = std::log(pr.score_new / pr.score_old);
    }
    auto fit = stats::ols(design, y, names);
    Eigen::Index col = 0;
    rc.beta0 = fit.beta(col++);
    if (use_log_old) rc.beta1 = fit.beta(col++);
    for (std::size_t j = 0; j < factors.size(); ++j) rc.beta_factors.push_back(fit.beta(col++));
    rc.residual_variance = fit.residual_variance;
    return rc;
}

/// Default regression factors: cores and freq_mhz, each only if present on every pair.
inline std::vector<std::string> default_regression_factors(const OverlapSet& overlap) {
    std::vector<std::string> out;
    for (const char* f : {"cores", "freq_mhz"}) {
        if (overlap.pairs.size() <= out.size() + 4) break;  // keep n > coefficients + 1
        bool all = std::all_of(overlap.pairs.begin(), overlap.pairs.end(),
                               [&](const OverlapPair& p) { return factor_value(p.hw, f).has_value(); });
        if (all) out.emplace_back(f);
    }
    return out;
}

struct CvOptions {
    std::size_t folds = 5;
    std::uint64_t seed = 20170801;
    std::vector<std::string> factors;  // regression method only
    bool use_log_old = true;
};

/// Mean over folds of the held-out R^2 (log scale) between converted and true new scores.
///
/// Pairs are put in system_id order before the seeded shuffle, so the result
/// does not depend on input order.
inline double cross_validated_r2(const OverlapSet& overlap, ConversionMethod method, const CvOptions& opt = {}) {
    const std::size_t n = overlap.pairs.size();
    if (opt.folds < 2 || n < opt.folds)
        throw DataError("cross-validation needs 2 <= k <= overlap size (k = " + std::to_string(opt.folds) +
                        ", n = " + std::to_string(n) + ")");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return overlap.pairs[a].system_id < overlap.pairs[b].system_id;
    });
    std::mt19937_64 rng(opt.seed);
    for (std::size_t i = n - 1; i > 0; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i);
        std::swap(order[i], order[pick(rng)]);
    }

    double total = 0.0;
    for (std::size_t fold = 0; fold < opt.folds; ++fold) {
        OverlapSet train{overlap.old_suite, overlap.new_suite, {}, {}};
        std::vector<const OverlapPair*> test;
        for (std::size_t i = 0; i < n; ++i) {
            if (i % opt.folds == fold)
                test.push_back(&overlap.pairs[order[i]]);
            else
                train.pairs.push_back(overlap.pairs[order[i]]);
        }

        std::vector<double> truth, pred;
        if (method == ConversionMethod::Constant) {
            double f = constant_factor(train).factor;
            for (const auto* p : test) pred.push_back(std::log(p->score_old * f));
        } else {
            auto rc = fit_regression_conversion(train, opt.factors, opt.use_log_old);
            for (const auto* p : test) pred.push_back(std::log(rc.convert(p->score_old, p->hw)));
        }
        for (const auto* p : test) truth.push_back(std::log(p->score_new));
        double m = stats::mean(truth);
        double ss_tot = 0.0, ss_res = 0.0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            ss_tot += (truth[i] - m) * (truth[i] - m);
            ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
        }
        total += ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
    }
    return total / static_cast<double>(opt.folds);
}

/// Fitted conversions keyed by adjacent suite pair, plus constant factors for shared micros.
struct ConversionTable {
    std::map<std::pair<Suite, Suite>, Conversion> steps;
    std::map<std::pair<Suite, Suite>, std::map<std::string, ConversionFactor>> micro_steps;
};

/// Per-micro constant factors for micros shared by both suites ("gcc", "perl").
inline std::map<std::string, ConversionFactor> shared_micro_factors(const std::vector<BenchmarkRecord>& records,
                                                                    Suite old_suite, Suite new_suite,
                                                                    const SuiteDefinitions& defs) {
    std::map<std::string, ConversionFactor> out;
    auto od = defs.find(old_suite);
    auto nd = defs.find(new_suite);
    if (od == defs.end() || nd == defs.end()) return out;
    for (const auto& [canon, old_name] : od->second.shared) {
        auto new_name = nd->second.shared.find(canon);
        if (new_name == nd->second.shared.end()) continue;
        std::map<std::string, std::pair<const BenchmarkRecord*, const BenchmarkRecord*>> join;
        for (const auto& r : records) {
            if (r.suite == old_suite && r.micros.count(old_name)) {
                auto& slot = join[r.system_id].first;
                if (!slot || std::tie(r.date, r.record_id) < std::tie(slot->date, slot->record_id)) slot = &r;
            }
            if (r.suite == new_suite && r.micros.count(new_name->second)) {
                auto& slot = join[r.system_id].second;
                if (!slot || std::tie(r.date, r.record_id) < std::tie(slot->date, slot->record_id)) slot = &r;
            }
        }
        OverlapSet ov{old_suite, new_suite, {}, {}};
        for (const auto& [id, pr] : join)
            if (pr.first && pr.second)
                ov.pairs.push_back({id, pr.first->micros.at(old_name), pr.second->micros.at(new_name->second), {}});
        if (!ov.pairs.empty()) out[canon] = constant_factor(ov);
    }
    return out;
}

struct ChainOptions {
    Suite target = Suite::Spec2017;
    ConversionMethod method = ConversionMethod::Constant;
    CvOptions cv;
    bool with_cv = true;
    bool auto_factors = true;  // regression: pick available factors when cv.factors is empty
};

/// Fits one conversion per adjacent suite pair present in the data.
inline ConversionTable fit_conversions(const std::vector<BenchmarkRecord>& records, const ChainOptions& opt,
                                       const SuiteDefinitions& defs = builtin_suites()) {
    ConversionTable table;
    std::set<Suite> present;
    for (const auto& r : records) present.insert(r.suite);
    for (std::size_t i = 0; i + 1 < kAllSuites.size(); ++i) {
        Suite a = kAllSuites[i], b = kAllSuites[i + 1];
        if (!present.count(a) || !present.count(b)) continue;
        OverlapSet ov = find_overlap(records, a, b);
        // Held-out folds need at least two pairs for R^2 to mean anything.
        CvOptions cv = opt.cv;
        cv.folds = std::min(cv.folds, ov.pairs.size() / 2);
        if (opt.method == ConversionMethod::Constant) {
            ConversionFactor f = constant_factor(ov);
            if (opt.with_cv && cv.folds >= 2) f.r2_cv = cross_validated_r2(ov, ConversionMethod::Constant, cv);
            table.steps[{a, b}] = f;
        } else {
            if (cv.factors.empty() && opt.auto_factors) cv.factors = default_regression_factors(ov);
            RegressionConversion rc = fit_regression_conversion(ov, cv.factors, cv.use_log_old);
            if (opt.with_cv && cv.folds >= 2) {
                try {
                    rc.r2_cv = cross_validated_r2(ov, ConversionMethod::Regression, cv);
                } catch (const DataError&) {
                    // training folds too small for the design; R^2 stays undefined
                }
            }
            table.steps[{a, b}] = rc;
        }
        auto micro = shared_micro_factors(records, a, b, defs);
        if (!micro.empty()) table.micro_steps[{a, b}] = std::move(micro);
    }
    return table;
}

/// Rescales every record's speed score (and shared micros) onto the target suite.
///
/// Older suites multiply through the chain of adjacent conversions; newer
/// suites divide by constant factors (regression conversions are not invertible).
inline std::vector<BenchmarkRecord> chain_normalize(std::vector<BenchmarkRecord> records, Suite target,
                                                    const ConversionTable& table,
                                                    const SuiteDefinitions& defs = builtin_suites()) {
    const std::size_t t = suite_rank(target);
    auto step_of = [&](std::size_t i) -> const Conversion& {
        auto key = std::make_pair(kAllSuites[i], kAllSuites[i + 1]);
        auto it = table.steps.find(key);
        if (it == table.steps.end())
            throw DataError("no conversion between suites " + to_string(key.first) + " and " + to_string(key.second));
        return it->second;
    };
    auto canonical_micros = [&](const BenchmarkRecord& r) {
        std::map<std::string, double> out;
        auto d = defs.find(r.suite);
        if (d == defs.end()) return out;
        for (const auto& [canon, local] : d->second.shared) {
            auto it = r.micros.find(local);
            if (it != r.micros.end()) out[canon] = it->second;
        }
        return out;
    };
    for (auto& r : records) {
        const std::size_t s = suite_rank(r.suite);
        std::map<std::string, double> micros = canonical_micros(r);
        std::optional<double> score = r.score_speed;
        if (s < t) {
            for (std::size_t i = s; i < t; ++i) {
                const Conversion& c = step_of(i);
                if (score) {
                    if (auto* f = std::get_if<ConversionFactor>(&c))
                        *score *= f->factor;
                    else
                        score = std::get<RegressionConversion>(c).convert(*score, r.hw);
                }
                auto ms = table.micro_steps.find({kAllSuites[i], kAllSuites[i + 1]});
                for (auto it = micros.begin(); it != micros.end();) {
                    if (ms == table.micro_steps.end() || !ms->second.count(it->first)) {
                        it = micros.erase(it);
                        continue;
                    }
                    it->second *= ms->second.at(it->first).factor;
                    ++it;
                }
            }
        } else if (s > t) {
            for (std::size_t i = s; i-- > t;) {
                const Conversion& c = step_of(i);
                auto* f = std::get_if<ConversionFactor>(&c);
                if (!f)
                    throw DataError("cannot normalize suite " + to_string(r.suite) + " down to " + to_string(target) +
                                    " through a regression conversion");
                if (score) *score /= f->factor;
                auto ms = table.micro_steps.find({kAllSuites[i], kAllSuites[i + 1]});
                for (auto it = micros.begin(); it != micros.end();) {
                    if (ms == table.micro_steps.end() || !ms->second.count(it->first)) {
                        it = micros.erase(it);
                        continue;
                    }
                    it->second /= ms->second.at(it->first).factor;
                    ++it;
                }
            }
        }
        r.normalized_speed = score;
        r.normalized_micros = std::move(micros);
    }
    return records;
}

/// Product of constant factors along the chain from `from` to `to` (from older than to).
inline double chained_factor(const ConversionTable& table, Suite from, Suite to) {
    double f = 1.0;
    for (std::size_t i = suite_rank(from); i < suite_rank(to); ++i) {
        auto it = table.steps.find({kAllSuites[i], kAllSuites[i + 1]});
        if (it == table.steps.end() || !std::holds_alternative<ConversionFactor>(it->second))
            throw DataError("no constant conversion between suites " + to_string(kAllSuites[i]) + " and " +
                            to_string(kAllSuites[i + 1]));
        f *= std::get<ConversionFactor>(it->second).factor;
    }
    return f;
}

}  // namespace perfcast
