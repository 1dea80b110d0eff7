#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "perfcast/csv.hpp"
#include "perfcast/error.hpp"
#include "perfcast/month.hpp"
#include "perfcast/records.hpp"
#include "perfcast/stats.hpp"

namespace perfcast {

struct RejectedRow {
    std::size_t line = 0;
    std::string reason;
};

struct ParseReport {
    std::vector<BenchmarkRecord> records;
    std::vector<RejectedRow> rejected;
    std::size_t input_rows = 0;
};

namespace detail {

inline const std::vector<std::string>& systems_columns() {
    static const std::vector<std::string> cols{
        "record_id", "suite",           "date",          "vendor",      "system",      "processor",  "cores",
        "freq_mhz",  "threads_per_core", "auto_parallel", "transistors", "score_speed", "score_rate", "l3_kb"};
    return cols;
}

inline BenchmarkRecord parse_system_row(const csv::Table& table, const csv::Row& row) {
    const auto line = row.line;
    if (row.fields.size() != table.header().size())
        throw ParseError("expected " + std::to_string(table.header().size()) + " fields, found " +
                             std::to_string(row.fields.size()),
                         line);
    auto cell = [&](const char* name) -> std::string_view { return csv::trim(row.fields[table.column(name)]); };
    auto real = [&](const char* name) { return csv::parse_real(cell(name), line, name); };

    BenchmarkRecord r;
    r.record_id = std::string(cell("record_id"));
    if (r.record_id.empty()) throw ParseError("empty record_id", line, "record_id");
    try {
        r.suite = parse_suite(cell("suite"));
    } catch (const ParseError& e) {
        throw ParseError(e.what(), line, "suite");
    }
    try {
        r.date = MonthIndex::parse(cell("date"));
    } catch (const ParseError& e) {
        throw ParseError(e.what(), line, "date");
    }
    r.vendor = std::string(cell("vendor"));
    r.system = std::string(cell("system"));
    r.processor = std::string(cell("processor"));
    r.system_id = make_system_id(r.vendor, r.system, r.processor);

    if (auto c = csv::parse_integer(cell("cores"), line, "cores")) {
        if (*c < 1 || *c > std::numeric_limits<int>::max()) throw ParseError("cores must be >= 1", line, "cores");
        r.hw.cores = static_cast<int>(*c);
    }
    if (auto f = real("freq_mhz")) {
        if (*f <= 0.0) throw ParseError("freq_mhz must be > 0", line, "freq_mhz");
        r.hw.freq_mhz = f;
    }
    if (auto l3 = real("l3_kb")) {
        if (*l3 < 0.0) throw ParseError("l3_kb must be >= 0", line, "l3_kb");
        r.hw.l3_kb = l3;
    }
    if (auto tpc = real("threads_per_core")) {
        if (*tpc < 1.0) throw ParseError("threads_per_core must be >= 1", line, "threads_per_core");
        r.hw.threads_per_core = tpc;
    }
    if (auto ap = csv::parse_integer(cell("auto_parallel"), line, "auto_parallel")) {
        if (*ap != 0 && *ap != 1) throw ParseError("auto_parallel must be 0 or 1", line, "auto_parallel");
        r.hw.auto_parallel = *ap == 1;
    }
    if (auto tr = csv::parse_integer(cell("transistors"), line, "transistors")) {
        if (*tr <= 0) throw ParseError("transistors must be > 0", line, "transistors");
        r.hw.transistors = tr;
    }
    for (const char* name : {"score_speed", "score_rate"}) {
        auto s = real(name);
        if (s && *s <= 0.0) throw ParseError("score must be > 0", line, name);
        (std::string_view(name) == "score_speed" ? r.score_speed : r.score_rate) = s;
    }
    if (!r.score_speed && !r.score_rate) throw ParseError("neither score_speed nor score_rate present", line);
    return r;
}

template <bool Strict>
ParseReport parse_records_impl(std::istream& systems, std::istream* micros, const SuiteDefinitions& defs) {
    ParseReport report;
    csv::Table table = csv::Table::read(systems);
    for (const auto& col : systems_columns())
        if (std::find(table.header().begin(), table.header().end(), col) == table.header().end())
            throw ParseError("missing required column", 1, col);

    std::map<std::string, std::size_t> by_id;
    std::set<std::string> rejected_ids;
    report.input_rows = table.rows().size();
    for (const auto& row : table.rows()) {
        try {
            BenchmarkRecord rec = parse_system_row(table, row);
            if (by_id.count(rec.record_id))
                throw ParseError("duplicate record_id '" + rec.record_id + "'", row.line, "record_id");
            by_id[rec.record_id] = report.records.size();
            report.records.push_back(std::move(rec));
        } catch (const ParseError& e) {
            if constexpr (Strict) throw;
            report.rejected.push_back({row.line, e.what()});
            auto id_col = table.column("record_id");
            if (id_col < row.fields.size()) rejected_ids.insert(std::string(csv::trim(row.fields[id_col])));
        }
    }

    if (micros == nullptr) return report;
    csv::Table mt = csv::Table::read(*micros);
    mt.require({"record_id", "micro_name", "ratio"});
    const auto c_id = mt.column("record_id");
    const auto c_name = mt.column("micro_name");
    const auto c_ratio = mt.column("ratio");
    for (const auto& row : mt.rows()) {
        if (row.fields.size() != mt.header().size())
            throw ParseError("expected " + std::to_string(mt.header().size()) + " fields, found " +
                                 std::to_string(row.fields.size()),
                             row.line);
        std::string id(csv::trim(row.fields[c_id]));
        std::string name(csv::trim(row.fields[c_name]));
        auto it = by_id.find(id);
        if (it == by_id.end()) {
            if (rejected_ids.count(id)) continue;
            throw ParseError("micro row references missing record_id '" + id + "'", row.line, "record_id");
        }
        BenchmarkRecord& rec = report.records[it->second];
        auto def = defs.find(rec.suite);
        if (def == defs.end() || !def->second.has_micro(name))
            throw ParseError("unknown microbenchmark '" + name + "' for suite " + to_string(rec.suite), row.line,
                             "micro_name");
        auto ratio = csv::parse_real(row.fields[c_ratio], row.line, "ratio");
        if (!ratio || *ratio <= 0.0) throw ParseError("ratio must be > 0", row.line, "ratio");
        if (!rec.micros.emplace(name, *ratio).second)
            throw ParseError("duplicate microbenchmark '" + name + "' for record '" + id + "'", row.line,
                             "micro_name");
    }
    return report;
}

}  // namespace detail

/// Parses systems.csv (and optionally micros.csv); the first malformed row raises ParseError.
inline std::vector<BenchmarkRecord> parse_records(std::istream& systems, std::istream* micros,
                                                  const SuiteDefinitions& defs = builtin_suites()) {
    return detail::parse_records_impl<true>(systems, micros, defs).records;
}

/// Like parse_records, but collects malformed systems rows instead of stopping at the first one.
inline ParseReport parse_records_lenient(std::istream& systems, std::istream* micros,
                                         const SuiteDefinitions& defs = builtin_suites()) {
    return detail::parse_records_impl<false>(systems, micros, defs);
}

enum class ScoreKind { Speed, Rate };

struct SuiteSummary {
    Suite suite = Suite::Spec2017;
    ScoreKind kind = ScoreKind::Speed;
    double max = 0.0;
    double mean = 0.0;
    double min = 0.0;
    std::size_t count = 0;
    std::optional<double> mean_cores;
    std::optional<double> mean_freq_mhz;
    std::optional<double> mean_l3_kb;
    std::optional<double> mean_threads_per_core;
};

inline SuiteSummary summarize(const std::vector<BenchmarkRecord>& records, Suite suite,
                              ScoreKind kind = ScoreKind::Speed) {
    SuiteSummary s;
    s.suite = suite;
    s.kind = kind;
    s.min = std::numeric_limits<double>::infinity();
    s.max = -std::numeric_limits<double>::infinity();
    double total = 0.0;
    struct Acc {
        double sum = 0.0;
        std::size_t n = 0;
        void add(std::optional<double> v) {
            if (v) sum += *v, ++n;
        }
        std::optional<double> mean() const { return n ? std::optional(sum / static_cast<double>(n)) : std::nullopt; }
    } cores, freq, l3, tpc;

    for (const auto& r : records) {
        if (r.suite != suite) continue;
        const auto& score = kind == ScoreKind::Speed ? r.score_speed : r.score_rate;
        if (!score) continue;
        s.min = std::min(s.min, *score);
        s.max = std::max(s.max, *score);
        total += *score;
        ++s.count;
        cores.add(r.hw.cores ? std::optional<double>(*r.hw.cores) : std::nullopt);
        freq.add(r.hw.freq_mhz);
        l3.add(r.hw.l3_kb);
        tpc.add(r.hw.threads_per_core);
    }
    if (s.count == 0) throw DataError("no records for suite " + to_string(suite));
    s.mean = total / static_cast<double>(s.count);
    s.mean_cores = cores.mean();
    s.mean_freq_mhz = freq.mean();
    s.mean_l3_kb = l3.mean();
    s.mean_threads_per_core = tpc.mean();
    return s;
}

struct GenerationPoint {
    std::string genus;
    MonthIndex date;  // mean submission month of the genus' records
    double mean_log_score = 0.0;
    std::size_t n = 0;
};

/// One branch: a leaf genus and up to two ancestors, oldest generation first.
struct LineageSeries {
    std::string genus;
    std::vector<GenerationPoint> generations;
};

struct LineageResult {
    std::vector<LineageSeries> series;
    std::vector<std::pair<double, double>> lag1_pairs;  // (parent mean, child mean)
    std::optional<double> lag1_correlation;            // nullopt = undefined (zero variance)
};

inline constexpr std::size_t kMaxLineageGenerations = 3;

/// Mean log score per genus along processor-family branches and the pooled
/// lag-1 correlation between parent and child generation means.
inline LineageResult lineage_series(std::istream& lineage_csv, const std::vector<BenchmarkRecord>& records) {
    csv::Table t = csv::Table::read(lineage_csv);
    t.require({"processor", "genus", "parent_genus"});
    const auto c_proc = t.column("processor");
    const auto c_genus = t.column("genus");
    const auto c_parent = t.column("parent_genus");

    std::map<std::string, std::string> genus_of;  // processor key -> genus
    std::map<std::string, std::string> parent_of;
    std::set<std::string> genera;
    std::set<std::string> has_child;
    for (const auto& row : t.rows()) {
        if (row.fields.size() != t.header().size())
            throw ParseError("expected " + std::to_string(t.header().size()) + " fields", row.line);
        std::string proc(csv::trim(row.fields[c_proc]));
        std::string genus(csv::trim(row.fields[c_genus]));
        std::string parent(csv::trim(row.fields[c_parent]));
        if (genus.empty()) throw ParseError("empty genus", row.line, "genus");
        genera.insert(genus);
        if (!proc.empty()) genus_of[make_system_id("", "", proc)] = genus;
        if (!parent.empty()) {
            auto [it, fresh] = parent_of.emplace(genus, parent);
            if (!fresh && it->second != parent)
                throw ParseError("genus '" + genus + "' has conflicting parents", row.line, "parent_genus");
            has_child.insert(parent);
        }
    }

    struct Acc {
        double log_sum = 0.0;
        double month_sum = 0.0;
        std::size_t n = 0;
    };
    std::map<std::string, Acc> acc;
    for (const auto& r : records) {
        auto score = r.modeling_score();
        if (!score) continue;
        auto it = genus_of.find(make_system_id("", "", r.processor));
        if (it == genus_of.end()) continue;
        Acc& a = acc[it->second];
        a.log_sum += std::log(*score);
        a.month_sum += r.date.value;
        ++a.n;
    }
    auto point = [&](const std::string& genus) -> std::optional<GenerationPoint> {
        auto it = acc.find(genus);
        if (it == acc.end()) return std::nullopt;
        const auto n = static_cast<double>(it->second.n);
        return GenerationPoint{genus, MonthIndex(static_cast<int>(std::lround(it->second.month_sum / n))),
                               it->second.log_sum / n, it->second.n};
    };

    LineageResult result;
    std::set<std::pair<std::string, std::string>> edges;
    for (const auto& leaf : genera) {
        if (has_child.count(leaf)) continue;
        LineageSeries s;
        s.genus = leaf;
        std::string g = leaf;
        while (s.generations.size() < kMaxLineageGenerations) {
            auto p = point(g);
            if (!p) break;
            s.generations.push_back(*p);
            auto up = parent_of.find(g);
            if (up == parent_of.end()) break;
            g = up->second;
        }
        if (s.generations.empty()) continue;
        std::reverse(s.generations.begin(), s.generations.end());
        for (std::size_t i = 1; i < s.generations.size(); ++i) {
            const auto& parent = s.generations[i - 1];
            const auto& child = s.generations[i];
            if (edges.emplace(parent.genus, child.genus).second)
                result.lag1_pairs.emplace_back(parent.mean_log_score, child.mean_log_score);
        }
        result.series.push_back(std::move(s));
    }
    if (result.lag1_pairs.empty()) throw DataError("insufficient lineage depth: no branch spans 2 generations");

    std::vector<double> xs, ys;
    for (auto [x, y] : result.lag1_pairs) xs.push_back(x), ys.push_back(y);
    result.lag1_correlation = stats::pearson(xs, ys);
    return result;
}

}  // namespace perfcast
