#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "perfcast/error.hpp"
#include "perfcast/month.hpp"

namespace perfcast {

enum class Suite { Spec1995 = 1995, Spec2000 = 2000, Spec2006 = 2006, Spec2017 = 2017 };

inline constexpr std::array<Suite, 4> kAllSuites{Suite::Spec1995, Suite::Spec2000, Suite::Spec2006,
                                                 Suite::Spec2017};

constexpr int suite_year(Suite s) { return static_cast<int>(s); }

inline std::string to_string(Suite s) { return std::to_string(suite_year(s)); }

inline Suite parse_suite(std::string_view text) {
    if (text == "1995" || text == "95") return Suite::Spec1995;
    if (text == "2000") return Suite::Spec2000;
    if (text == "2006") return Suite::Spec2006;
    if (text == "2017") return Suite::Spec2017;
    throw ParseError("unknown suite '" + std::string(text) + "', expected 1995, 2000, 2006 or 2017");
}

/// Position of the suite in generation order (1995 -> 0).
inline std::size_t suite_rank(Suite s) {
    return static_cast<std::size_t>(std::find(kAllSuites.begin(), kAllSuites.end(), s) - kAllSuites.begin());
}

/// Hardware factors as recorded; any field may be absent in older submissions.
struct HardwareFactors {
    std::optional<int> cores;
    std::optional<double> freq_mhz;
    std::optional<double> l3_kb;
    std::optional<double> threads_per_core;
    std::optional<bool> auto_parallel;
    std::optional<long long> transistors;
};

/// A complete hardware configuration, as used by forecasting and the GP.
struct HardwareConfig {
    int cores = 1;
    double freq_mhz = 1.0;
    double l3_kb = 0.0;
    double threads_per_core = 1.0;
    bool auto_parallel = true;
    std::optional<long long> transistors;

    double l3_mb() const { return l3_kb / 1024.0; }

    void validate() const {
        if (cores < 1) throw DataError("cores must be >= 1");
        if (!(freq_mhz > 0.0)) throw DataError("freq_mhz must be > 0");
        if (!(l3_kb >= 0.0)) throw DataError("l3_kb must be >= 0");
        if (!(threads_per_core >= 1.0)) throw DataError("threads_per_core must be >= 1");
    }

    friend bool operator==(const HardwareConfig& a, const HardwareConfig& b) {
        return a.cores == b.cores && a.freq_mhz == b.freq_mhz && a.l3_kb == b.l3_kb &&
               a.threads_per_core == b.threads_per_core;
    }

    /// Deterministic enumeration order: cores, freq, l3, threads.
    friend bool operator<(const HardwareConfig& a, const HardwareConfig& b) {
        if (a.cores != b.cores) return a.cores < b.cores;
        if (a.freq_mhz != b.freq_mhz) return a.freq_mhz < b.freq_mhz;
        if (a.l3_kb != b.l3_kb) return a.l3_kb < b.l3_kb;
        return a.threads_per_core < b.threads_per_core;
    }
};

struct BenchmarkRecord {
    std::string record_id;
    Suite suite = Suite::Spec2017;
    MonthIndex date;
    std::string vendor;
    std::string system;
    std::string processor;
    std::string system_id;  // join key across suites
    HardwareFactors hw;
    std::optional<double> score_speed;
    std::optional<double> score_rate;
    std::map<std::string, double> micros;

    // Filled in by normalization onto the target suite's scale.
    std::optional<double> normalized_speed;
    std::map<std::string, double> normalized_micros;  // keyed by shared (canonical) micro name

    /// The score modeling should use: normalized if available, raw speed otherwise.
    std::optional<double> modeling_score() const { return normalized_speed ? normalized_speed : score_speed; }

    std::optional<HardwareConfig> complete_config() const {
        if (!hw.cores || !hw.freq_mhz || !hw.l3_kb || !hw.threads_per_core) return std::nullopt;
        HardwareConfig c;
        c.cores = *hw.cores;
        c.freq_mhz = *hw.freq_mhz;
        c.l3_kb = *hw.l3_kb;
        c.threads_per_core = *hw.threads_per_core;
        c.auto_parallel = hw.auto_parallel.value_or(true);
        c.transistors = hw.transistors;
        return c;
    }
};

/// Lowercased vendor + system + processor with internal whitespace collapsed.
inline std::string make_system_id(std::string_view vendor, std::string_view system, std::string_view processor) {
    std::string out;
    bool pending_space = false;
    for (std::string_view part : {vendor, system, processor}) {
        if (!out.empty()) pending_space = true;
        for (char c : part) {
            if (std::isspace(static_cast<unsigned char>(c))) {
                pending_space = !out.empty();
                continue;
            }
            if (pending_space) {
                out += ' ';
                pending_space = false;
            }
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
    }
    return out;
}

/// Microbenchmark roster of one suite.
struct SuiteDefinition {
    Suite suite = Suite::Spec2017;
    std::vector<std::string> micros;
    // Constant term of the log-composition identity; 0 when micros are reference-time ratios.
    double composition_constant = 0.0;
    // canonical shared name (e.g. "perl") -> name used in this suite (e.g. "perlbmk")
    std::map<std::string, std::string> shared;

    std::size_t p() const { return micros.size(); }

    bool has_micro(std::string_view name) const {
        return std::find(micros.begin(), micros.end(), name) != micros.end();
    }
};

/// Integer speed rosters of the four SPEC CPU generations.
inline std::map<Suite, SuiteDefinition> builtin_suites() {
    std::map<Suite, SuiteDefinition> defs;
    defs[Suite::Spec1995] = {Suite::Spec1995,
                             {"go", "m88ksim", "gcc", "compress", "li", "ijpeg", "perl", "vortex"},
                             0.0,
                             {{"gcc", "gcc"}, {"perl", "perl"}}};
    defs[Suite::Spec2000] = {Suite::Spec2000,
                             {"gzip", "vpr", "gcc", "mcf", "crafty", "parser", "eon", "perlbmk", "gap", "vortex",
                              "bzip2", "twolf"},
                             0.0,
                             {{"gcc", "gcc"}, {"perl", "perlbmk"}}};
    defs[Suite::Spec2006] = {Suite::Spec2006,
                             {"perlbench", "bzip2", "gcc", "mcf", "gobmk", "hmmer", "sjeng", "libquantum", "h264ref",
                              "omnetpp", "astar", "xalancbmk"},
                             0.0,
                             {{"gcc", "gcc"}, {"perl", "perlbench"}}};
    defs[Suite::Spec2017] = {Suite::Spec2017,
                             {"perlbench", "gcc", "mcf", "omnetpp", "xalancbmk", "x264", "deepsjeng", "leela",
                              "exchange2", "xz"},
                             0.0,
                             {{"gcc", "gcc"}, {"perl", "perlbench"}}};
    return defs;
}

using SuiteDefinitions = std::map<Suite, SuiteDefinition>;

}  // namespace perfcast
