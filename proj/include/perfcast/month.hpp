#pragma once

#include <charconv>
#include <compare>
#include <cstdio>
#include <string>
#include <string_view>

#include "perfcast/error.hpp"

namespace perfcast {

/// Months elapsed since 1995-08 (month 0), the first month with SPEC records.
struct MonthIndex {
    int value = 0;

    static constexpr int kOriginYear = 1995;
    static constexpr int kOriginMonth = 8;

    constexpr MonthIndex() = default;
    constexpr explicit MonthIndex(int v) : value(v) {}

    static constexpr MonthIndex from_year_month(int year, int month) {
        return MonthIndex((year - kOriginYear) * 12 + (month - kOriginMonth));
    }

    /// Accepts "YYYY-MM" or a longer ISO date ("YYYY-MM-DD..."), which is truncated to its month.
    static MonthIndex parse(std::string_view text) {
        auto bad = [&] { return ParseError("invalid date '" + std::string(text) + "', expected YYYY-MM"); };
        if (text.size() < 7 || text[4] != '-') throw bad();
        if (text.size() > 7 && text[7] != '-' && text[7] != 'T' && text[7] != ' ') throw bad();
        int year = 0;
        int month = 0;
        auto y = std::from_chars(text.data(), text.data() + 4, year);
        auto m = std::from_chars(text.data() + 5, text.data() + 7, month);
        if (y.ec != std::errc{} || y.ptr != text.data() + 4 || m.ec != std::errc{} || m.ptr != text.data() + 7)
            throw bad();
        if (month < 1 || month > 12) throw bad();
        MonthIndex idx = from_year_month(year, month);
        if (idx.value < 0) throw ParseError("date '" + std::string(text) + "' precedes 1995-08");
        return idx;
    }

    constexpr int year() const { return kOriginYear + (kOriginMonth - 1 + value) / 12; }
    constexpr int month() const { return (kOriginMonth - 1 + value) % 12 + 1; }

    std::string str() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02d", year(), month());
        return buf;
    }

    constexpr auto operator<=>(const MonthIndex&) const = default;
};

}  // namespace perfcast
