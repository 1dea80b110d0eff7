#pragma once

#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "perfcast/error.hpp"

namespace perfcast::csv {

struct Row {
    std::size_t line = 0;  // 1-based physical line where the row starts
    std::vector<std::string> fields;
};

/// Comma-delimited, RFC-4180 style quoting, header row first.
class Table {
public:
    static Table read(std::istream& in) {
        Table t;
        std::vector<Row> rows = split_rows(in);
        if (rows.empty()) throw ParseError("missing header row", 1);
        t.header_ = std::move(rows.front().fields);
        for (std::size_t i = 0; i < t.header_.size(); ++i) {
            auto& name = t.header_[i];
            if (!name.empty() && static_cast<unsigned char>(name[0]) == 0xEF && name.rfind("\xEF\xBB\xBF", 0) == 0)
                name.erase(0, 3);
            t.index_[name] = i;
        }
        t.rows_.assign(std::make_move_iterator(rows.begin() + 1), std::make_move_iterator(rows.end()));
        return t;
    }

    const std::vector<std::string>& header() const { return header_; }
    const std::vector<Row>& rows() const { return rows_; }

    void require(std::initializer_list<std::string_view> names) const {
        for (auto n : names)
            if (!index_.count(std::string(n))) throw ParseError("missing required column", 1, std::string(n));
    }

    std::size_t column(std::string_view name) const {
        auto it = index_.find(std::string(name));
        if (it == index_.end()) throw ParseError("missing required column", 1, std::string(name));
        return it->second;
    }

private:
    static std::vector<Row> split_rows(std::istream& in) {
        std::vector<Row> rows;
        std::string field;
        Row row;
        bool in_quotes = false;
        bool row_started = false;
        std::size_t line = 1;
        char c;
        auto finish_row = [&] {
            row.fields.push_back(std::move(field));
            field.clear();
            bool blank = row.fields.size() == 1 && row.fields[0].empty();
            if (!blank) rows.push_back(std::move(row));
            row = Row{};
            row_started = false;
        };
        while (in.get(c)) {
            if (!row_started) {
                row.line = line;
                row_started = true;
            }
            if (in_quotes) {
                if (c == '"') {
                    if (in.peek() == '"') {
                        in.get(c);
                        field += '"';
                    } else {
                        in_quotes = false;
                    }
                } else {
                    if (c == '\n') ++line;
                    field += c;
                }
                continue;
            }
            switch (c) {
                case '"': in_quotes = true; break;
                case ',': row.fields.push_back(std::move(field)); field.clear(); break;
                case '\r': break;
                case '\n': finish_row(); ++line; break;
                default: field += c;
            }
        }
        if (in_quotes) throw ParseError("unterminated quoted field", row.line);
        if (row_started) finish_row();
        return rows;
    }

    std::vector<std::string> header_;
    std::map<std::string, std::size_t> index_;
    std::vector<Row> rows_;
};

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

/// Empty cell -> nullopt; anything unparseable -> ParseError.
inline std::optional<double> parse_real(std::string_view cell, std::size_t line, std::string_view column) {
    cell = trim(cell);
    if (cell.empty()) return std::nullopt;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v))
        throw ParseError("not a number: '" + std::string(cell) + "'", line, std::string(column));
    return v;
}

inline std::optional<long long> parse_integer(std::string_view cell, std::size_t line, std::string_view column) {
    cell = trim(cell);
    if (cell.empty()) return std::nullopt;
    long long v = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec == std::errc{} && ptr == cell.data() + cell.size()) return v;
    // tolerate "8.0"-style integers
    auto real = parse_real(cell, line, column);
    if (real && *real == std::floor(*real) && std::abs(*real) < 9.0e18) return static_cast<long long>(*real);
    throw ParseError("not an integer: '" + std::string(cell) + "'", line, std::string(column));
}

/// Shortest round-trip representation, so output is byte-stable.
inline std::string format_real(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline std::string escape(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

inline std::string join_row(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += escape(cells[i]);
    }
    return out + '\n';
}

}  // namespace perfcast::csv
