#pragma once

#include "sheetaudit/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sheetaudit {

inline constexpr std::int32_t kMaxRows = 1'048'576;
inline constexpr std::int32_t kMaxCols = 16'384;

/// 1-based cell coordinates. Default ordering is row-major.
struct CellAddr {
    std::int32_t row = 1;
    std::int32_t col = 1;

    friend auto operator<=>(const CellAddr&, const CellAddr&) = default;
};

inline bool in_grid(std::int64_t row, std::int64_t col) {
    return row >= 1 && col >= 1 && row <= kMaxRows && col <= kMaxCols;
}

inline std::uint64_t pack(CellAddr a) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a.row)) << 32)
         | static_cast<std::uint32_t>(a.col);
}

struct CellAddrHash {
    std::size_t operator()(CellAddr a) const noexcept { return std::hash<std::uint64_t>{}(pack(a)); }
};

/// Bijective base-26 column label: 1 -> A, 26 -> Z, 27 -> AA.
inline std::string column_label(std::int32_t col) {
    std::string out;
    while (col > 0) {
        --col;
        out.push_back(static_cast<char>('A' + col % 26));
        col /= 26;
    }
    std::reverse(out.begin(), out.end());
    return out;
}

inline std::string to_a1(CellAddr a) { return column_label(a.col) + std::to_string(a.row); }

namespace detail {

// Parses the letter run of an A1 address. Returns the column, or nullopt on
// overflow past the grid width.
inline std::optional<std::int32_t> decode_column(std::string_view letters) {
    std::int64_t col = 0;
    for (char ch : letters) {
        col = col * 26 + (std::toupper(static_cast<unsigned char>(ch)) - 'A' + 1);
        if (col > kMaxCols) return std::nullopt;
    }
    return static_cast<std::int32_t>(col);
}

inline std::optional<std::int32_t> decode_row(std::string_view digits) {
    if (digits.empty() || digits.front() == '0') return std::nullopt;
    std::int64_t row = 0;
    for (char ch : digits) {
        row = row * 10 + (ch - '0');
        if (row > kMaxRows) return std::nullopt;
    }
    return static_cast<std::int32_t>(row);
}

inline bool is_alpha(char ch) { return std::isalpha(static_cast<unsigned char>(ch)) != 0; }
inline bool is_digit(char ch) { return ch >= '0' && ch <= '9'; }

} // namespace detail

inline CellAddr parse_a1(std::string_view text) {
    std::size_t i = 0;
    while (i < text.size() && detail::is_alpha(text[i])) ++i;
    std::size_t letters_end = i;
    while (i < text.size() && detail::is_digit(text[i])) ++i;
    if (letters_end == 0 || letters_end == text.size() || i != text.size()) {
        throw Error(ErrorCode::MalformedAddress, "not an A1 address: '" + std::string(text) + "'");
    }
    auto col = detail::decode_column(text.substr(0, letters_end));
    auto row = detail::decode_row(text.substr(letters_end));
    if (!col || !row) {
        throw Error(ErrorCode::MalformedAddress, "address outside the grid: '" + std::string(text) + "'");
    }
    return CellAddr{*row, *col};
}

enum class CellKind { Empty, Number, Text, Formula };

inline std::string_view to_string(CellKind kind) {
    switch (kind) {
    case CellKind::Empty: return "empty";
    case CellKind::Number: return "number";
    case CellKind::Text: return "text";
    case CellKind::Formula: return "formula";
    }
    return "empty";
}

namespace detail {

// Finite decimal: optional sign, digits with optional fraction, optional exponent.
inline std::optional<double> parse_decimal(std::string_view s) {
    std::size_t i = 0;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
    std::size_t int_digits = 0, frac_digits = 0;
    while (i < s.size() && is_digit(s[i])) ++i, ++int_digits;
    if (i < s.size() && s[i] == '.') {
        ++i;
        while (i < s.size() && is_digit(s[i])) ++i, ++frac_digits;
    }
    if (int_digits + frac_digits == 0) return std::nullopt;
    if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
        ++i;
        if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
        std::size_t exp_digits = 0;
        while (i < s.size() && is_digit(s[i])) ++i, ++exp_digits;
        if (exp_digits == 0) return std::nullopt;
    }
    if (i != s.size()) return std::nullopt;

    std::string_view body = s;
    bool negative = false;
    if (body.front() == '+' || body.front() == '-') {
        negative = body.front() == '-';
        body.remove_prefix(1);
    }
    // from_chars rejects a bare leading '.' on some libstdc++ versions.
    std::string buffer;
    if (body.front() == '.') {
        buffer = "0" + std::string(body);
        body = buffer;
    }
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), value);
    if (ec != std::errc() || ptr != body.data() + body.size() || !std::isfinite(value)) return std::nullopt;
    return negative ? -value : value;
}

} // namespace detail

/// One cell's payload. `text` holds the source text for every non-empty kind,
/// so a Number keeps its original spelling for round-tripping.
struct CellContent {
    CellKind kind = CellKind::Empty;
    std::string text;
    double number = 0.0;

    /// Classifies a raw CSV/JSON field.
    static CellContent from_field(std::string_view field) {
        if (field.empty()) return {};
        if (field.front() == '=') return {CellKind::Formula, std::string(field), 0.0};
        if (auto value = detail::parse_decimal(field)) return {CellKind::Number, std::string(field), *value};
        return {CellKind::Text, std::string(field), 0.0};
    }

    bool operator==(const CellContent& other) const {
        return kind == other.kind && text == other.text;
    }
};

struct Extent {
    CellAddr top_left;
    CellAddr bottom_right;
};

class Sheet {
public:
    Sheet() = default;
    explicit Sheet(std::string name) : name_(std::move(name)) {}

    const std::string& name() const noexcept { return name_; }

    /// Stores a cell; an Empty content removes the address.
    void set(CellAddr addr, CellContent content) {
        if (!in_grid(addr.row, addr.col)) {
            throw Error(ErrorCode::MalformedWorkbook, "cell outside the grid: row " + std::to_string(addr.row)
                                                          + ", col " + std::to_string(addr.col));
        }
        if (content.kind == CellKind::Empty) {
            cells_.erase(addr);
        } else {
            cells_[addr] = std::move(content);
        }
    }

    void set(std::string_view a1, std::string_view field) { set(parse_a1(a1), CellContent::from_field(field)); }

    const CellContent* find(CellAddr addr) const {
        auto it = cells_.find(addr);
        return it == cells_.end() ? nullptr : &it->second;
    }

    bool is_formula(CellAddr addr) const {
        const auto* c = find(addr);
        return c != nullptr && c->kind == CellKind::Formula;
    }

    const std::map<CellAddr, CellContent>& cells() const noexcept { return cells_; }
    bool empty() const noexcept { return cells_.empty(); }

    std::optional<Extent> extent() const {
        if (cells_.empty()) return std::nullopt;
        Extent e{cells_.begin()->first, cells_.begin()->first};
        for (const auto& [addr, _] : cells_) {
            e.top_left.row = std::min(e.top_left.row, addr.row);
            e.top_left.col = std::min(e.top_left.col, addr.col);
            e.bottom_right.row = std::max(e.bottom_right.row, addr.row);
            e.bottom_right.col = std::max(e.bottom_right.col, addr.col);
        }
        return e;
    }

    bool operator==(const Sheet& other) const { return name_ == other.name_ && cells_ == other.cells_; }

private:
    std::string name_ = "Sheet1";
    std::map<CellAddr, CellContent> cells_;
};

/// Formula cells in row-major order.
inline std::vector<CellAddr> formula_cells(const Sheet& sheet) {
    std::vector<CellAddr> out;
    for (const auto& [addr, content] : sheet.cells()) {
        if (content.kind == CellKind::Formula) out.push_back(addr);
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV (RFC 4180)

namespace detail {

inline Error csv_error(std::size_t line, const std::string& what) {
    return Error(ErrorCode::MalformedWorkbook, "CSV line " + std::to_string(line) + ": " + what);
}

} // namespace detail

inline Sheet load_csv(std::string_view source, std::string name = "Sheet1") {
    Sheet sheet(std::move(name));
    std::int64_t row = 1, col = 1;
    std::size_t line = 1;
    std::string field;
    std::size_t i = 0;
    const std::size_t n = source.size();

    auto commit = [&] {
        if (!field.empty()) {
            if (!in_grid(row, col)) throw detail::csv_error(line, "cell beyond the maximum grid extent");
            sheet.set(CellAddr{static_cast<std::int32_t>(row), static_cast<std::int32_t>(col)},
                      CellContent::from_field(field));
        }
        field.clear();
    };

    if (n >= 3 && source.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
    if (i == n) return sheet;

    while (true) {
        // one field
        if (i < n && source[i] == '"') {
            ++i;
            bool closed = false;
            while (i < n) {
                char ch = source[i];
                if (ch == '"') {
                    if (i + 1 < n && source[i + 1] == '"') {
                        field.push_back('"');
                        i += 2;
                    } else {
                        ++i;
                        closed = true;
                        break;
                    }
                } else {
                    if (ch == '\n') ++line;
                    field.push_back(ch);
                    ++i;
                }
            }
            if (!closed) throw detail::csv_error(line, "unterminated quoted field");
            if (i < n && source[i] != ',' && source[i] != '\n' && source[i] != '\r') {
                throw detail::csv_error(line, "unexpected character after closing quote");
            }
        } else {
            while (i < n && source[i] != ',' && source[i] != '\n' && source[i] != '\r') {
                if (source[i] == '"') throw detail::csv_error(line, "quote inside unquoted field");
                field.push_back(source[i]);
                ++i;
            }
        }
        commit();

        if (i >= n) break;
        if (source[i] == ',') {
            ++i;
            ++col;
            continue;
        }
        // record terminator: \n, \r\n or bare \r
        if (source[i] == '\r') ++i;
        if (i < n && source[i] == '\n') ++i;
        ++line;
        if (i >= n) break;
        ++row;
        col = 1;
    }
    return sheet;
}

namespace detail {

inline std::string csv_quote(std::string_view text) {
    if (text.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(text);
    std::string out = "\"";
    for (char ch : text) {
        if (ch == '"') out.push_back('"');
        out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

} // namespace detail

/// Canonical CSV: the full rectangle from A1 to the extent's bottom-right,
/// LF line endings, quoting only where required.
inline std::string to_csv(const Sheet& sheet) {
    auto extent = sheet.extent();
    if (!extent) return {};
    std::string out;
    for (std::int32_t r = 1; r <= extent->bottom_right.row; ++r) {
        for (std::int32_t c = 1; c <= extent->bottom_right.col; ++c) {
            if (c > 1) out.push_back(',');
            if (const auto* cell = sheet.find({r, c})) out += detail::csv_quote(cell->text);
        }
        out.push_back('\n');
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON workbook: { "name": "...", "cells": { "A1": "field", ... } }
// optionally wrapped as { "sheets": [ <one sheet> ] }.

inline Sheet load_json(std::string_view source) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(source);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::MalformedWorkbook, std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw Error(ErrorCode::MalformedWorkbook, "workbook must be a JSON object");
    if (doc.contains("sheets")) {
        const auto& sheets = doc["sheets"];
        if (!sheets.is_array() || sheets.empty()) {
            throw Error(ErrorCode::MalformedWorkbook, "'sheets' must be a non-empty array");
        }
        if (sheets.size() > 1) {
            throw Error(ErrorCode::MultipleSheets,
                        "workbook has " + std::to_string(sheets.size()) + " sheets; exactly one is supported");
        }
        doc = sheets.front();
        if (!doc.is_object()) throw Error(ErrorCode::MalformedWorkbook, "sheet entry must be a JSON object");
    }

    std::string name = "Sheet1";
    if (doc.contains("name")) {
        if (!doc["name"].is_string()) throw Error(ErrorCode::MalformedWorkbook, "'name' must be a string");
        name = doc["name"].get<std::string>();
    }
    Sheet sheet(name);
    if (!doc.contains("cells")) return sheet;
    const auto& cells = doc["cells"];
    if (!cells.is_object()) throw Error(ErrorCode::MalformedWorkbook, "'cells' must be an object");
    for (const auto& [key, value] : cells.items()) {
        if (!value.is_string()) {
            throw Error(ErrorCode::MalformedWorkbook, "cell '" + key + "' must hold a string");
        }
        CellAddr addr;
        try {
            addr = parse_a1(key);
        } catch (const Error& e) {
            throw Error(ErrorCode::MalformedWorkbook, e.what());
        }
        sheet.set(addr, CellContent::from_field(value.get<std::string>()));
    }
    return sheet;
}

enum class WorkbookFormat { Csv, Json };

inline Sheet load_workbook(std::string_view source, WorkbookFormat format) {
    return format == WorkbookFormat::Csv ? load_csv(source) : load_json(source);
}

/// FNV-1a over the sheet name and canonical CSV; identifies analysis input.
inline std::string sheet_digest(const Sheet& sheet) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::string_view s) {
        for (unsigned char ch : s) {
            h ^= ch;
            h *= 0x100000001b3ULL;
        }
    };
    mix(sheet.name());
    mix("\n");
    mix(to_csv(sheet));
    static constexpr char hex[] = "0123456789abcdef";
    std::string out = "fnv1a64:";
    for (int shift = 60; shift >= 0; shift -= 4) out.push_back(hex[(h >> shift) & 0xF]);
    return out;
}

} // namespace sheetaudit
