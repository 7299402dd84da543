#pragma once

#include "sheetaudit/error.hpp"
#include "sheetaudit/formula.hpp"
#include "sheetaudit/grid.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sheetaudit {

/// Similarity levels, finest first. Copy-equal implies Logical-equal implies
/// Structural-equal.
enum class EqLevel : std::uint8_t { Copy = 0, Logical = 1, Structural = 2 };

inline std::string_view to_string(EqLevel level) {
    switch (level) {
    case EqLevel::Copy: return "copy";
    case EqLevel::Logical: return "logical";
    case EqLevel::Structural: return "structural";
    }
    return "copy";
}

/// Accepts the lowercase names only.
inline std::optional<EqLevel> parse_level(std::string_view text) {
    if (text == "copy") return EqLevel::Copy;
    if (text == "logical") return EqLevel::Logical;
    if (text == "structural") return EqLevel::Structural;
    return std::nullopt;
}

struct EqKey {
    EqLevel level = EqLevel::Copy;
    std::string fingerprint;

    friend bool operator==(const EqKey&, const EqKey&) = default;
    friend auto operator<=>(const EqKey&, const EqKey&) = default;
};

namespace detail {

inline void fingerprint_axis(std::string& out, char axis, RefMode mode, std::int32_t value, EqLevel level) {
    out.push_back(axis);
    if (mode == RefMode::Relative) {
        out.push_back('[');
        out += std::to_string(value);
        out.push_back(']');
    } else if (level == EqLevel::Copy) {
        out += std::to_string(value);
    } else {
        out.push_back('#');
    }
}

inline void fingerprint_ref(std::string& out, const CellRef& ref, EqLevel level) {
    if (level == EqLevel::Structural) {
        out.push_back('@');
        return;
    }
    fingerprint_axis(out, 'R', ref.row_mode, ref.row, level);
    fingerprint_axis(out, 'C', ref.col_mode, ref.col, level);
}

inline void fingerprint_into(std::string& out, const Ast& ast, EqLevel level) {
    switch (ast.kind) {
    case NodeKind::Number:
        if (level == EqLevel::Copy) {
            out.push_back('n');
            out += format_number(ast.number);
        } else {
            out.push_back('k');
        }
        break;
    case NodeKind::Text:
        if (level == EqLevel::Copy) {
            out += "t\"";
            for (char ch : ast.text) {
                if (ch == '"' || ch == '\\') out.push_back('\\');
                out.push_back(ch);
            }
            out.push_back('"');
        } else {
            out.push_back('k');
        }
        break;
    case NodeKind::Ref: fingerprint_ref(out, ast.ref, level); break;
    case NodeKind::Range:
        out.push_back('<');
        fingerprint_ref(out, ast.ref, level);
        out.push_back(':');
        fingerprint_ref(out, ast.ref_end, level);
        out.push_back('>');
        break;
    case NodeKind::Call:
        out += ast.text;
        out.push_back('(');
        for (std::size_t i = 0; i < ast.children.size(); ++i) {
            if (i) out.push_back(',');
            fingerprint_into(out, ast.children[i], level);
        }
        out.push_back(')');
        break;
    case NodeKind::Binary:
        out += symbol(ast.op);
        out.push_back('{');
        fingerprint_into(out, ast.children[0], level);
        out.push_back(',');
        fingerprint_into(out, ast.children[1], level);
        out.push_back('}');
        break;
    case NodeKind::Negate:
        out += "~{";
        fingerprint_into(out, ast.children[0], level);
        out.push_back('}');
        break;
    }
}

} // namespace detail

/// Canonical serialization of `ast` with level-specific masking:
///   copy        nothing masked
///   logical     absolute coordinates and literals masked, relative offsets kept
///   structural  every reference and literal masked; operators, function
///               names, arity and range-ness kept
inline EqKey fingerprint(const Ast& ast, EqLevel level) {
    EqKey key{level, {}};
    detail::fingerprint_into(key.fingerprint, ast, level);
    return key;
}

struct LogicalArea {
    EqLevel level = EqLevel::Copy;
    EqKey key;
    std::vector<CellAddr> members;  // row-major
};

/// All logical areas of one sheet at one level.
struct Partition {
    EqLevel level = EqLevel::Copy;
    std::vector<LogicalArea> areas;  // ordered by first member
};

inline Partition logical_areas(const ParsedSheet& parsed, EqLevel level) {
    Partition out{level, {}};
    std::unordered_map<std::string, std::size_t> by_key;
    for (const auto& entry : parsed.entries()) {
        EqKey key = fingerprint(entry.ast, level);
        auto [it, inserted] = by_key.try_emplace(key.fingerprint, out.areas.size());
        if (inserted) out.areas.push_back(LogicalArea{level, std::move(key), {}});
        out.areas[it->second].members.push_back(entry.addr);
    }
    return out;
}

inline Partition logical_areas(const Sheet& sheet, EqLevel level) { return logical_areas(ParsedSheet(sheet), level); }

struct AreaSplit {
    std::size_t coarse_index = 0;
    std::vector<std::size_t> fine_indices;
    bool hotspot = false;  // splits into two or more fine areas
};

struct DiffReport {
    EqLevel fine_level = EqLevel::Copy;
    EqLevel coarse_level = EqLevel::Structural;
    std::vector<AreaSplit> splits;       // one per coarse area, same order
    std::vector<std::size_t> hotspots;   // coarse indices flagged
};

/// Shows how each coarse area breaks up at the finer level.
inline DiffReport compare_partitions(const Partition& fine, const Partition& coarse) {
    if (fine.level >= coarse.level) {
        throw Error(ErrorCode::LevelMismatch, std::string("fine level '") + std::string(to_string(fine.level))
                                                  + "' is not finer than '" + std::string(to_string(coarse.level))
                                                  + "'");
    }
    std::unordered_map<CellAddr, std::size_t, CellAddrHash> coarse_of;
    for (std::size_t i = 0; i < coarse.areas.size(); ++i) {
        for (CellAddr a : coarse.areas[i].members) coarse_of[a] = i;
    }

    DiffReport report{fine.level, coarse.level, {}, {}};
    report.splits.resize(coarse.areas.size());
    for (std::size_t i = 0; i < coarse.areas.size(); ++i) report.splits[i].coarse_index = i;

    for (std::size_t f = 0; f < fine.areas.size(); ++f) {
        const auto& members = fine.areas[f].members;
        if (members.empty()) continue;
        auto it = coarse_of.find(members.front());
        if (it == coarse_of.end()) {
            throw Error(ErrorCode::SheetMismatch, to_a1(members.front()) + " is missing from the coarse partition");
        }
        for (CellAddr a : members) {
            auto other = coarse_of.find(a);
            if (other == coarse_of.end() || other->second != it->second) {
                throw Error(ErrorCode::SheetMismatch, "fine area containing " + to_a1(a)
                                                          + " is not nested in a single coarse area");
            }
        }
        report.splits[it->second].fine_indices.push_back(f);
    }
    for (auto& split : report.splits) {
        split.hotspot = split.fine_indices.size() >= 2;
        if (split.hotspot) report.hotspots.push_back(split.coarse_index);
    }
    return report;
}

/// A literal found in a formula.
struct Literal {
    bool is_text = false;
    double number = 0.0;
    std::string text;

    friend bool operator==(const Literal&, const Literal&) = default;
};

struct CellConstants {
    CellAddr cell;
    std::vector<Literal> literals;  // source order
};

namespace detail {

inline void collect_literals(const Ast& ast, std::vector<Literal>& out) {
    switch (ast.kind) {
    case NodeKind::Number: out.push_back({false, ast.number, {}}); return;
    case NodeKind::Text: out.push_back({true, 0.0, ast.text}); return;
    case NodeKind::Negate:
        // "-1" reads as one constant
        if (ast.children[0].kind == NodeKind::Number) {
            out.push_back({false, -ast.children[0].number, {}});
            return;
        }
        break;
    default: break;
    }
    for (const auto& child : ast.children) collect_literals(child, out);
}

} // namespace detail

/// Every formula cell that embeds at least one literal, row-major.
inline std::vector<CellConstants> constants_report(const ParsedSheet& parsed) {
    std::vector<CellConstants> out;
    for (const auto& entry : parsed.entries()) {
        CellConstants cc{entry.addr, {}};
        detail::collect_literals(entry.ast, cc.literals);
        if (!cc.literals.empty()) out.push_back(std::move(cc));
    }
    return out;
}

inline std::vector<CellConstants> constants_report(const Sheet& sheet) { return constants_report(ParsedSheet(sheet)); }

} // namespace sheetaudit
