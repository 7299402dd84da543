#pragma once

#include "sheetaudit/equivalence.hpp"
#include "sheetaudit/error.hpp"
#include "sheetaudit/formula.hpp"
#include "sheetaudit/grid.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace sheetaudit {

/// Gap tolerance of a semantic unit: per-step column distance, row distance
/// and Manhattan distance between connected member cells.
struct GeometryParams {
    std::int32_t d_h = 1;
    std::int32_t d_v = 0;
    std::optional<std::int32_t> d_man;  // defaults to d_h + d_v

    std::int32_t manhattan() const { return d_man.value_or(d_h + d_v); }

    void validate() const {
        if (d_h < 0 || d_v < 0) throw Error(ErrorCode::InvalidParameters, "d_h and d_v must be >= 0");
        if (manhattan() < 1) throw Error(ErrorCode::InvalidParameters, "d_man must be >= 1");
        if (manhattan() > d_h + d_v) throw Error(ErrorCode::InvalidParameters, "d_man must not exceed d_h + d_v");
    }
};

struct ClassParams {
    GeometryParams geometry;
    EqLevel eq_start = EqLevel::Copy;
    EqLevel eq_rest = EqLevel::Copy;
};

struct Offset {
    std::int32_t drow = 0;
    std::int32_t dcol = 0;

    friend auto operator<=>(const Offset&, const Offset&) = default;
};

inline CellAddr operator+(CellAddr a, Offset o) { return {a.row + o.drow, a.col + o.dcol}; }

/// True when a step from one offset/cell to another is allowed by `g`.
inline bool step_allowed(std::int64_t drow, std::int64_t dcol, const GeometryParams& g) {
    drow = std::llabs(drow);
    dcol = std::llabs(dcol);
    return dcol <= g.d_h && drow <= g.d_v && drow + dcol <= g.manhattan();
}

inline bool neighbor(CellAddr a, CellAddr b, const GeometryParams& g) {
    if (a == b) return false;
    return step_allowed(std::int64_t{a.row} - b.row, std::int64_t{a.col} - b.col, g);
}

struct SemanticUnit {
    CellAddr anchor;
    std::vector<Offset> shape;  // sorted, contains {0,0}

    std::vector<CellAddr> members() const {
        std::vector<CellAddr> out;
        out.reserve(shape.size());
        for (Offset o : shape) out.push_back(anchor + o);
        return out;
    }
};

struct SemanticClass {
    std::vector<Offset> shape;
    std::vector<SemanticUnit> units;  // row-major by anchor
    EqKey start_key;
    std::vector<std::pair<Offset, EqKey>> rest_keys;  // one per non-anchor offset

    bool singleton() const { return units.size() == 1; }
};

/// "0,0;0,1" style rendering of a sorted shape.
inline std::string shape_signature(const std::vector<Offset>& shape) {
    std::vector<Offset> sorted = shape;
    std::sort(sorted.begin(), sorted.end());
    std::string out;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (i) out.push_back(';');
        out += std::to_string(sorted[i].drow) + "," + std::to_string(sorted[i].dcol);
    }
    return out;
}

inline std::string shape_signature(const SemanticUnit& unit) { return shape_signature(unit.shape); }

namespace detail {

// Lockstep growth of all units of one eq_start group at once.
class ClassGrower {
public:
    ClassGrower(const ParsedSheet& parsed, const ClassParams& params) : parsed_(parsed), params_(params) {
        const auto& entries = parsed.entries();
        start_ids_.reserve(entries.size());
        rest_ids_.reserve(entries.size());
        for (const auto& e : entries) {
            start_ids_.push_back(intern(start_keys_, fingerprint(e.ast, params.eq_start).fingerprint));
            rest_ids_.push_back(intern(rest_keys_, fingerprint(e.ast, params.eq_rest).fingerprint));
        }
        consumed_.assign(entries.size(), false);
        start_names_ = names_of(start_keys_);
        rest_names_ = names_of(rest_keys_);
    }

    std::vector<SemanticClass> run() {
        const auto& entries = parsed_.entries();
        std::vector<std::vector<std::size_t>> groups;
        std::unordered_map<int, std::size_t> group_of;
        for (std::size_t i = 0; i < entries.size(); ++i) {
            auto [it, inserted] = group_of.try_emplace(start_ids_[i], groups.size());
            if (inserted) groups.emplace_back();
            groups[it->second].push_back(i);
        }
        for (const auto& group : groups) {
            Subgroup sub;
            for (std::size_t idx : group) {
                if (!consumed_[idx]) sub.anchors.push_back(idx);
            }
            if (sub.anchors.empty()) continue;
            claimed_.clear();
            for (std::size_t idx : sub.anchors) claimed_.insert(idx);
            sub.shape = {Offset{0, 0}};
            grow(std::move(sub));
        }
        std::sort(classes_.begin(), classes_.end(), [](const SemanticClass& a, const SemanticClass& b) {
            return a.units.front().anchor < b.units.front().anchor;
        });
        return std::move(classes_);
    }

private:
    static constexpr int kNone = -1;

    struct Subgroup {
        std::vector<std::size_t> anchors;  // entry indices, row-major
        std::vector<Offset> shape;
        std::set<Offset> rejected;
    };

    static int intern(std::unordered_map<std::string, int>& table, std::string key) {
        auto [it, inserted] = table.try_emplace(std::move(key), static_cast<int>(table.size()));
        return it->second;
    }

    static std::vector<std::string> names_of(const std::unordered_map<std::string, int>& table) {
        std::vector<std::string> names(table.size());
        for (const auto& [name, id] : table) names[id] = name;
        return names;
    }

    // eq_rest key id of the cell at anchor+o, or kNone when it cannot join.
    int rest_key_at(std::size_t anchor, Offset o, std::size_t* cell_index) const {
        CellAddr a = parsed_.entries()[anchor].addr;
        std::int64_t row = std::int64_t{a.row} + o.drow, col = std::int64_t{a.col} + o.dcol;
        if (!in_grid(row, col)) return kNone;
        std::size_t idx = parsed_.index_of(CellAddr{static_cast<std::int32_t>(row), static_cast<std::int32_t>(col)});
        if (idx == ParsedSheet::npos || consumed_[idx] || claimed_.count(idx)) return kNone;
        *cell_index = idx;
        return rest_ids_[idx];
    }

    std::vector<Offset> frontier(const Subgroup& sub) const {
        const GeometryParams& g = params_.geometry;
        std::set<Offset> out;
        std::set<Offset> in_shape(sub.shape.begin(), sub.shape.end());
        for (Offset s : sub.shape) {
            for (std::int32_t dr = -g.d_v; dr <= g.d_v; ++dr) {
                for (std::int32_t dc = -g.d_h; dc <= g.d_h; ++dc) {
                    if ((dr == 0 && dc == 0) || !step_allowed(dr, dc, g)) continue;
                    Offset o{s.drow + dr, s.dcol + dc};
                    // the anchor stays the top-left (row-major minimum) member
                    if (o <= Offset{0, 0}) continue;
                    if (in_shape.count(o) || sub.rejected.count(o)) continue;
                    out.insert(o);
                }
            }
        }
        return {out.begin(), out.end()};
    }

    void grow(Subgroup sub) {
        if (sub.anchors.size() == 1) {
            freeze(sub);
            return;
        }
        while (true) {
            auto candidates = frontier(sub);
            if (candidates.empty()) break;
            for (Offset o : candidates) {
                std::map<int, std::vector<std::size_t>> by_key;
                std::vector<std::size_t> targets(sub.anchors.size(), ParsedSheet::npos);
                for (std::size_t i = 0; i < sub.anchors.size(); ++i) {
                    by_key[rest_key_at(sub.anchors[i], o, &targets[i])].push_back(sub.anchors[i]);
                }
                if (by_key.size() == 1) {
                    if (by_key.begin()->first == kNone) {
                        sub.rejected.insert(o);
                    } else {
                        sub.shape.push_back(o);
                        for (std::size_t t : targets) claimed_.insert(t);
                    }
                    continue;
                }
                split(std::move(sub), std::move(by_key));
                return;
            }
        }
        freeze(sub);
    }

    void split(Subgroup sub, std::map<int, std::vector<std::size_t>> by_key) {
        if (auto none = by_key.find(kNone); none != by_key.end()) {
            freeze(Subgroup{std::move(none->second), sub.shape, {}});
            by_key.erase(none);
        }
        std::vector<std::vector<std::size_t>> parts;
        for (auto& [_, anchors] : by_key) parts.push_back(std::move(anchors));
        const auto& entries = parsed_.entries();
        std::sort(parts.begin(), parts.end(), [&](const auto& a, const auto& b) {
            if (a.size() != b.size()) return a.size() > b.size();
            return entries[a.front()].addr < entries[b.front()].addr;
        });
        for (auto& part : parts) grow(Subgroup{std::move(part), sub.shape, sub.rejected});
    }

    void freeze(const Subgroup& sub) {
        const auto& entries = parsed_.entries();
        SemanticClass cls;
        cls.shape = sub.shape;
        std::sort(cls.shape.begin(), cls.shape.end());
        std::vector<std::size_t> anchors = sub.anchors;
        std::sort(anchors.begin(), anchors.end(),
                  [&](std::size_t a, std::size_t b) { return entries[a].addr < entries[b].addr; });
        for (std::size_t idx : anchors) {
            CellAddr anchor = entries[idx].addr;
            cls.units.push_back(SemanticUnit{anchor, cls.shape});
            for (Offset o : cls.shape) {
                std::size_t member = parsed_.index_of(anchor + o);
                consumed_[member] = true;
            }
        }
        std::size_t first = anchors.front();
        cls.start_key = EqKey{params_.eq_start, start_names_[start_ids_[first]]};
        for (Offset o : cls.shape) {
            if (o == Offset{0, 0}) continue;
            std::size_t member = parsed_.index_of(entries[first].addr + o);
            cls.rest_keys.emplace_back(o, EqKey{params_.eq_rest, rest_names_[rest_ids_[member]]});
        }
        classes_.push_back(std::move(cls));
    }

    const ParsedSheet& parsed_;
    ClassParams params_;
    std::unordered_map<std::string, int> start_keys_, rest_keys_;
    std::vector<std::string> start_names_, rest_names_;
    std::vector<int> start_ids_, rest_ids_;
    std::vector<bool> consumed_;
    std::unordered_set<std::size_t> claimed_;
    std::vector<SemanticClass> classes_;
};

} // namespace detail

/// Groups formula cells into semantic classes.
///
/// Cells sharing an eq_start key are anchor candidates of one group,
/// processed in row-major order of their first member. The group's units grow
/// together from the anchor: each frontier offset (reachable by one allowed
/// step, scanned row-major) is added when every live anchor sees an unclaimed
/// formula cell there with the same eq_rest key. Disagreement splits the group;
/// anchors that see nothing freeze at the current shape, the rest continue
/// largest-first. One-anchor groups freeze immediately. A cell belongs to the
/// first class that freezes with it.
inline std::vector<SemanticClass> grow_classes(const ParsedSheet& parsed, const ClassParams& params) {
    params.geometry.validate();
    return detail::ClassGrower(parsed, params).run();
}

inline std::vector<SemanticClass> grow_classes(const Sheet& sheet, const ClassParams& params) {
    return grow_classes(ParsedSheet(sheet), params);
}

// ---------------------------------------------------------------------------
// Layout pattern outliers

struct OutlierReport {
    std::optional<Offset> stride;            // single-axis anchor progression, if detected
    double agreement = 0.0;                  // share of consecutive deltas consistent with the modal delta
    std::vector<CellAddr> off_pattern;       // anchors not on the progression
    std::vector<CellAddr> gaps;              // progression positions with no unit
    std::vector<CellAddr> holes;             // formula cells in the class region but in no unit
};

inline constexpr double kStrideAgreement = 0.8;

inline OutlierReport pattern_outliers(const SemanticClass& cls, const Sheet& sheet) {
    if (cls.units.size() < 3) {
        throw Error(ErrorCode::TooFewUnits, "no pattern basis: class has " + std::to_string(cls.units.size())
                                                + " unit(s), at least 3 are needed");
    }
    OutlierReport report;
    std::vector<CellAddr> anchors;
    for (const auto& u : cls.units) anchors.push_back(u.anchor);
    std::sort(anchors.begin(), anchors.end());

    std::vector<Offset> deltas;
    for (std::size_t i = 1; i < anchors.size(); ++i) {
        deltas.push_back({anchors[i].row - anchors[i - 1].row, anchors[i].col - anchors[i - 1].col});
    }
    std::map<Offset, std::size_t> counts;
    for (Offset d : deltas) ++counts[d];
    Offset modal = deltas.front();
    std::size_t best = 0;
    for (const auto& [d, n] : counts) {
        auto size = [](Offset o) { return std::abs(o.drow) + std::abs(o.dcol); };
        if (n > best || (n == best && size(d) < size(modal))) {
            modal = d;
            best = n;
        }
    }

    bool single_axis = (modal.drow > 0 && modal.dcol == 0) || (modal.drow == 0 && modal.dcol > 0);
    auto multiple_of_modal = [&](Offset d) -> std::int64_t {
        if (modal.dcol == 0) return d.dcol == 0 && d.drow > 0 && d.drow % modal.drow == 0 ? d.drow / modal.drow : 0;
        return d.drow == 0 && d.dcol > 0 && d.dcol % modal.dcol == 0 ? d.dcol / modal.dcol : 0;
    };
    if (single_axis) {
        std::size_t agree = 0;
        for (Offset d : deltas) agree += multiple_of_modal(d) > 0 ? 1 : 0;
        report.agreement = static_cast<double>(agree) / static_cast<double>(deltas.size());
    }
    if (single_axis && report.agreement >= kStrideAgreement) {
        report.stride = modal;
        CellAddr base = anchors.front();
        std::set<CellAddr> present(anchors.begin(), anchors.end());
        CellAddr last_on = base;
        for (CellAddr a : anchors) {
            Offset d{a.row - base.row, a.col - base.col};
            if (a == base || multiple_of_modal(d) > 0) {
                last_on = a;
            } else {
                report.off_pattern.push_back(a);
            }
        }
        for (CellAddr p = base; p < last_on; p = p + modal) {
            if (!present.count(p)) report.gaps.push_back(p);
        }
    }

    std::set<CellAddr> in_units;
    Extent region{cls.units.front().anchor, cls.units.front().anchor};
    for (const auto& u : cls.units) {
        for (CellAddr m : u.members()) {
            in_units.insert(m);
            region.top_left.row = std::min(region.top_left.row, m.row);
            region.top_left.col = std::min(region.top_left.col, m.col);
            region.bottom_right.row = std::max(region.bottom_right.row, m.row);
            region.bottom_right.col = std::max(region.bottom_right.col, m.col);
        }
    }
    const auto& cells = sheet.cells();
    for (std::int32_t r = region.top_left.row; r <= region.bottom_right.row; ++r) {
        for (auto it = cells.lower_bound({r, region.top_left.col});
             it != cells.end() && it->first.row == r && it->first.col <= region.bottom_right.col; ++it) {
            if (it->second.kind == CellKind::Formula && !in_units.count(it->first)) report.holes.push_back(it->first);
        }
    }
    return report;
}

} // namespace sheetaudit
