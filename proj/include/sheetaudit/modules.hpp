#pragma once

#include "sheetaudit/ddg.hpp"
#include "sheetaudit/error.hpp"
#include "sheetaudit/grid.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sheetaudit {

// ---------------------------------------------------------------------------
// Result-cell curation

struct CurationStep {
    CellAddr excluded;
    std::vector<CellAddr> promoted;  // predecessors that became sinks
};

/// Candidate result cells. `active` holds exactly the sinks of the graph with
/// the excluded cells removed, kept row-major.
struct SinkCuration {
    std::vector<CellAddr> active;
    std::set<CellAddr> excluded;
    std::vector<CurationStep> history;

    friend bool operator==(const SinkCuration& a, const SinkCuration& b) {
        if (a.active != b.active || a.excluded != b.excluded || a.history.size() != b.history.size()) return false;
        for (std::size_t i = 0; i < a.history.size(); ++i) {
            if (a.history[i].excluded != b.history[i].excluded || a.history[i].promoted != b.history[i].promoted) {
                return false;
            }
        }
        return true;
    }
};

/// Throws CyclicDDG, with the cycle as details, unless `g` is acyclic.
inline void require_acyclic(const Ddg& g) {
    auto check = check_acyclic(g);
    if (check.ok) return;
    std::vector<std::string> path;
    for (CellAddr a : check.cycle) path.push_back(to_a1(a));
    throw Error(ErrorCode::CyclicDDG, "dependency graph contains a cycle", std::move(path));
}

inline SinkCuration curate_init(const Ddg& g) {
    require_acyclic(g);
    return SinkCuration{sinks(g), {}, {}};
}

/// Removes a result candidate (e.g. a check-sum). Predecessors whose every
/// successor is now excluded take its place.
inline SinkCuration exclude_sink(SinkCuration cur, const Ddg& g, CellAddr cell) {
    auto pos = std::find(cur.active.begin(), cur.active.end(), cell);
    if (pos == cur.active.end()) throw Error(ErrorCode::NotASink, to_a1(cell) + " is not a current sink");
    cur.active.erase(pos);
    cur.excluded.insert(cell);

    CurationStep step{cell, {}};
    NodeId id = g.id_of(cell);
    for (NodeId p : g.predecessors(id)) {
        CellAddr pa = g.addr(p);
        if (cur.excluded.count(pa)) continue;
        const auto& succ = g.successors(p);
        bool all_excluded = std::all_of(succ.begin(), succ.end(),
                                        [&](NodeId s) { return cur.excluded.count(g.addr(s)) != 0; });
        if (all_excluded) step.promoted.push_back(pa);
    }
    for (CellAddr a : step.promoted) cur.active.insert(std::upper_bound(cur.active.begin(), cur.active.end(), a), a);
    cur.history.push_back(std::move(step));
    return cur;
}

/// Undoes the exclusion of `cell` by replaying the history without it. Fails
/// with NotRestorable when a later exclusion depended on it.
inline SinkCuration restore_sink(const SinkCuration& cur, const Ddg& g, CellAddr cell) {
    if (!cur.excluded.count(cell)) throw Error(ErrorCode::NotRestorable, to_a1(cell) + " is not excluded");
    SinkCuration replay = curate_init(g);
    for (const auto& step : cur.history) {
        if (step.excluded == cell) continue;
        try {
            replay = exclude_sink(std::move(replay), g, step.excluded);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NotASink) throw;
            throw Error(ErrorCode::NotRestorable, "restoring " + to_a1(cell) + " invalidates the later exclusion of "
                                                      + to_a1(step.excluded));
        }
    }
    return replay;
}

// ---------------------------------------------------------------------------
// Data modules

struct DataModule {
    CellAddr result;
    std::vector<CellAddr> members;  // row-major, includes result

    std::string id() const { return to_a1(result) + "-module"; }
};

inline std::string module_id(CellAddr result) { return to_a1(result) + "-module"; }

namespace detail {

// Cells that reach some result cell, results included.
inline std::vector<bool> result_scope(const Ddg& g, const std::vector<bool>& is_result) {
    std::vector<bool> in_scope(g.size(), false);
    std::vector<NodeId> stack;
    for (NodeId i = 0; i < g.size(); ++i) {
        if (is_result[i]) {
            in_scope[i] = true;
            stack.push_back(i);
        }
    }
    while (!stack.empty()) {
        NodeId u = stack.back();
        stack.pop_back();
        for (NodeId p : g.predecessors(u)) {
            if (!in_scope[p]) {
                in_scope[p] = true;
                stack.push_back(p);
            }
        }
    }
    return in_scope;
}

inline std::vector<bool> result_flags(const Ddg& g, const std::vector<CellAddr>& results) {
    std::vector<bool> flags(g.size(), false);
    for (CellAddr r : results) flags[g.id_of(r)] = true;
    return flags;
}

} // namespace detail

/// Partitions the cells that reach `results` into data modules, visiting
/// nodes in the given reverse topological order (sinks first).
///
/// A cell whose downstream paths (cut at result cells) end in more than one
/// result becomes a result itself; every other in-scope cell joins the single
/// result it feeds. Because a cell's status depends only on cells downstream
/// of it, one pass in reverse topological order reaches the fixpoint.
inline std::vector<DataModule> recover_modules(const Ddg& g, const std::vector<CellAddr>& results,
                                               std::span<const NodeId> reverse_topo) {
    constexpr NodeId kUnset = static_cast<NodeId>(-1);
    std::vector<bool> is_result = detail::result_flags(g, results);
    std::vector<bool> in_scope = detail::result_scope(g, is_result);
    std::vector<NodeId> owner(g.size(), kUnset);

    for (NodeId v : reverse_topo) {
        if (!in_scope[v]) continue;
        if (is_result[v]) {
            owner[v] = v;
            continue;
        }
        NodeId single = kUnset;
        bool multiple = false;
        for (NodeId s : g.successors(v)) {
            if (!in_scope[s]) continue;
            NodeId o = owner[s];
            if (o == kUnset) throw Error(ErrorCode::CyclicDDG, "visit order is not reverse topological");
            if (single == kUnset) {
                single = o;
            } else if (single != o) {
                multiple = true;
                break;
            }
        }
        if (multiple) {
            is_result[v] = true;
            owner[v] = v;
        } else {
            owner[v] = single;
        }
    }

    std::map<NodeId, std::vector<CellAddr>> grouped;
    for (NodeId v = 0; v < g.size(); ++v) {
        if (owner[v] != kUnset) grouped[owner[v]].push_back(g.addr(v));
    }
    std::vector<DataModule> modules;
    for (auto& [result, members] : grouped) modules.push_back(DataModule{g.addr(result), std::move(members)});
    return modules;
}

inline std::vector<DataModule> recover_modules(const Ddg& g, const std::vector<CellAddr>& results) {
    if (results.empty()) return {};
    auto order = reverse_topological_ids(g);
    return recover_modules(g, results, order);
}

inline std::vector<DataModule> recover_modules(const Ddg& g, const SinkCuration& cur) {
    return recover_modules(g, cur.active);
}

/// Nodes that neither reach an active result nor were excluded themselves.
inline std::vector<CellAddr> orphaned_cells(const Ddg& g, const SinkCuration& cur) {
    std::vector<bool> in_scope = detail::result_scope(g, detail::result_flags(g, cur.active));
    std::vector<CellAddr> out;
    for (NodeId v = 0; v < g.size(); ++v) {
        if (!in_scope[v] && !cur.excluded.count(g.addr(v))) out.push_back(g.addr(v));
    }
    return out;
}

struct BoundaryViolation {
    CellAddr from;
    CellAddr to;
    std::string from_module;
    std::string to_module;
};

/// Edges leaving a module from anything but its result cell.
inline std::vector<BoundaryViolation> module_boundary_check(const std::vector<DataModule>& modules, const Ddg& g) {
    std::vector<std::size_t> module_of(g.size(), static_cast<std::size_t>(-1));
    for (std::size_t m = 0; m < modules.size(); ++m) {
        for (CellAddr a : modules[m].members) module_of[g.id_of(a)] = m;
    }
    std::vector<BoundaryViolation> out;
    for (NodeId u = 0; u < g.size(); ++u) {
        std::size_t mu = module_of[u];
        if (mu == static_cast<std::size_t>(-1)) continue;
        for (NodeId v : g.successors(u)) {
            std::size_t mv = module_of[v];
            if (mv == static_cast<std::size_t>(-1) || mv == mu) continue;
            if (g.addr(u) != modules[mu].result) {
                out.push_back({g.addr(u), g.addr(v), modules[mu].id(), modules[mv].id()});
            }
        }
    }
    return out;
}

/// Accepts "A3-module" or a bare result address "A3".
inline const DataModule* find_module(const std::vector<DataModule>& modules, std::string_view id) {
    for (const auto& m : modules) {
        if (m.id() == id || to_a1(m.result) == id) return &m;
    }
    return nullptr;
}

} // namespace sheetaudit
