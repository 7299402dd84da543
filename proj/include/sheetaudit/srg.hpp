#pragma once

#include "sheetaudit/ddg.hpp"
#include "sheetaudit/error.hpp"
#include "sheetaudit/grid.hpp"
#include "sheetaudit/modules.hpp"
#include "sheetaudit/semantic.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace sheetaudit {

enum class VertexKind : std::uint8_t { Unit, Module, Cell };

inline std::string_view to_string(VertexKind kind) {
    switch (kind) {
    case VertexKind::Unit: return "unit";
    case VertexKind::Module: return "module";
    case VertexKind::Cell: return "cell";
    }
    return "cell";
}

enum class SrgOrigin : std::uint8_t { Units, Modules };

inline std::string_view to_string(SrgOrigin origin) { return origin == SrgOrigin::Units ? "units" : "modules"; }

struct SrgVertex {
    std::string id;
    VertexKind kind = VertexKind::Cell;
    std::vector<CellAddr> cells;  // row-major
    bool sink = false;
    bool singleton = false;
    bool curated = false;

    friend bool operator==(const SrgVertex&, const SrgVertex&) = default;
};

using CellEdge = std::pair<CellAddr, CellAddr>;

struct SrgEdge {
    std::string from;
    std::string to;
    std::vector<CellEdge> witnesses;  // DDG edges justifying this edge, sorted

    friend bool operator==(const SrgEdge&, const SrgEdge&) = default;
};

/// Set-relation graph: each vertex stands for a set of cells.
struct Srg {
    SrgOrigin origin = SrgOrigin::Modules;
    std::vector<SrgVertex> vertices;
    std::vector<SrgEdge> edges;  // sorted by (vertex position of from, of to)

    struct Fold {
        std::string focus;
        std::vector<SrgVertex> vertices;
        std::vector<SrgEdge> edges;
    };
    std::vector<Fold> folds;  // fish-eye expansions, innermost last

    const SrgVertex* find(std::string_view id) const {
        for (const auto& v : vertices) {
            if (v.id == id) return &v;
        }
        return nullptr;
    }

    friend bool operator==(const Srg& a, const Srg& b) {
        return a.origin == b.origin && a.vertices == b.vertices && a.edges == b.edges
            && a.folds.size() == b.folds.size();
    }
};

namespace detail {

// Builds sorted, witnessed edges from DDG edges mapped through `vertex_of`.
inline std::vector<SrgEdge> lift_edges(const std::vector<SrgVertex>& vertices,
                                       const std::map<std::pair<std::size_t, std::size_t>, std::vector<CellEdge>>& raw) {
    std::vector<SrgEdge> out;
    out.reserve(raw.size());
    for (const auto& [key, witnesses] : raw) {
        std::vector<CellEdge> w = witnesses;
        std::sort(w.begin(), w.end());
        w.erase(std::unique(w.begin(), w.end()), w.end());
        out.push_back(SrgEdge{vertices[key.first].id, vertices[key.second].id, std::move(w)});
    }
    return out;
}

inline void sort_edges(Srg& srg) {
    std::unordered_map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < srg.vertices.size(); ++i) pos.emplace(srg.vertices[i].id, i);
    std::sort(srg.edges.begin(), srg.edges.end(), [&](const SrgEdge& a, const SrgEdge& b) {
        return std::pair(pos.at(a.from), pos.at(a.to)) < std::pair(pos.at(b.from), pos.at(b.to));
    });
}

} // namespace detail

inline std::string class_id(std::size_t class_index) { return "K" + std::to_string(class_index + 1); }

inline std::string unit_id(std::size_t class_index, std::size_t unit_index) {
    return class_id(class_index) + "." + std::to_string(unit_index + 1);
}

/// One vertex per semantic unit; edge u1 -> u2 when a cell of u2 reads a cell
/// of u1. With `include_cells`, cells outside every unit that touch a unit
/// appear as Cell vertices (row-major, after the units). Edges inside a unit
/// are not emitted. The result may be cyclic.
inline Srg srg_of_units(const std::vector<SemanticClass>& classes, const Ddg& g, bool include_cells = true) {
    constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    Srg srg;
    srg.origin = SrgOrigin::Units;
    std::vector<std::size_t> vertex_of(g.size(), kNone);
    for (std::size_t k = 0; k < classes.size(); ++k) {
        for (std::size_t u = 0; u < classes[k].units.size(); ++u) {
            SrgVertex v{unit_id(k, u), VertexKind::Unit, classes[k].units[u].members(), false, classes[k].singleton(),
                        false};
            std::sort(v.cells.begin(), v.cells.end());
            for (CellAddr c : v.cells) {
                auto id = g.find(c);
                if (!id || !g.is_formula(*id)) {
                    throw Error(ErrorCode::SheetMismatch,
                                "unit cell " + to_a1(c) + " is not a formula node of the dependency graph");
                }
                if (vertex_of[*id] != kNone) {
                    throw Error(ErrorCode::SheetMismatch, "cell " + to_a1(c) + " belongs to two units");
                }
                vertex_of[*id] = srg.vertices.size();
                if (g.successors(*id).empty()) v.sink = true;
            }
            srg.vertices.push_back(std::move(v));
        }
    }
    const std::size_t unit_count = srg.vertices.size();
    auto in_unit = [&](NodeId n) { return vertex_of[n] != kNone && vertex_of[n] < unit_count; };

    if (include_cells) {
        for (NodeId n = 0; n < g.size(); ++n) {
            if (in_unit(n)) continue;
            bool touches = std::any_of(g.successors(n).begin(), g.successors(n).end(), in_unit)
                        || std::any_of(g.predecessors(n).begin(), g.predecessors(n).end(), in_unit);
            if (!touches) continue;
            vertex_of[n] = srg.vertices.size();
            srg.vertices.push_back(
                SrgVertex{to_a1(g.addr(n)), VertexKind::Cell, {g.addr(n)}, g.successors(n).empty(), false, false});
        }
    }

    std::map<std::pair<std::size_t, std::size_t>, std::vector<CellEdge>> raw;
    for (NodeId u = 0; u < g.size(); ++u) {
        for (NodeId v : g.successors(u)) {
            if (!in_unit(u) && !in_unit(v)) continue;
            if (vertex_of[u] == kNone || vertex_of[v] == kNone || vertex_of[u] == vertex_of[v]) continue;
            raw[{vertex_of[u], vertex_of[v]}].push_back({g.addr(u), g.addr(v)});
        }
    }
    srg.edges = detail::lift_edges(srg.vertices, raw);
    return srg;
}

/// One vertex per data module; edge M1 -> M2 when a cell of M2 reads the
/// result of M1. When a curation is given, excluded cells are shown as
/// curated Cell vertices fed by the modules (or curated cells) they read.
inline Srg srg_of_modules(const std::vector<DataModule>& modules, const Ddg& g,
                          const SinkCuration* curation = nullptr) {
    constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    Srg srg;
    srg.origin = SrgOrigin::Modules;
    std::vector<std::size_t> vertex_of(g.size(), kNone);
    for (const auto& m : modules) {
        NodeId rid = g.id_of(m.result);
        SrgVertex v{m.id(), VertexKind::Module, m.members, false, false, false};
        std::sort(v.cells.begin(), v.cells.end());
        for (CellAddr c : v.cells) {
            NodeId id = g.id_of(c);
            if (vertex_of[id] != kNone) throw Error(ErrorCode::SheetMismatch, to_a1(c) + " belongs to two modules");
            vertex_of[id] = srg.vertices.size();
        }
        v.sink = curation ? std::binary_search(curation->active.begin(), curation->active.end(), m.result)
                          : g.successors(rid).empty();
        srg.vertices.push_back(std::move(v));
    }
    if (curation) {
        for (CellAddr x : curation->excluded) {
            NodeId id = g.id_of(x);
            vertex_of[id] = srg.vertices.size();
            srg.vertices.push_back(SrgVertex{to_a1(x), VertexKind::Cell, {x}, false, false, true});
        }
    }

    std::map<std::pair<std::size_t, std::size_t>, std::vector<CellEdge>> raw;
    for (NodeId u = 0; u < g.size(); ++u) {
        std::size_t from = vertex_of[u];
        if (from == kNone) continue;
        bool u_is_result = srg.vertices[from].kind == VertexKind::Module && g.addr(u) == modules[from].result;
        for (NodeId v : g.successors(u)) {
            std::size_t to = vertex_of[v];
            if (to == kNone || to == from) continue;
            bool into_curated = srg.vertices[to].curated;
            if (!u_is_result && !into_curated) continue;
            raw[{from, to}].push_back({g.addr(u), g.addr(v)});
        }
    }
    srg.edges = detail::lift_edges(srg.vertices, raw);
    return srg;
}

/// Replaces module `focus` by its member cells and their DDG edges. Incoming
/// edges re-attach to the member cells actually read, outgoing ones to the
/// member that is read.
inline Srg fisheye_expand(const Srg& srg, std::string_view focus, const Ddg& g) {
    auto it = std::find_if(srg.vertices.begin(), srg.vertices.end(), [&](const SrgVertex& v) { return v.id == focus; });
    if (it == srg.vertices.end()) {
        // accept a bare result address too
        it = std::find_if(srg.vertices.begin(), srg.vertices.end(), [&](const SrgVertex& v) {
            return v.kind == VertexKind::Module && v.id == std::string(focus) + "-module";
        });
    }
    if (it == srg.vertices.end()) throw Error(ErrorCode::UnknownModule, "no vertex '" + std::string(focus) + "'");
    if (it->kind != VertexKind::Module) {
        throw Error(ErrorCode::NotAModuleVertex, "vertex '" + it->id + "' is not a data module");
    }
    const SrgVertex module = *it;
    const std::size_t position = static_cast<std::size_t>(it - srg.vertices.begin());

    Srg out;
    out.origin = srg.origin;
    out.folds = srg.folds;
    out.folds.push_back(Srg::Fold{module.id, srg.vertices, srg.edges});

    std::set<CellAddr> members(module.cells.begin(), module.cells.end());
    for (std::size_t i = 0; i < srg.vertices.size(); ++i) {
        if (i != position) {
            out.vertices.push_back(srg.vertices[i]);
            continue;
        }
        for (CellAddr c : module.cells) {
            NodeId id = g.id_of(c);
            if (out.find(to_a1(c)) || std::any_of(srg.vertices.begin(), srg.vertices.end(),
                                                  [&](const SrgVertex& v) { return v.id == to_a1(c); })) {
                throw Error(ErrorCode::SheetMismatch, "vertex id " + to_a1(c) + " already present");
            }
            (void)id;
            bool is_result = to_a1(c) + "-module" == module.id;
            out.vertices.push_back(SrgVertex{to_a1(c), VertexKind::Cell, {c}, module.sink && is_result, false, false});
        }
    }

    std::map<std::pair<std::string, std::string>, std::vector<CellEdge>> raw;
    for (CellAddr c : module.cells) {
        for (NodeId s : g.successors(g.id_of(c))) {
            if (members.count(g.addr(s))) raw[{to_a1(c), to_a1(g.addr(s))}].push_back({c, g.addr(s)});
        }
    }
    for (const auto& e : srg.edges) {
        if (e.to == module.id) {
            for (const auto& w : e.witnesses) raw[{e.from, to_a1(w.second)}].push_back(w);
        } else if (e.from == module.id) {
            for (const auto& w : e.witnesses) raw[{to_a1(w.first), e.to}].push_back(w);
        } else {
            auto& bucket = raw[{e.from, e.to}];
            bucket.insert(bucket.end(), e.witnesses.begin(), e.witnesses.end());
        }
    }
    for (auto& [key, witnesses] : raw) {
        std::sort(witnesses.begin(), witnesses.end());
        witnesses.erase(std::unique(witnesses.begin(), witnesses.end()), witnesses.end());
        out.edges.push_back(SrgEdge{key.first, key.second, std::move(witnesses)});
    }
    detail::sort_edges(out);
    return out;
}

/// Inverse of the most recent fisheye_expand on `focus`.
inline Srg fisheye_collapse(const Srg& srg, std::string_view focus) {
    if (srg.folds.empty()) throw Error(ErrorCode::UnknownModule, "no expanded module to collapse");
    const auto& last = srg.folds.back();
    if (last.focus != focus && last.focus != std::string(focus) + "-module") {
        throw Error(ErrorCode::InvalidParameters,
                    "expansions collapse innermost first; expected '" + last.focus + "'");
    }
    Srg out;
    out.origin = srg.origin;
    out.vertices = last.vertices;
    out.edges = last.edges;
    out.folds.assign(srg.folds.begin(), srg.folds.end() - 1);
    return out;
}

struct TraceStep {
    std::string module;
    CellAddr result;
};

/// Direct SRG predecessors of module `suspect`, with the result cells the
/// auditor should check. Empty means the fault lies inside `suspect`.
inline std::vector<TraceStep> fault_trace_step(const std::vector<DataModule>& modules, const Srg& srg,
                                               std::string_view suspect) {
    const DataModule* target = find_module(modules, suspect);
    if (!target || !srg.find(target->id())) {
        throw Error(ErrorCode::UnknownModule, "no data module '" + std::string(suspect) + "'");
    }
    std::vector<TraceStep> out;
    for (const auto& e : srg.edges) {
        if (e.to != target->id()) continue;
        if (const DataModule* pred = find_module(modules, e.from)) out.push_back({pred->id(), pred->result});
    }
    return out;
}

/// Edges lying on a directed cycle (both endpoints in one strongly connected
/// component, or a self-loop).
inline std::set<std::pair<std::string, std::string>> cyclic_edges(const Srg& srg) {
    const std::size_t n = srg.vertices.size();
    std::unordered_map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < n; ++i) pos.emplace(srg.vertices[i].id, i);
    std::vector<std::vector<std::size_t>> adj(n);
    for (const auto& e : srg.edges) adj[pos.at(e.from)].push_back(pos.at(e.to));

    // Tarjan, iterative
    std::vector<std::size_t> index(n, static_cast<std::size_t>(-1)), low(n, 0), comp(n, 0);
    std::vector<bool> on_stack(n, false);
    std::vector<std::size_t> stack;
    std::size_t counter = 0, components = 0;
    for (std::size_t root = 0; root < n; ++root) {
        if (index[root] != static_cast<std::size_t>(-1)) continue;
        std::vector<std::pair<std::size_t, std::size_t>> work{{root, 0}};
        while (!work.empty()) {
            auto& [v, next] = work.back();
            if (next == 0) {
                index[v] = low[v] = counter++;
                stack.push_back(v);
                on_stack[v] = true;
            }
            if (next < adj[v].size()) {
                std::size_t w = adj[v][next++];
                if (index[w] == static_cast<std::size_t>(-1)) {
                    work.push_back({w, 0});
                } else if (on_stack[w]) {
                    low[v] = std::min(low[v], index[w]);
                }
                continue;
            }
            if (low[v] == index[v]) {
                while (true) {
                    std::size_t w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    comp[w] = components;
                    if (w == v) break;
                }
                ++components;
            }
            std::size_t finished = v;
            work.pop_back();
            if (!work.empty()) low[work.back().first] = std::min(low[work.back().first], low[finished]);
        }
    }
    std::set<std::pair<std::string, std::string>> out;
    for (const auto& e : srg.edges) {
        if (e.from == e.to || comp[pos.at(e.from)] == comp[pos.at(e.to)]) out.insert({e.from, e.to});
    }
    return out;
}

inline bool is_acyclic(const Srg& srg) { return cyclic_edges(srg).empty(); }

// ---------------------------------------------------------------------------
// Rendering

/// Compact range notation for a cell set, e.g. "A1:A3,C5".
inline std::string describe_cells(std::vector<CellAddr> cells) {
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    // horizontal runs per row
    struct Run {
        std::int32_t row, c0, c1;
    };
    std::vector<Run> runs;
    for (CellAddr a : cells) {
        if (!runs.empty() && runs.back().row == a.row && runs.back().c1 + 1 == a.col) {
            runs.back().c1 = a.col;
        } else {
            runs.push_back({a.row, a.col, a.col});
        }
    }
    // stack identical runs of consecutive rows into rectangles
    struct Rect {
        std::int32_t r0, r1, c0, c1;
    };
    std::vector<Rect> rects;
    std::map<std::pair<std::int32_t, std::int32_t>, std::size_t> open;  // (c0,c1) -> rect index
    for (const Run& run : runs) {
        auto it = open.find({run.c0, run.c1});
        if (it != open.end() && rects[it->second].r1 + 1 == run.row) {
            rects[it->second].r1 = run.row;
        } else {
            open[{run.c0, run.c1}] = rects.size();
            rects.push_back({run.row, run.row, run.c0, run.c1});
        }
    }
    std::sort(rects.begin(), rects.end(),
              [](const Rect& a, const Rect& b) { return std::pair(a.r0, a.c0) < std::pair(b.r0, b.c0); });
    std::string out;
    for (const Rect& r : rects) {
        if (!out.empty()) out.push_back(',');
        out += to_a1({r.r0, r.c0});
        if (r.r0 != r.r1 || r.c0 != r.c1) out += ":" + to_a1({r.r1, r.c1});
    }
    return out;
}

enum class DotStyle : std::uint8_t { Plain, Audit };

namespace detail {

inline std::string dot_quote(std::string_view s) {
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '\n') {
            out += "\\n";
            continue;
        }
        if (ch == '"' || ch == '\\') out.push_back('\\');
        out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

} // namespace detail

inline std::string to_dot(const Srg& srg, DotStyle style = DotStyle::Plain) {
    std::string out = "digraph srg {\n";
    std::set<std::pair<std::string, std::string>> cyclic;
    if (style == DotStyle::Audit) cyclic = cyclic_edges(srg);
    for (const auto& v : srg.vertices) {
        out += "  " + detail::dot_quote(v.id) + " [label=" + detail::dot_quote(v.id + "\n" + describe_cells(v.cells));
        if (style == DotStyle::Audit) {
            out += v.kind == VertexKind::Cell ? ", shape=ellipse" : ", shape=box";
            if (v.curated) {
                out += ", style=filled, fillcolor=lightgray";
            } else if (v.singleton) {
                out += ", style=dashed";
            }
            if (v.sink) out += ", color=red";
        }
        out += "];\n";
    }
    for (const auto& e : srg.edges) {
        out += "  " + detail::dot_quote(e.from) + " -> " + detail::dot_quote(e.to);
        if (style == DotStyle::Audit && cyclic.count({e.from, e.to})) out += " [color=orange]";
        out += ";\n";
    }
    out += "}\n";
    return out;
}

/// DDG as DOT: input (non-formula) cells drawn as boxes, sinks in red.
inline std::string to_dot(const Ddg& g) {
    std::string out = "digraph ddg {\n";
    for (NodeId i = 0; i < g.size(); ++i) {
        std::string id = detail::dot_quote(to_a1(g.addr(i)));
        out += "  " + id + " [label=" + id;
        if (!g.is_formula(i)) out += ", shape=box";
        if (g.successors(i).empty()) out += ", color=red";
        out += "];\n";
    }
    for (const auto& [from, to] : g.edges()) {
        out += "  " + detail::dot_quote(to_a1(from)) + " -> " + detail::dot_quote(to_a1(to)) + ";\n";
    }
    out += "}\n";
    return out;
}

} // namespace sheetaudit
