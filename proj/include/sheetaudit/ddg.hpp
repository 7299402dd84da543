#pragma once

#include "sheetaudit/error.hpp"
#include "sheetaudit/formula.hpp"
#include "sheetaudit/grid.hpp"

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace sheetaudit {

using NodeId = std::uint32_t;

struct Diagnostic {
    std::string kind;  // "out-of-grid", "cycle", "orphaned-by-curation"
    std::vector<CellAddr> cells;
    std::string message;
};

/// Cell-level data-dependency graph. An edge from -> to means the formula in
/// `to` reads `from`. Nodes are every formula cell plus every referenced cell
/// (referenced empty cells included); unreferenced non-formula cells are not
/// represented.
class Ddg {
public:
    const std::vector<CellAddr>& nodes() const noexcept { return nodes_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    std::size_t edge_count() const noexcept { return edge_count_; }

    CellAddr addr(NodeId id) const { return nodes_[id]; }
    bool is_formula(NodeId id) const { return formula_[id]; }
    const std::vector<NodeId>& successors(NodeId id) const { return succ_[id]; }
    const std::vector<NodeId>& predecessors(NodeId id) const { return pred_[id]; }

    std::optional<NodeId> find(CellAddr a) const {
        auto it = index_.find(a);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }
    NodeId id_of(CellAddr a) const {
        auto id = find(a);
        if (!id) throw Error(ErrorCode::SheetMismatch, to_a1(a) + " is not a node of the dependency graph");
        return *id;
    }
    bool contains(CellAddr a) const { return index_.count(a) != 0; }

    /// Edges sorted by (from, to) in row-major order.
    std::vector<std::pair<CellAddr, CellAddr>> edges() const {
        std::vector<std::pair<CellAddr, CellAddr>> out;
        out.reserve(edge_count_);
        for (NodeId u = 0; u < nodes_.size(); ++u) {
            for (NodeId v : succ_[u]) out.emplace_back(nodes_[u], nodes_[v]);
        }
        return out;
    }

    const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

    /// Builds a graph from explicit nodes/edges (edges given as node addresses).
    static Ddg from_edges(std::vector<CellAddr> formula_nodes, std::vector<CellAddr> input_nodes,
                          const std::vector<std::pair<CellAddr, CellAddr>>& edges) {
        Ddg g;
        std::set<CellAddr> formulas(formula_nodes.begin(), formula_nodes.end());
        std::set<CellAddr> all(formulas);
        all.insert(input_nodes.begin(), input_nodes.end());
        for (const auto& [a, b] : edges) {
            all.insert(a);
            all.insert(b);
        }
        g.nodes_.assign(all.begin(), all.end());
        g.formula_.resize(g.nodes_.size());
        g.succ_.resize(g.nodes_.size());
        g.pred_.resize(g.nodes_.size());
        for (NodeId i = 0; i < g.nodes_.size(); ++i) {
            g.index_.emplace(g.nodes_[i], i);
            g.formula_[i] = formulas.count(g.nodes_[i]) != 0;
        }
        for (const auto& [a, b] : edges) g.add_edge(g.index_.at(a), g.index_.at(b));
        g.finish();
        return g;
    }

private:
    friend Ddg build_ddg(const ParsedSheet& parsed);

    void add_edge(NodeId from, NodeId to) {
        succ_[from].push_back(to);
        pred_[to].push_back(from);
    }

    void finish() {
        edge_count_ = 0;
        for (auto* lists : {&succ_, &pred_}) {
            for (auto& l : *lists) {
                std::sort(l.begin(), l.end());
                l.erase(std::unique(l.begin(), l.end()), l.end());
            }
        }
        for (const auto& l : succ_) edge_count_ += l.size();
    }

    std::vector<CellAddr> nodes_;
    std::vector<bool> formula_;
    std::vector<std::vector<NodeId>> succ_, pred_;
    std::unordered_map<CellAddr, NodeId, CellAddrHash> index_;
    std::size_t edge_count_ = 0;
    std::vector<Diagnostic> diagnostics_;
};

inline Ddg build_ddg(const ParsedSheet& parsed) {
    Ddg g;
    std::vector<std::vector<CellAddr>> reads(parsed.size());
    std::set<CellAddr> all;
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        const auto& entry = parsed.entries()[i];
        all.insert(entry.addr);
        std::set<CellAddr> refs;
        for_each_reference(entry.ast, [&](const CellRef& first, const CellRef* last) {
            try {
                Extent rect = reference_rectangle(first, last, entry.addr);
                for (std::int32_t r = rect.top_left.row; r <= rect.bottom_right.row; ++r) {
                    for (std::int32_t c = rect.top_left.col; c <= rect.bottom_right.col; ++c) refs.insert({r, c});
                }
            } catch (const Error& e) {
                g.diagnostics_.push_back({"out-of-grid", {entry.addr}, e.what()});
            }
        });
        reads[i].assign(refs.begin(), refs.end());
        all.insert(refs.begin(), refs.end());
    }

    g.nodes_.assign(all.begin(), all.end());
    g.formula_.resize(g.nodes_.size());
    g.succ_.resize(g.nodes_.size());
    g.pred_.resize(g.nodes_.size());
    for (NodeId i = 0; i < g.nodes_.size(); ++i) g.index_.emplace(g.nodes_[i], i);
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        NodeId to = g.index_.at(parsed.entries()[i].addr);
        g.formula_[to] = true;
        for (CellAddr a : reads[i]) g.add_edge(g.index_.at(a), to);
    }
    g.finish();
    return g;
}

inline Ddg build_ddg(const Sheet& sheet) { return build_ddg(ParsedSheet(sheet)); }

/// Nodes with out-degree 0, row-major.
inline std::vector<CellAddr> sinks(const Ddg& g) {
    std::vector<CellAddr> out;
    for (NodeId i = 0; i < g.size(); ++i) {
        if (g.successors(i).empty()) out.push_back(g.addr(i));
    }
    return out;
}

struct AcyclicCheck {
    bool ok = true;
    std::vector<CellAddr> order;  // topological, smallest row-major first among ready nodes
    std::vector<CellAddr> cycle;  // closed walk, first == last, when !ok
};

namespace detail {

// Shortest cycle through `start`, restricted to `allowed` nodes; empty if none.
inline std::vector<NodeId> shortest_cycle_through(const Ddg& g, NodeId start, const std::vector<bool>& allowed) {
    std::unordered_map<NodeId, NodeId> parent;
    std::deque<NodeId> queue{start};
    parent.emplace(start, start);
    while (!queue.empty()) {
        NodeId u = queue.front();
        queue.pop_front();
        for (NodeId v : g.successors(u)) {
            if (!allowed[v]) continue;
            if (v == start) {
                std::vector<NodeId> path{start};
                for (NodeId w = u; w != start; w = parent.at(w)) path.push_back(w);
                path.push_back(start);
                std::reverse(path.begin(), path.end());
                return path;
            }
            if (parent.emplace(v, u).second) queue.push_back(v);
        }
    }
    return {};
}

} // namespace detail

inline AcyclicCheck check_acyclic(const Ddg& g) {
    AcyclicCheck result;
    std::vector<std::size_t> indegree(g.size());
    std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
    for (NodeId i = 0; i < g.size(); ++i) {
        indegree[i] = g.predecessors(i).size();
        if (indegree[i] == 0) ready.push(i);
    }
    std::vector<bool> placed(g.size(), false);
    while (!ready.empty()) {
        NodeId u = ready.top();
        ready.pop();
        placed[u] = true;
        result.order.push_back(g.addr(u));
        for (NodeId v : g.successors(u)) {
            if (--indegree[v] == 0) ready.push(v);
        }
    }
    if (result.order.size() == g.size()) return result;

    result.ok = false;
    result.order.clear();
    std::vector<bool> remaining(g.size());
    for (NodeId i = 0; i < g.size(); ++i) remaining[i] = !placed[i];
    // Bounded search: the shortest cycle among the first few blocked nodes.
    constexpr std::size_t kMaxStarts = 256;
    std::vector<NodeId> best;
    std::size_t starts = 0;
    for (NodeId i = 0; i < g.size() && starts < kMaxStarts; ++i) {
        if (!remaining[i]) continue;
        ++starts;
        auto cycle = detail::shortest_cycle_through(g, i, remaining);
        if (!cycle.empty() && (best.empty() || cycle.size() < best.size())) best = std::move(cycle);
        if (best.size() == 2) break;  // self-loop
    }
    for (NodeId id : best) result.cycle.push_back(g.addr(id));
    return result;
}

/// Reverse topological order (sinks first) as node ids. Requires an acyclic graph.
inline std::vector<NodeId> reverse_topological_ids(const Ddg& g) {
    std::vector<std::size_t> outdegree(g.size());
    std::priority_queue<NodeId> ready;
    for (NodeId i = 0; i < g.size(); ++i) {
        outdegree[i] = g.successors(i).size();
        if (outdegree[i] == 0) ready.push(i);
    }
    std::vector<NodeId> order;
    order.reserve(g.size());
    while (!ready.empty()) {
        NodeId u = ready.top();
        ready.pop();
        order.push_back(u);
        for (NodeId p : g.predecessors(u)) {
            if (--outdegree[p] == 0) ready.push(p);
        }
    }
    if (order.size() != g.size()) throw Error(ErrorCode::CyclicDDG, "dependency graph contains a cycle");
    return order;
}

} // namespace sheetaudit
