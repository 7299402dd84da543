#pragma once

// JSON reports shared by the command-line tool and the HTTP service. Both
// front ends call these functions, so identical inputs give identical JSON.

#include "sheetaudit/ddg.hpp"
#include "sheetaudit/equivalence.hpp"
#include "sheetaudit/error.hpp"
#include "sheetaudit/formula.hpp"
#include "sheetaudit/grid.hpp"
#include "sheetaudit/modules.hpp"
#include "sheetaudit/semantic.hpp"
#include "sheetaudit/srg.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <optional>
#include <string>
#include <vector>

namespace sheetaudit {

using Json = nlohmann::ordered_json;

inline constexpr int kReportSchema = 1;

/// A loaded sheet with its parsed formulas and dependency graph. Immutable
/// once constructed, so concurrent readers are safe.
class Workspace {
public:
    explicit Workspace(Sheet sheet) : sheet_(std::move(sheet)), parsed_(sheet_), ddg_(build_ddg(parsed_)) {}

    Workspace(const Workspace&) = delete;
    Workspace& operator=(const Workspace&) = delete;

    const Sheet& sheet() const noexcept { return sheet_; }
    const ParsedSheet& parsed() const noexcept { return parsed_; }
    const Ddg& ddg() const noexcept { return ddg_; }

private:
    Sheet sheet_;
    ParsedSheet parsed_;
    Ddg ddg_;
};

namespace json {

inline Json cell(CellAddr a) { return to_a1(a); }

template <typename Range>
Json cells(const Range& range) {
    Json out = Json::array();
    for (CellAddr a : range) out.push_back(to_a1(a));
    return out;
}

inline Json error(const Error& e) {
    Json out{{"code", std::string(to_string(e.code()))}, {"message", e.what()}};
    if (!e.details().empty()) out["details"] = e.details();
    return out;
}

inline Json diagnostic(const Diagnostic& d) {
    return Json{{"kind", d.kind}, {"cells", cells(d.cells)}, {"message", d.message}};
}

inline Json params(const ClassParams& p) {
    return Json{{"dh", p.geometry.d_h},
                {"dv", p.geometry.d_v},
                {"dman", p.geometry.manhattan()},
                {"eq_start", std::string(to_string(p.eq_start))},
                {"eq_rest", std::string(to_string(p.eq_rest))}};
}

inline Json partition(const Partition& p) {
    Json areas = Json::array();
    for (std::size_t i = 0; i < p.areas.size(); ++i) {
        areas.push_back(Json{{"id", "L" + std::to_string(i + 1)},
                             {"key", p.areas[i].key.fingerprint},
                             {"cells", cells(p.areas[i].members)}});
    }
    return Json{{"level", std::string(to_string(p.level))}, {"areas", std::move(areas)}};
}

inline Json diff(const DiffReport& d, const Partition& fine, const Partition& coarse) {
    Json areas = Json::array();
    Json hotspots = Json::array();
    for (const auto& split : d.splits) {
        Json parts = Json::array();
        for (std::size_t f : split.fine_indices) {
            parts.push_back(Json{{"id", "L" + std::to_string(f + 1)}, {"cells", cells(fine.areas[f].members)}});
        }
        std::string id = "L" + std::to_string(split.coarse_index + 1);
        areas.push_back(Json{{"id", id},
                             {"cells", cells(coarse.areas[split.coarse_index].members)},
                             {"splits", std::move(parts)},
                             {"hotspot", split.hotspot}});
        if (split.hotspot) hotspots.push_back(id);
    }
    return Json{{"fine", std::string(to_string(d.fine_level))},
                {"coarse", std::string(to_string(d.coarse_level))},
                {"areas", std::move(areas)},
                {"hotspots", std::move(hotspots)}};
}

inline Json literal(const Literal& l) { return l.is_text ? Json(l.text) : Json(l.number); }

inline Json offset(Offset o) { return Json::array({o.drow, o.dcol}); }

inline Json outliers(const SemanticClass& cls, const Sheet& sheet) {
    try {
        OutlierReport r = pattern_outliers(cls, sheet);
        return Json{{"stride", r.stride ? offset(*r.stride) : Json(nullptr)},
                    {"agreement", r.agreement},
                    {"off_pattern", cells(r.off_pattern)},
                    {"gaps", cells(r.gaps)},
                    {"holes", cells(r.holes)}};
    } catch (const Error& e) {
        if (e.code() != ErrorCode::TooFewUnits) throw;
        return Json{{"stride", nullptr}, {"note", "no pattern basis"}};
    }
}

inline Json classes(const std::vector<SemanticClass>& classes, const Sheet& sheet) {
    Json list = Json::array();
    Json highlight = Json::array();
    for (std::size_t k = 0; k < classes.size(); ++k) {
        const auto& cls = classes[k];
        Json units = Json::array();
        for (std::size_t u = 0; u < cls.units.size(); ++u) {
            auto members = cls.units[u].members();
            std::sort(members.begin(), members.end());
            units.push_back(Json{{"id", unit_id(k, u)}, {"anchor", cell(cls.units[u].anchor)}, {"cells", cells(members)}});
            for (CellAddr m : members) highlight.push_back(Json::array({to_a1(m), class_id(k), unit_id(k, u)}));
        }
        Json rest = Json::array();
        for (const auto& [o, key] : cls.rest_keys) rest.push_back(Json{{"offset", offset(o)}, {"key", key.fingerprint}});
        list.push_back(Json{{"id", class_id(k)},
                            {"shape", shape_signature(cls.shape)},
                            {"singleton", cls.singleton()},
                            {"start_key", cls.start_key.fingerprint},
                            {"rest_keys", std::move(rest)},
                            {"units", std::move(units)},
                            {"pattern", outliers(cls, sheet)}});
    }
    return Json{{"count", classes.size()}, {"classes", std::move(list)}, {"highlight", std::move(highlight)}};
}

inline Json curation(const SinkCuration& cur) {
    Json history = Json::array();
    for (const auto& step : cur.history) {
        history.push_back(Json{{"excluded", cell(step.excluded)}, {"promoted", cells(step.promoted)}});
    }
    return Json{{"active", cells(cur.active)}, {"excluded", cells(cur.excluded)}, {"history", std::move(history)}};
}

inline Json modules(const std::vector<DataModule>& modules, const std::vector<BoundaryViolation>& violations) {
    Json list = Json::array();
    Json highlight = Json::array();
    for (const auto& m : modules) {
        list.push_back(Json{{"id", m.id()}, {"result", cell(m.result)}, {"cells", cells(m.members)}});
        for (CellAddr c : m.members) highlight.push_back(Json::array({to_a1(c), m.id()}));
    }
    Json bad = Json::array();
    for (const auto& v : violations) {
        bad.push_back(Json{{"edge", Json::array({to_a1(v.from), to_a1(v.to)})},
                           {"from_module", v.from_module},
                           {"to_module", v.to_module}});
    }
    return Json{{"count", modules.size()}, {"modules", std::move(list)}, {"violations", std::move(bad)},
                {"highlight", std::move(highlight)}};
}

inline Json srg(const Srg& g) {
    Json vertices = Json::array();
    for (const auto& v : g.vertices) {
        Json flags = Json::array();
        if (v.sink) flags.push_back("sink");
        if (v.singleton) flags.push_back("singleton");
        if (v.curated) flags.push_back("curated");
        vertices.push_back(Json{{"id", v.id},
                                {"kind", std::string(to_string(v.kind))},
                                {"cells", cells(v.cells)},
                                {"range", describe_cells(v.cells)},
                                {"flags", std::move(flags)}});
    }
    Json edges = Json::array();
    for (const auto& e : g.edges) {
        edges.push_back(Json{{"from", e.from},
                             {"to", e.to},
                             {"witness", Json::array({to_a1(e.witnesses.front().first), to_a1(e.witnesses.front().second)})},
                             {"witness_count", e.witnesses.size()}});
    }
    return Json{{"origin", std::string(to_string(g.origin))},
                {"acyclic", is_acyclic(g)},
                {"vertices", std::move(vertices)},
                {"edges", std::move(edges)}};
}

inline Json ddg(const Ddg& g) {
    Json edges = Json::array();
    for (const auto& [from, to] : g.edges()) edges.push_back(Json::array({to_a1(from), to_a1(to)}));
    return Json{{"nodes", cells(g.nodes())}, {"edges", std::move(edges)}};
}

} // namespace json

// ---------------------------------------------------------------------------
// Commands

/// SRG request: which abstraction, its parameters, and an optional fish-eye focus.
struct CommandOptions {
    ClassParams classes;
    std::vector<CellAddr> exclude;
    SrgOrigin srg_mode = SrgOrigin::Modules;
    std::optional<std::string> fisheye;
};

namespace detail {

inline Json envelope(const Workspace& ws, const std::string& command, Json parameters) {
    return Json{{"schema", kReportSchema},
                {"command", command},
                {"input", Json{{"name", ws.sheet().name()}, {"digest", sheet_digest(ws.sheet())}}},
                {"parameters", std::move(parameters)},
                {"result", nullptr},
                {"diagnostics", Json::array()}};
}

inline void add_ddg_diagnostics(Json& report, const Ddg& g) {
    for (const auto& d : g.diagnostics()) report["diagnostics"].push_back(json::diagnostic(d));
}

inline SinkCuration apply_exclusions(const Ddg& g, const std::vector<CellAddr>& exclude) {
    SinkCuration cur = curate_init(g);
    for (CellAddr c : exclude) cur = exclude_sink(std::move(cur), g, c);
    return cur;
}

} // namespace detail

inline Json report_inspect(const Workspace& ws) {
    Json r = detail::envelope(ws, "inspect", Json::object());
    const Ddg& g = ws.ddg();
    auto check = check_acyclic(g);
    std::size_t formulas = 0;
    for (NodeId i = 0; i < g.size(); ++i) formulas += g.is_formula(i) ? 1 : 0;
    r["result"] = Json{{"ddg", Json{{"nodes", g.size()},
                                    {"edges", g.edge_count()},
                                    {"formula_cells", formulas},
                                    {"input_cells", g.size() - formulas}}},
                       {"acyclic", check.ok},
                       {"sinks", json::cells(sinks(g))},
                       {"cycle", json::cells(check.cycle)}};
    detail::add_ddg_diagnostics(r, g);
    if (!check.ok) {
        r["diagnostics"].push_back(json::diagnostic({"cycle", check.cycle, "dependency graph contains a cycle"}));
    }
    return r;
}

inline Json report_areas(const Workspace& ws, EqLevel level) {
    Json r = detail::envelope(ws, "areas", Json{{"level", std::string(to_string(level))}});
    r["result"] = json::partition(logical_areas(ws.parsed(), level));
    return r;
}

inline Json report_classes(const Workspace& ws, const ClassParams& params) {
    params.geometry.validate();
    Json r = detail::envelope(ws, "classes", json::params(params));
    r["result"] = json::classes(grow_classes(ws.parsed(), params), ws.sheet());
    return r;
}

inline Json report_sinks(const Workspace& ws, const SinkCuration& cur) {
    Json excluded = Json::array();
    for (const auto& step : cur.history) excluded.push_back(to_a1(step.excluded));
    Json r = detail::envelope(ws, "sinks", Json{{"exclude", std::move(excluded)}});
    r["result"] = json::curation(cur);
    return r;
}

inline Json report_modules(const Workspace& ws, const SinkCuration& cur) {
    Json excluded = Json::array();
    for (const auto& step : cur.history) excluded.push_back(to_a1(step.excluded));
    Json r = detail::envelope(ws, "modules", Json{{"exclude", std::move(excluded)}});
    const Ddg& g = ws.ddg();
    require_acyclic(g);
    auto modules = recover_modules(g, cur);
    r["result"] = json::modules(modules, module_boundary_check(modules, g));
    r["result"]["curation"] = json::curation(cur);
    detail::add_ddg_diagnostics(r, g);
    if (auto orphans = orphaned_cells(g, cur); !orphans.empty()) {
        r["diagnostics"].push_back(json::diagnostic({"orphaned-by-curation", orphans, "cells feed only excluded cells"}));
    }
    return r;
}

inline Json report_modules(const Workspace& ws, const std::vector<CellAddr>& exclude) {
    return report_modules(ws, detail::apply_exclusions(ws.ddg(), exclude));
}

/// Builds the requested SRG (with optional fish-eye focus) for the report and DOT export.
inline Srg build_srg(const Workspace& ws, const CommandOptions& opt, const SinkCuration* cur = nullptr) {
    const Ddg& g = ws.ddg();
    Srg graph;
    if (opt.srg_mode == SrgOrigin::Units) {
        opt.classes.geometry.validate();
        graph = srg_of_units(grow_classes(ws.parsed(), opt.classes), g);
    } else {
        require_acyclic(g);
        SinkCuration local;
        if (!cur) {
            local = detail::apply_exclusions(g, opt.exclude);
            cur = &local;
        }
        graph = srg_of_modules(recover_modules(g, *cur), g, cur);
    }
    if (opt.fisheye) graph = fisheye_expand(graph, *opt.fisheye, g);
    return graph;
}

inline Json srg_parameters(const CommandOptions& opt, const SinkCuration* cur) {
    Json p{{"mode", std::string(to_string(opt.srg_mode))}};
    if (opt.srg_mode == SrgOrigin::Units) {
        p.update(json::params(opt.classes));
    } else {
        Json excluded = Json::array();
        if (cur) {
            for (const auto& step : cur->history) excluded.push_back(to_a1(step.excluded));
        } else {
            excluded = json::cells(opt.exclude);
        }
        p["exclude"] = std::move(excluded);
    }
    p["fisheye"] = opt.fisheye ? Json(*opt.fisheye) : Json(nullptr);
    return p;
}

inline Json report_srg(const Workspace& ws, const CommandOptions& opt, const SinkCuration* cur = nullptr) {
    Json r = detail::envelope(ws, "srg", srg_parameters(opt, cur));
    r["result"] = json::srg(build_srg(ws, opt, cur));
    detail::add_ddg_diagnostics(r, ws.ddg());
    return r;
}

inline Json report_diff(const Workspace& ws, EqLevel fine, EqLevel coarse) {
    Json r = detail::envelope(ws, "diff-eq",
                              Json{{"fine", std::string(to_string(fine))}, {"coarse", std::string(to_string(coarse))}});
    Partition f = logical_areas(ws.parsed(), fine);
    Partition c = logical_areas(ws.parsed(), coarse);
    r["result"] = json::diff(compare_partitions(f, c), f, c);
    return r;
}

inline Json report_constants(const Workspace& ws) {
    Json r = detail::envelope(ws, "constants", Json::object());
    Json list = Json::array();
    for (const auto& cc : constants_report(ws.parsed())) {
        Json values = Json::array();
        for (const auto& l : cc.literals) values.push_back(json::literal(l));
        list.push_back(Json{{"cell", json::cell(cc.cell)}, {"values", std::move(values)}});
    }
    r["result"] = Json{{"constants", std::move(list)}};
    return r;
}

inline Json report_trace(const Workspace& ws, const SinkCuration& cur, const std::string& module) {
    Json excluded = Json::array();
    for (const auto& step : cur.history) excluded.push_back(to_a1(step.excluded));
    Json r = detail::envelope(ws, "trace", Json{{"module", module}, {"exclude", std::move(excluded)}});
    const Ddg& g = ws.ddg();
    require_acyclic(g);
    auto modules = recover_modules(g, cur);
    Srg graph = srg_of_modules(modules, g, &cur);
    auto steps = fault_trace_step(modules, graph, module);
    Json preds = Json::array();
    for (const auto& s : steps) preds.push_back(Json{{"module", s.module}, {"result", json::cell(s.result)}});
    r["result"] = Json{{"module", find_module(modules, module)->id()},
                       {"predecessors", std::move(preds)},
                       {"fault_inside", steps.empty()}};
    detail::add_ddg_diagnostics(r, g);
    return r;
}

inline Json report_trace(const Workspace& ws, const std::vector<CellAddr>& exclude, const std::string& module) {
    return report_trace(ws, detail::apply_exclusions(ws.ddg(), exclude), module);
}

inline bool has_diagnostics(const Json& report) { return !report.at("diagnostics").empty(); }

/// Highlight-map CSV from a classes or modules report's "highlight" rows.
inline std::string highlight_csv(const Json& report) {
    const auto& rows = report["result"]["highlight"];
    std::string out = report.at("command") == "classes" ? "cell,class_id,unit_id\n" : "cell,module_id\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out.push_back(',');
            out += row[i].get<std::string>();
        }
        out.push_back('\n');
    }
    return out;
}

/// Drops fields that legitimately vary between runs.
inline Json without_timings(Json report) {
    report.erase("timings");
    return report;
}

} // namespace sheetaudit
