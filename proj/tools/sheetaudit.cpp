// sheetaudit: batch front end for the spreadsheet auditing analyses.
//
// Exit codes: 0 success, 1 report carries diagnostics, 2 fatal error.

#include "sheetaudit/service.hpp"
#include "sheetaudit/sheetaudit.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace sheetaudit;

struct Options {
    std::string workbook;
    std::string format;
    std::string out;
    std::string dot;
    std::string highlight;
    std::string style = "audit";
    bool strict = false;

    std::string level = "copy";
    std::string fine = "copy";
    std::string coarse = "structural";
    int dh = 1;
    int dv = 0;
    std::optional<int> dman;
    std::string eq_start = "copy";
    std::string eq_rest = "copy";
    std::vector<std::string> exclude;
    std::string mode = "modules";
    std::string fisheye;
    std::string module;
    int port = 8080;
    std::string host = "127.0.0.1";
};

constexpr int kExitOk = 0;
constexpr int kExitDiagnostics = 1;
constexpr int kExitFatal = 2;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::MalformedWorkbook, "cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
}

Sheet load(const Options& o) {
    WorkbookFormat format = WorkbookFormat::Csv;
    if (o.format == "json" || (o.format.empty() && o.workbook.size() >= 5
                                && o.workbook.compare(o.workbook.size() - 5, 5, ".json") == 0)) {
        format = WorkbookFormat::Json;
    }
    return load_workbook(read_file(o.workbook), format);
}

ClassParams class_params(const Options& o) {
    ClassParams p;
    p.geometry.d_h = o.dh;
    p.geometry.d_v = o.dv;
    p.geometry.d_man = o.dman;
    p.eq_start = *parse_level(o.eq_start);
    p.eq_rest = *parse_level(o.eq_rest);
    return p;
}

std::vector<CellAddr> exclusions(const Options& o) {
    std::vector<CellAddr> out;
    for (const auto& text : o.exclude) out.push_back(parse_a1(text));
    return out;
}

CommandOptions srg_options(const Options& o) {
    CommandOptions opt;
    opt.srg_mode = o.mode == "units" ? SrgOrigin::Units : SrgOrigin::Modules;
    opt.classes = class_params(o);
    opt.exclude = exclusions(o);
    if (!o.fisheye.empty()) opt.fisheye = o.fisheye;
    return opt;
}

int emit(const Options& o, Json report, std::chrono::steady_clock::time_point start) {
    auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    report["timings"] = Json{{"total_ms", ms}};
    std::string text = report.dump(2) + "\n";
    if (o.out.empty()) {
        std::cout << text;
    } else {
        write_file(o.out, text);
    }
    if (!has_diagnostics(report)) return kExitOk;
    return o.strict ? kExitFatal : kExitDiagnostics;
}

int fatal(const Json& error) {
    std::cerr << Json{{"error", error}}.dump(2) << "\n";
    return kExitFatal;
}

void add_class_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--dh", o.dh, "maximum column step")->check(CLI::NonNegativeNumber);
    cmd->add_option("--dv", o.dv, "maximum row step")->check(CLI::NonNegativeNumber);
    cmd->add_option("--dman", o.dman, "maximum Manhattan step (default dh+dv)")->check(CLI::PositiveNumber);
    cmd->add_option("--eq-start", o.eq_start, "similarity of anchor cells")
        ->check(CLI::IsMember({"copy", "logical", "structural"}));
    cmd->add_option("--eq-rest", o.eq_rest, "similarity of the other cells")
        ->check(CLI::IsMember({"copy", "logical", "structural"}));
}

void add_io(CLI::App* cmd, Options& o) {
    cmd->add_option("workbook", o.workbook, "CSV or JSON workbook")->required();
    cmd->add_option("--format", o.format, "workbook format (default: by extension)")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--out", o.out, "write the JSON report here instead of stdout");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spreadsheet auditing toolkit: logical areas, semantic classes, data modules"};
    app.require_subcommand(1);
    Options o;
    app.add_flag("--strict", o.strict, "treat diagnostics as fatal");

    auto* inspect = app.add_subcommand("inspect", "dependency graph statistics and sink list");
    add_io(inspect, o);
    inspect->add_option("--dot", o.dot, "also write the DDG as DOT");

    auto* areas = app.add_subcommand("areas", "logical areas at one equivalence level");
    add_io(areas, o);
    areas->add_option("--level", o.level)->check(CLI::IsMember({"copy", "logical", "structural"}));

    auto* classes = app.add_subcommand("classes", "semantic classes and their units");
    add_io(classes, o);
    add_class_flags(classes, o);
    classes->add_option("--highlight", o.highlight, "write the cell,class_id,unit_id CSV here");

    auto* modules = app.add_subcommand("modules", "data modules after sink curation");
    add_io(modules, o);
    modules->add_option("--exclude", o.exclude, "exclude a current sink (repeatable, applied in order)");
    modules->add_option("--highlight", o.highlight, "write the cell,module_id CSV here");

    auto* srg = app.add_subcommand("srg", "set-relation graph over units or modules");
    add_io(srg, o);
    srg->add_option("--mode", o.mode)->check(CLI::IsMember({"units", "modules"}));
    srg->add_option("--fisheye", o.fisheye, "expand this module vertex");
    srg->add_option("--exclude", o.exclude, "exclude a current sink (modules mode)");
    srg->add_option("--dot", o.dot, "also write the SRG as DOT");
    srg->add_option("--style", o.style, "DOT style")->check(CLI::IsMember({"plain", "audit"}));
    add_class_flags(srg, o);

    auto* diff = app.add_subcommand("diff-eq", "how coarse logical areas split at a finer level");
    add_io(diff, o);
    diff->add_option("--fine", o.fine)->check(CLI::IsMember({"copy", "logical", "structural"}));
    diff->add_option("--coarse", o.coarse)->check(CLI::IsMember({"copy", "logical", "structural"}));

    auto* constants = app.add_subcommand("constants", "literal values embedded in formulas");
    add_io(constants, o);

    auto* trace = app.add_subcommand("trace", "predecessor modules to check for a faulty module");
    add_io(trace, o);
    trace->add_option("--module", o.module, "suspect module id (e.g. B3-module)")->required();
    trace->add_option("--exclude", o.exclude, "exclude a current sink (repeatable)");

    auto* serve = app.add_subcommand("serve", "run the HTTP audit service");
    serve->add_option("--port", o.port)->check(CLI::Range(0, 65535));
    serve->add_option("--host", o.host);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitFatal;
    }

    try {
        if (serve->parsed()) {
            httplib::Server server;
            AuditService service;
            service.mount(server);
            std::cerr << "listening on " << o.host << ":" << o.port << "\n";
            return server.listen(o.host, o.port) ? kExitOk : kExitFatal;
        }

        auto start = std::chrono::steady_clock::now();
        Workspace ws(load(o));

        if (inspect->parsed()) {
            if (!o.dot.empty()) write_file(o.dot, to_dot(ws.ddg()));
            return emit(o, report_inspect(ws), start);
        }
        if (areas->parsed()) return emit(o, report_areas(ws, *parse_level(o.level)), start);
        if (classes->parsed()) {
            Json report = report_classes(ws, class_params(o));
            if (!o.highlight.empty()) write_file(o.highlight, highlight_csv(report));
            return emit(o, std::move(report), start);
        }
        if (modules->parsed()) {
            Json report = report_modules(ws, exclusions(o));
            if (!o.highlight.empty()) write_file(o.highlight, highlight_csv(report));
            return emit(o, std::move(report), start);
        }
        if (srg->parsed()) {
            CommandOptions opt = srg_options(o);
            if (!o.dot.empty()) {
                write_file(o.dot, to_dot(build_srg(ws, opt), o.style == "plain" ? DotStyle::Plain : DotStyle::Audit));
            }
            return emit(o, report_srg(ws, opt), start);
        }
        if (diff->parsed()) return emit(o, report_diff(ws, *parse_level(o.fine), *parse_level(o.coarse)), start);
        if (constants->parsed()) return emit(o, report_constants(ws), start);
        if (trace->parsed()) return emit(o, report_trace(ws, exclusions(o), o.module), start);
    } catch (const Error& e) {
        return fatal(json::error(e));
    } catch (const std::exception& e) {
        return fatal(Json{{"code", "Internal"}, {"message", e.what()}});
    }
    return kExitFatal;
}
