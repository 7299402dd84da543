#include "sheetaudit/report.hpp"

#include "support/expect.hpp"
#include "support/fixtures.hpp"

#include <gtest/gtest.h>

using namespace sheetaudit;
using fixtures::at;

TEST(Report, EnvelopeShape) {
    Workspace ws(fixtures::s2());
    Json r = report_inspect(ws);
    std::vector<std::string> keys;
    for (const auto& [k, v] : r.items()) keys.push_back(k);
    EXPECT_EQ(keys, (std::vector<std::string>{"schema", "command", "input", "parameters", "result", "diagnostics"}));
    EXPECT_EQ(r["schema"], 1);
    EXPECT_EQ(r["command"], "inspect");
    EXPECT_EQ(r["input"]["digest"], sheet_digest(fixtures::s2()));
    EXPECT_FALSE(has_diagnostics(r));
}

TEST(Report, InspectS2) {
    Workspace ws(fixtures::s2());
    Json expected = Json::parse(R"({
        "ddg": {"nodes": 5, "edges": 4, "formula_cells": 3, "input_cells": 2},
        "acyclic": true, "sinks": ["B3", "C3"], "cycle": []})");
    EXPECT_EQ(report_inspect(ws)["result"], expected);
}

TEST(Report, InspectReportsCycleAndOutOfGrid) {
    Workspace cyclic(load_csv("=B1,=A1\n"));
    Json r = report_inspect(cyclic);
    EXPECT_EQ(r["result"]["acyclic"], false);
    EXPECT_EQ(r["result"]["cycle"], Json::parse(R"(["A1","B1","A1"])"));
    ASSERT_TRUE(has_diagnostics(r));
    EXPECT_EQ(r["diagnostics"][0]["kind"], "cycle");

    Workspace edge(load_csv("1,=A1+XFE1\n"));
    Json d = report_inspect(edge)["diagnostics"];
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0]["kind"], "out-of-grid");
    EXPECT_EQ(d[0]["cells"], Json::parse(R"(["B1"])"));
}

TEST(Report, ModulesS2Golden) {
    Workspace ws(fixtures::s2());
    Json expected = Json::parse(R"({
        "count": 3,
        "modules": [
            {"id": "A3-module", "result": "A3", "cells": ["A1", "A2", "A3"]},
            {"id": "B3-module", "result": "B3", "cells": ["B3"]},
            {"id": "C3-module", "result": "C3", "cells": ["C3"]}],
        "violations": [],
        "highlight": [["A1","A3-module"],["A2","A3-module"],["A3","A3-module"],["B3","B3-module"],["C3","C3-module"]],
        "curation": {"active": ["B3","C3"], "excluded": [], "history": []}})");
    Json r = report_modules(ws, std::vector<CellAddr>{});
    EXPECT_EQ(r["result"], expected);
    EXPECT_EQ(r["parameters"], Json::parse(R"({"exclude": []})"));
    EXPECT_EQ(highlight_csv(r), "cell,module_id\nA1,A3-module\nA2,A3-module\nA3,A3-module\nB3,B3-module\nC3,C3-module\n");
}

TEST(Report, ModulesWithExclusion) {
    Workspace ws(fixtures::s2());
    Json r = report_modules(ws, std::vector<CellAddr>{at("B3")});
    EXPECT_EQ(r["parameters"]["exclude"], Json::parse(R"(["B3"])"));
    EXPECT_EQ(r["result"]["count"], 1);
    EXPECT_EQ(r["result"]["curation"]["excluded"], Json::parse(R"(["B3"])"));
    EXPECT_SA_ERROR(ErrorCode::NotASink, report_modules(ws, std::vector<CellAddr>{at("A1")}));
}

TEST(Report, SinksS2) {
    Workspace ws(fixtures::s2());
    Ddg g = build_ddg(fixtures::s2());
    Json r = report_sinks(ws, exclude_sink(curate_init(g), g, at("B3")));
    EXPECT_EQ(r["command"], "sinks");
    EXPECT_EQ(r["result"], Json::parse(R"({"active":["C3"],"excluded":["B3"],
        "history":[{"excluded":"B3","promoted":[]}]})"));
}

TEST(Report, SrgS2Golden) {
    Workspace ws(fixtures::s2());
    Json expected = Json::parse(R"({
        "origin": "modules", "acyclic": true,
        "vertices": [
            {"id":"A3-module","kind":"module","cells":["A1","A2","A3"],"range":"A1:A3","flags":[]},
            {"id":"B3-module","kind":"module","cells":["B3"],"range":"B3","flags":["sink"]},
            {"id":"C3-module","kind":"module","cells":["C3"],"range":"C3","flags":["sink"]}],
        "edges": [
            {"from":"A3-module","to":"B3-module","witness":["A3","B3"],"witness_count":1},
            {"from":"A3-module","to":"C3-module","witness":["A3","C3"],"witness_count":1}]})");
    Json r = report_srg(ws, CommandOptions{});
    EXPECT_EQ(r["result"], expected);
    EXPECT_EQ(r["parameters"], Json::parse(R"({"mode":"modules","exclude":[],"fisheye":null})"));
}

TEST(Report, SrgUnitsAndFisheye) {
    Workspace ws(fixtures::s1());
    CommandOptions opt;
    opt.srg_mode = SrgOrigin::Units;
    Json r = report_srg(ws, opt);
    EXPECT_EQ(r["result"]["origin"], "units");
    EXPECT_EQ(r["result"]["vertices"].size(), 7u);
    EXPECT_EQ(r["parameters"]["dman"], 1);

    CommandOptions focus;
    focus.fisheye = "C3-module";
    EXPECT_EQ(report_srg(ws, focus)["result"]["vertices"].size(), 7u);
    focus.fisheye = "Z1";
    EXPECT_SA_ERROR(ErrorCode::UnknownModule, report_srg(ws, focus));
}

TEST(Report, ClassesS1) {
    Workspace ws(fixtures::s1());
    Json r = report_classes(ws, ClassParams{});
    EXPECT_EQ(r["parameters"], Json::parse(R"({"dh":1,"dv":0,"dman":1,"eq_start":"copy","eq_rest":"copy"})"));
    EXPECT_EQ(r["result"]["count"], 2);
    const Json& k1 = r["result"]["classes"][0];
    EXPECT_EQ(k1["id"], "K1");
    EXPECT_EQ(k1["shape"], "0,0");
    EXPECT_EQ(k1["units"][1], Json::parse(R"({"id":"K1.2","anchor":"C2","cells":["C2"]})"));
    EXPECT_EQ(k1["pattern"]["note"], "no pattern basis");
    EXPECT_EQ(highlight_csv(r), "cell,class_id,unit_id\nC1,K1,K1.1\nC2,K1,K1.2\nC3,K2,K2.1\n");

    ClassParams bad;
    bad.geometry.d_man = 5;
    EXPECT_SA_ERROR(ErrorCode::InvalidParameters, report_classes(ws, bad));
}

TEST(Report, DiffS1) {
    Workspace ws(fixtures::s1());
    Json r = report_diff(ws, EqLevel::Copy, EqLevel::Structural);
    EXPECT_EQ(r["command"], "diff-eq");
    Json expected = Json::parse(R"({"fine":"copy","coarse":"structural",
        "areas":[{"id":"L1","cells":["C1","C2","C3"],
                  "splits":[{"id":"L1","cells":["C1","C2"]},{"id":"L2","cells":["C3"]}],
                  "hotspot":true}],
        "hotspots":["L1"]})");
    EXPECT_EQ(r["result"], expected);
}

TEST(Report, AreasAndConstants) {
    Workspace ws(load_csv("1,=A1*1.5,\"=\"\"x\"\"&A1\"\n"));
    Json areas = report_areas(ws, EqLevel::Logical)["result"];
    EXPECT_EQ(areas["level"], "logical");
    EXPECT_EQ(areas["areas"].size(), 2u);
    EXPECT_EQ(areas["areas"][0]["id"], "L1");
    Json constants = report_constants(ws)["result"]["constants"];
    EXPECT_EQ(constants, Json::parse(R"([{"cell":"B1","values":[1.5]},{"cell":"C1","values":["x"]}])"));
}

TEST(Report, TraceS2) {
    Workspace ws(fixtures::s2());
    Json r = report_trace(ws, std::vector<CellAddr>{}, "B3");
    EXPECT_EQ(r["result"], Json::parse(R"({"module":"B3-module",
        "predecessors":[{"module":"A3-module","result":"A3"}],"fault_inside":false})"));
    EXPECT_EQ(report_trace(ws, std::vector<CellAddr>{}, "A3-module")["result"]["fault_inside"], true);
    EXPECT_SA_ERROR(ErrorCode::UnknownModule, report_trace(ws, std::vector<CellAddr>{}, "nope"));
}

TEST(Report, WithoutTimings) {
    Workspace ws(fixtures::s2());
    Json r = report_inspect(ws);
    Json timed = r;
    timed["timings"] = Json{{"total_ms", 1.5}};
    EXPECT_EQ(without_timings(timed), r);
}
