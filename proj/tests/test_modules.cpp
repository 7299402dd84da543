#include "sheetaudit/modules.hpp"
#include "sheetaudit/srg.hpp"

#include "support/expect.hpp"
#include "support/fixtures.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

using namespace sheetaudit;
using fixtures::at;

namespace {

std::vector<CellAddr> cells(std::initializer_list<const char*> names) {
    std::vector<CellAddr> out;
    for (const char* n : names) out.push_back(at(n));
    return out;
}

std::map<CellAddr, std::set<CellAddr>> partition(const std::vector<DataModule>& modules) {
    std::map<CellAddr, std::set<CellAddr>> out;
    for (const auto& m : modules) out[m.result] = std::set<CellAddr>(m.members.begin(), m.members.end());
    return out;
}

/// A random topological order (Kahn with random choice), reversed.
std::vector<NodeId> random_reverse_topo(const Ddg& g, gen::Rng& rng) {
    std::vector<std::size_t> indeg(g.size());
    std::vector<NodeId> ready, order;
    for (NodeId v = 0; v < g.size(); ++v) {
        indeg[v] = g.predecessors(v).size();
        if (!indeg[v]) ready.push_back(v);
    }
    while (!ready.empty()) {
        std::size_t k = static_cast<std::size_t>(gen::uniform(rng, 0, static_cast<int>(ready.size()) - 1));
        NodeId u = ready[k];
        ready.erase(ready.begin() + static_cast<std::ptrdiff_t>(k));
        order.push_back(u);
        for (NodeId s : g.successors(u)) {
            if (--indeg[s] == 0) ready.push_back(s);
        }
    }
    std::reverse(order.begin(), order.end());
    return order;
}

} // namespace

TEST(CurateInit, Examples) {
    EXPECT_EQ(curate_init(build_ddg(fixtures::s2())).active, cells({"B3", "C3"}));
    EXPECT_EQ(curate_init(build_ddg(fixtures::s1())).active, cells({"C3"}));
    EXPECT_TRUE(curate_init(build_ddg(fixtures::s1())).excluded.empty());
    try {
        curate_init(build_ddg(load_csv("=B1,=A1\n")));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::CyclicDDG);
        EXPECT_EQ(e.details(), (std::vector<std::string>{"A1", "B1", "A1"}));
    }
}

TEST(ExcludeSink, Examples) {
    Ddg s2 = build_ddg(fixtures::s2());
    SinkCuration cur = exclude_sink(curate_init(s2), s2, at("B3"));
    EXPECT_EQ(cur.active, cells({"C3"}));
    EXPECT_EQ(cur.excluded, (std::set<CellAddr>{at("B3")}));
    ASSERT_EQ(cur.history.size(), 1u);
    EXPECT_TRUE(cur.history[0].promoted.empty());

    Ddg s1 = build_ddg(fixtures::s1());
    SinkCuration cur1 = exclude_sink(curate_init(s1), s1, at("C3"));
    EXPECT_EQ(cur1.active, cells({"C1", "C2"}));
    EXPECT_EQ(cur1.history[0].promoted, cells({"C1", "C2"}));

    EXPECT_SA_ERROR(ErrorCode::NotASink, exclude_sink(curate_init(s2), s2, at("A1")));
    EXPECT_SA_ERROR(ErrorCode::NotASink, exclude_sink(cur, s2, at("B3")));
}

TEST(ExcludeSink, PromotionWaitsForEverySuccessor) {
    Ddg s2 = build_ddg(fixtures::s2());
    SinkCuration cur = exclude_sink(curate_init(s2), s2, at("B3"));
    cur = exclude_sink(cur, s2, at("C3"));
    EXPECT_EQ(cur.active, cells({"A3"}));
    cur = exclude_sink(cur, s2, at("A3"));
    EXPECT_EQ(cur.active, cells({"A1", "A2"}));
}

TEST(RestoreSink, UndoesExclusion) {
    Ddg s2 = build_ddg(fixtures::s2());
    SinkCuration start = curate_init(s2);
    SinkCuration cur = exclude_sink(start, s2, at("B3"));
    EXPECT_EQ(restore_sink(cur, s2, at("B3")), start);

    // Restoring an earlier step replays the later ones.
    SinkCuration two = exclude_sink(exclude_sink(start, s2, at("B3")), s2, at("C3"));
    SinkCuration only_c3 = exclude_sink(start, s2, at("C3"));
    EXPECT_EQ(restore_sink(two, s2, at("B3")), only_c3);
}

TEST(RestoreSink, Errors) {
    Ddg s1 = build_ddg(fixtures::s1());
    SinkCuration start = curate_init(s1);
    EXPECT_SA_ERROR(ErrorCode::NotRestorable, restore_sink(start, s1, at("C3")));
    SinkCuration deep = exclude_sink(exclude_sink(start, s1, at("C3")), s1, at("C1"));
    // C1 was only a sink because C3 was gone.
    EXPECT_SA_ERROR(ErrorCode::NotRestorable, restore_sink(deep, s1, at("C3")));
    EXPECT_EQ(restore_sink(deep, s1, at("C1")), exclude_sink(start, s1, at("C3")));
}

TEST(RecoverModules, S2) {
    Ddg g = build_ddg(fixtures::s2());
    auto modules = recover_modules(g, cells({"B3", "C3"}));
    ASSERT_EQ(modules.size(), 3u);
    EXPECT_EQ(modules[0].result, at("A3"));
    EXPECT_EQ(modules[0].members, cells({"A1", "A2", "A3"}));
    EXPECT_EQ(modules[0].id(), "A3-module");
    EXPECT_EQ(modules[1].members, cells({"B3"}));
    EXPECT_EQ(modules[2].members, cells({"C3"}));
}

TEST(RecoverModules, S1SingleModule) {
    Ddg g = build_ddg(fixtures::s1());
    auto modules = recover_modules(g, curate_init(g));
    ASSERT_EQ(modules.size(), 1u);
    EXPECT_EQ(modules[0].result, at("C3"));
    EXPECT_EQ(modules[0].members, cells({"A1", "B1", "C1", "A2", "B2", "C2", "C3"}));
}

TEST(RecoverModules, NoResults) {
    EXPECT_TRUE(recover_modules(build_ddg(fixtures::s1()), std::vector<CellAddr>{}).empty());
}

TEST(RecoverModules, AfterExcludingB3) {
    Ddg g = build_ddg(fixtures::s2());
    auto modules = recover_modules(g, exclude_sink(curate_init(g), g, at("B3")));
    ASSERT_EQ(modules.size(), 1u);
    EXPECT_EQ(modules[0].result, at("C3"));
    EXPECT_EQ(modules[0].members, cells({"A1", "A2", "A3", "C3"}));
}

TEST(RecoverModules, IntermediateResultAbsorbsUpstreamCell) {
    // B1 feeds only A2, and A2 feeds two results: A2 becomes a result and B1 joins it.
    Sheet s = load_csv("1,=A1\n=B1*2\n=A2+1,=A2-1\n");
    Ddg g = build_ddg(s);
    auto p = partition(recover_modules(g, curate_init(g)));
    EXPECT_EQ(p.size(), 3u);
    EXPECT_EQ(p.at(at("A2")), (std::set<CellAddr>{at("A1"), at("B1"), at("A2")}));
}

TEST(BoundaryCheck, Examples) {
    Ddg s2 = build_ddg(fixtures::s2());
    EXPECT_TRUE(module_boundary_check(recover_modules(s2, curate_init(s2)), s2).empty());
    Ddg s1 = build_ddg(fixtures::s1());
    EXPECT_TRUE(module_boundary_check(recover_modules(s1, curate_init(s1)), s1).empty());

    std::vector<DataModule> bad{{at("B3"), cells({"A1", "B3"})}, {at("A3"), cells({"A2", "A3"})}, {at("C3"), cells({"C3"})}};
    auto violations = module_boundary_check(bad, s2);
    ASSERT_EQ(violations.size(), 1u);
    EXPECT_EQ(violations[0].from, at("A1"));
    EXPECT_EQ(violations[0].to, at("A3"));
    EXPECT_EQ(violations[0].from_module, "B3-module");
    EXPECT_EQ(violations[0].to_module, "A3-module");
}

TEST(FaultTrace, S2) {
    Ddg g = build_ddg(fixtures::s2());
    auto modules = recover_modules(g, curate_init(g));
    Srg srg = srg_of_modules(modules, g);
    auto from_b3 = fault_trace_step(modules, srg, "B3-module");
    ASSERT_EQ(from_b3.size(), 1u);
    EXPECT_EQ(from_b3[0].module, "A3-module");
    EXPECT_EQ(from_b3[0].result, at("A3"));
    EXPECT_EQ(fault_trace_step(modules, srg, "B3").size(), 1u);
    EXPECT_TRUE(fault_trace_step(modules, srg, "A3-module").empty());
    EXPECT_SA_ERROR(ErrorCode::UnknownModule, fault_trace_step(modules, srg, "Q9-module"));
}

TEST(FindModule, AcceptsBothSpellings) {
    Ddg g = build_ddg(fixtures::s2());
    auto modules = recover_modules(g, curate_init(g));
    EXPECT_EQ(find_module(modules, "A3-module"), find_module(modules, "A3"));
    EXPECT_EQ(find_module(modules, "A1"), nullptr);
}

TEST(MisreferenceSensitivity, ConstructedCases) {
    // Twin pipelines; a stray reference from the middle of one into the other
    // turns the middle cell into a result of its own.
    Sheet clean = load_csv("1,=A1*2,=B1+1\n2,=A2*2,=B2+1\n");
    Sheet stray = load_csv("1,=A1*2,=B1+1\n2,=A2*2,=B2+1+B1\n");
    Ddg gc = build_ddg(clean), gs = build_ddg(stray);
    auto before = recover_modules(gc, curate_init(gc));
    auto after = recover_modules(gs, curate_init(gs));
    EXPECT_EQ(before.size(), 2u);
    EXPECT_EQ(after.size(), 3u);
    EXPECT_NE(find_module(after, "B1-module"), nullptr);

    // Removing S2's reference from C3 to A3 merges A3's module into B3's.
    Sheet cut = load_csv("1,,\n2,,\n=A1+A2,=A3*2,=1+1\n");
    Ddg gx = build_ddg(cut);
    auto merged = recover_modules(gx, curate_init(gx));
    EXPECT_EQ(merged.size(), 2u);
    EXPECT_EQ(merged[0].members, cells({"A1", "A2", "A3", "B3"}));
}

// ---------------------------------------------------------------------------
// Properties over random acyclic sheets

TEST(ModulesProperty, MatchesPathEnumerationOracle) {
    gen::Rng rng(0x0dd1e5);
    for (int i = 0; i < 120; ++i) {
        gen::DagSheet d = gen::random_dag_sheet(rng);
        Ddg g = build_ddg(d.sheet);
        oracle::Graph og = oracle::graph_of(d);
        SinkCuration cur = curate_init(g);
        std::set<CellAddr> excluded;
        int exclusions = gen::uniform(rng, 0, 3);
        for (int k = 0; k <= exclusions; ++k) {
            auto expected_active = oracle::active_sinks(og, excluded);
            ASSERT_EQ(cur.active, expected_active) << d.csv_hint;
            auto want = oracle::modules(og, excluded, expected_active);
            ASSERT_TRUE(want.fixpoint_ok);
            auto got = recover_modules(g, cur);
            ASSERT_EQ(partition(got), want.by_result) << d.csv_hint;
            if (k == exclusions || cur.active.empty()) break;
            CellAddr victim = gen::pick(rng, cur.active);
            cur = exclude_sink(cur, g, victim);
            excluded.insert(victim);
        }
    }
}

TEST(ModulesProperty, PartitionSingleSinkBoundaryAndOrderIndependence) {
    gen::Rng rng(0xb0da);
    for (int i = 0; i < 200; ++i) {
        gen::DagSheet d = gen::random_dag_sheet(rng, gen::uniform(rng, 2, 8), gen::uniform(rng, 2, 6));
        Ddg g = build_ddg(d.sheet);
        SinkCuration cur = curate_init(g);
        if (!cur.active.empty() && gen::chance(rng, 0.5)) cur = exclude_sink(cur, g, gen::pick(rng, cur.active));
        auto modules = recover_modules(g, cur);
        ASSERT_TRUE(module_boundary_check(modules, g).empty()) << d.csv_hint;
        ASSERT_TRUE(orphaned_cells(g, cur).empty());

        std::map<CellAddr, CellAddr> owner;
        for (const auto& m : modules) {
            for (CellAddr c : m.members) ASSERT_TRUE(owner.emplace(c, m.result).second);
            std::set<CellAddr> inside(m.members.begin(), m.members.end());
            std::size_t local_sinks = 0;
            for (CellAddr c : m.members) {
                bool has_inner_succ = false;
                for (NodeId s : g.successors(g.id_of(c))) has_inner_succ |= inside.count(g.addr(s)) > 0;
                if (!has_inner_succ) {
                    ++local_sinks;
                    ASSERT_EQ(c, m.result);
                }
            }
            ASSERT_EQ(local_sinks, 1u);
        }
        // Every non-excluded node is in some module.
        for (CellAddr n : g.nodes()) ASSERT_EQ(owner.count(n) == 1, cur.excluded.count(n) == 0) << to_a1(n);

        for (int k = 0; k < 3; ++k) {
            auto order = random_reverse_topo(g, rng);
            ASSERT_EQ(partition(recover_modules(g, cur.active, order)), partition(modules));
        }
    }
}

TEST(ModulesProperty, MonotoneCuration) {
    gen::Rng rng(0x3030);
    for (int i = 0; i < 200; ++i) {
        gen::DagSheet d = gen::random_dag_sheet(rng);
        Ddg g = build_ddg(d.sheet);
        SinkCuration cur = curate_init(g);
        if (cur.active.empty()) continue;
        CellAddr x = gen::pick(rng, cur.active);
        auto before = recover_modules(g, cur);
        auto after = partition(recover_modules(g, exclude_sink(cur, g, x)));

        // Cells that reach x, x included.
        std::set<CellAddr> feeds_x{x};
        std::vector<NodeId> stack{g.id_of(x)};
        while (!stack.empty()) {
            NodeId u = stack.back();
            stack.pop_back();
            for (NodeId p : g.predecessors(u)) {
                if (feeds_x.insert(g.addr(p)).second) stack.push_back(p);
            }
        }
        for (const auto& m : before) {
            // Module and everything upstream of it must stay clear of x.
            std::set<CellAddr> upstream(m.members.begin(), m.members.end());
            std::vector<NodeId> work;
            for (CellAddr c : m.members) work.push_back(g.id_of(c));
            while (!work.empty()) {
                NodeId u = work.back();
                work.pop_back();
                for (NodeId p : g.predecessors(u)) {
                    if (upstream.insert(g.addr(p)).second) work.push_back(p);
                }
            }
            bool touches = std::any_of(upstream.begin(), upstream.end(), [&](CellAddr c) { return feeds_x.count(c) > 0; });
            if (touches) continue;
            ASSERT_TRUE(after.count(m.result)) << d.csv_hint;
            ASSERT_EQ(after.at(m.result), std::set<CellAddr>(m.members.begin(), m.members.end())) << d.csv_hint;
        }
    }
}

TEST(ModulesProperty, AddedReferenceOnlyRefines) {
    gen::Rng rng(0xadd);
    int checked = 0;
    for (int i = 0; i < 300; ++i) {
        gen::DagSheet d = gen::random_dag_sheet(rng);
        Ddg g = build_ddg(d.sheet);
        auto results = sinks(g);
        // Pick a non-sink source and a later formula cell that does not read it yet.
        std::vector<std::pair<CellAddr, CellAddr>> options;
        for (CellAddr u : g.nodes()) {
            if (std::find(results.begin(), results.end(), u) != results.end()) continue;
            for (const auto& [f, refs] : d.refs) {
                if (u < f && !refs.count(u)) options.push_back({u, f});
            }
        }
        if (options.empty()) continue;
        auto [u, f] = gen::pick(rng, options);
        Sheet changed = d.sheet;
        changed.set(f, CellContent::from_field(d.sheet.find(f)->text + "+" + to_a1(u)));
        Ddg g2 = build_ddg(changed);
        ASSERT_EQ(sinks(g2), results);
        auto before = recover_modules(g, results);
        auto after = recover_modules(g2, results);
        ASSERT_GE(after.size(), before.size());
        std::map<CellAddr, CellAddr> old_owner;
        for (const auto& m : before) {
            for (CellAddr c : m.members) old_owner[c] = m.result;
        }
        for (const auto& m : after) {
            std::set<CellAddr> owners;
            for (CellAddr c : m.members) owners.insert(old_owner.at(c));
            ASSERT_EQ(owners.size(), 1u) << "merged modules: " << d.csv_hint << " +" << to_a1(u) << "->" << to_a1(f);
        }
        ++checked;
    }
    EXPECT_GT(checked, 100);
}
