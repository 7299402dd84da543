#include "sheetaudit/formula.hpp"

#include "support/expect.hpp"
#include "support/fixtures.hpp"
#include "support/generators.hpp"

#include <gtest/gtest.h>

using namespace sheetaudit;
using fixtures::at;

namespace {

Ast ref(std::int32_t drow, std::int32_t dcol) { return Ast::make_ref(CellRef::relative(drow, dcol)); }

std::vector<CellRef> refs_of(const Ast& ast) {
    std::vector<CellRef> out;
    for_each_reference(ast, [&](const CellRef& first, const CellRef* last) {
        out.push_back(first);
        if (last) out.push_back(*last);
    });
    return out;
}

} // namespace

TEST(ParseFormula, RelativeOffsets) {
    Ast expected = Ast::make_binary(BinaryOp::Add, ref(0, -2), ref(0, -1));
    EXPECT_EQ(parse_formula("=A1+B1", at("C1")), expected);
}

TEST(ParseFormula, AbsoluteRangeInCall) {
    Ast range = Ast::make_range(CellRef::absolute(3, 3), CellRef::relative(1, -1));
    Ast expected = Ast::make_binary(BinaryOp::Mul, Ast::make_call("SUM", {range}), Ast::make_number(2));
    EXPECT_EQ(parse_formula("=SUM($C$3:C5)*2", at("D4")), expected);
}

TEST(ParseFormula, MixedModes) {
    Ast a = parse_formula("=$A1+A$1", at("C3"));
    ASSERT_EQ(a.children.size(), 2u);
    EXPECT_EQ(a.children[0].ref, (CellRef{RefMode::Relative, RefMode::Absolute, -2, 1}));
    EXPECT_EQ(a.children[1].ref, (CellRef{RefMode::Absolute, RefMode::Relative, 1, -2}));
}

TEST(ParseFormula, PrecedenceAndAssociativity) {
    // 1+2*3 -> 1+(2*3); 1-2-3 -> (1-2)-3; comparison binds loosest; & with +.
    Ast a = parse_formula("=1+2*3", at("A1"));
    EXPECT_EQ(a, Ast::make_binary(BinaryOp::Add, Ast::make_number(1),
                                  Ast::make_binary(BinaryOp::Mul, Ast::make_number(2), Ast::make_number(3))));
    Ast b = parse_formula("=1-2-3", at("A1"));
    EXPECT_EQ(b, Ast::make_binary(BinaryOp::Sub,
                                  Ast::make_binary(BinaryOp::Sub, Ast::make_number(1), Ast::make_number(2)),
                                  Ast::make_number(3)));
    Ast c = parse_formula("=1+2>=3&\"x\"", at("A1"));
    ASSERT_EQ(c.kind, NodeKind::Binary);
    EXPECT_EQ(c.op, BinaryOp::Ge);
    EXPECT_EQ(c.children[1].op, BinaryOp::Concat);
    Ast d = parse_formula("=-A1^2", at("B1"));
    EXPECT_EQ(d, Ast::make_binary(BinaryOp::Pow, Ast::make_negate(ref(0, -1)), Ast::make_number(2)));
}

TEST(ParseFormula, AllOperators) {
    const std::vector<std::pair<std::string, BinaryOp>> ops{
        {"+", BinaryOp::Add}, {"-", BinaryOp::Sub},    {"*", BinaryOp::Mul}, {"/", BinaryOp::Div},
        {"^", BinaryOp::Pow}, {"&", BinaryOp::Concat}, {"=", BinaryOp::Eq},  {"<>", BinaryOp::Ne},
        {"<", BinaryOp::Lt},  {"<=", BinaryOp::Le},    {">", BinaryOp::Gt},  {">=", BinaryOp::Ge}};
    for (const auto& [text, op] : ops) {
        Ast a = parse_formula("=1" + text + "2", at("A1"));
        ASSERT_EQ(a.kind, NodeKind::Binary) << text;
        EXPECT_EQ(a.op, op) << text;
    }
}

TEST(ParseFormula, LiteralsCallsAndWhitespace) {
    Ast a = parse_formula("= if ( A1 > 0.5 , \"a\"\"b\" , max( ) )", at("B2"));
    Ast expected = Ast::make_call(
        "IF", {Ast::make_binary(BinaryOp::Gt, ref(-1, -1), Ast::make_number(0.5)), Ast::make_text("a\"b"),
               Ast::make_call("MAX", {})});
    EXPECT_EQ(a, expected);
    EXPECT_EQ(parse_formula("=1.5e2", at("A1")), Ast::make_number(150));
    EXPECT_EQ(parse_formula("=.25", at("A1")), Ast::make_number(0.25));
    EXPECT_EQ(parse_formula("=((A1))", at("A2")), ref(-1, 0));
}

TEST(ParseFormula, Errors) {
    for (const char* bad : {"=)", "A1+B1", "=", "=1+", "=SUM(1,", "=(1", "=\"open", "=A1:", "=1 2", "=$1",
                            "=A$", "=#REF!", "=1..2", "=1e+", "=A1 B1", "=SUM(1,)", "=A0", "=A01",
                            "=ABCD1", "=A12345678", "=$SUM(1)", "=1SUM(2)"}) {
        EXPECT_SA_ERROR(ErrorCode::ParseError, parse_formula(bad, at("A1")));
    }
}

TEST(ParseFormula, ErrorReportsPosition) {
    try {
        parse_formula("=1+)", at("A1"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("4"), std::string::npos) << e.what();
    }
}

TEST(ParseFormula, NestingLimit) {
    std::string deep = "=" + std::string(300, '(') + "1" + std::string(300, ')');
    EXPECT_SA_ERROR(ErrorCode::ParseError, parse_formula(deep, at("A1")));
    std::string ok = "=" + std::string(100, '(') + "1" + std::string(100, ')');
    EXPECT_EQ(parse_formula(ok, at("A1")), Ast::make_number(1));
}

TEST(ParseFormula, OutOfGridReferenceIsStillParsed) {
    Ast a = parse_formula("=XFE1", at("B2"));
    EXPECT_EQ(a.ref, CellRef::relative(-1, 16385 - 2));
    EXPECT_SA_ERROR(ErrorCode::OutOfGrid, resolve(a.ref, at("B2")));
    EXPECT_SA_ERROR(ErrorCode::OutOfGrid, referenced_cells(parse_formula("=SUM(A1:A1048577)", at("B1")), at("B1")));
    // The copy of "=A1" from B2 one row up points above the grid.
    EXPECT_SA_ERROR(ErrorCode::OutOfGrid, resolve(parse_formula("=A1", at("B2")).ref, at("B1")));
}

TEST(Resolve, Examples) {
    EXPECT_EQ(resolve(CellRef::relative(-1, -1), at("B2")), at("A1"));
    EXPECT_EQ(resolve(CellRef::absolute(3, 3), at("Z99")), at("C3"));
    EXPECT_SA_ERROR(ErrorCode::OutOfGrid, resolve(CellRef::relative(-5, 0), at("A2")));
    EXPECT_SA_ERROR(ErrorCode::OutOfGrid, resolve(CellRef::relative(0, 1), CellAddr{1, kMaxCols}));
}

TEST(ReferencedCells, Examples) {
    Sheet s1 = fixtures::s1();
    EXPECT_EQ(referenced_cells(parse_formula("=A1+B1", at("C1")), at("C1"), s1), (std::set<CellAddr>{at("A1"), at("B1")}));
    EXPECT_EQ(referenced_cells(parse_formula("=SUM(A1:B2)", at("C3")), at("C3")),
              (std::set<CellAddr>{at("A1"), at("A2"), at("B1"), at("B2")}));
    EXPECT_EQ(referenced_cells(parse_formula("=A1+A1", at("B1")), at("B1")), (std::set<CellAddr>{at("A1")}));
    // Reversed corners describe the same rectangle.
    EXPECT_EQ(referenced_cells(parse_formula("=SUM(B2:A1)", at("C3")), at("C3")).size(), 4u);
}

TEST(RenderFormula, Canonical) {
    EXPECT_EQ(render_formula(parse_formula("= sum( a1 , $B$2:c$3 ) * -2.50", at("D4")), at("D4")),
              "=SUM(A1,$B$2:C$3)*-2.5");
    EXPECT_EQ(render_formula(parse_formula("=(1+2)*3", at("A1")), at("A1")), "=(1+2)*3");
    EXPECT_EQ(render_formula(parse_formula("=1-(2-3)", at("A1")), at("A1")), "=1-(2-3)");
    EXPECT_EQ(render_formula(parse_formula("=\"q\"\"\"&A1", at("B1")), at("B1")), "=\"q\"\"\"&A1");
}

TEST(ParsedSheet, AggregatesParseErrors) {
    Sheet s = load_csv("=1+,=A1,=)\n");
    try {
        ParsedSheet parsed(s);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ParseError);
        ASSERT_EQ(e.details().size(), 2u);
        EXPECT_EQ(e.details()[0].rfind("A1:", 0), 0u);
        EXPECT_EQ(e.details()[1].rfind("C1:", 0), 0u);
    }
}

// Property: a template rendered at two origins parses to the same tree, and
// its references normalize to the template's own offsets.
TEST(FormulaProperty, CopyTranslationInvariance) {
    gen::Rng rng(0xf0f0);
    for (int i = 0; i < 400; ++i) {
        gen::Template t = gen::random_template(rng, 4);
        CellAddr o{gen::uniform(rng, 5, 300), gen::uniform(rng, 5, 200)};
        CellAddr p{gen::uniform(rng, 5, 300), gen::uniform(rng, 5, 200)};
        std::string src_o = gen::render(t, o, rng);
        std::string src_p = gen::render(t, p, rng);
        Ast ao = parse_formula(src_o, o);
        Ast ap = parse_formula(src_p, p);
        ASSERT_EQ(ao, ap) << src_o << " @" << to_a1(o) << " vs " << src_p << " @" << to_a1(p);
        ASSERT_EQ(parse_formula(src_o, o), ao);  // determinism

        std::vector<gen::RefSpec> want;
        gen::collect_refs(t, want);
        auto got = refs_of(ao);
        ASSERT_EQ(got.size(), want.size()) << src_o;
        for (std::size_t k = 0; k < want.size(); ++k) {
            ASSERT_EQ(got[k].row_mode == RefMode::Absolute, want[k].row.absolute) << src_o;
            ASSERT_EQ(got[k].col_mode == RefMode::Absolute, want[k].col.absolute) << src_o;
            ASSERT_EQ(got[k].row, want[k].row.value) << src_o;
            ASSERT_EQ(got[k].col, want[k].col.value) << src_o;
        }
        // Canonical text parses back to the same tree.
        ASSERT_EQ(parse_formula(render_formula(ao, o), o), ao) << render_formula(ao, o);
    }
}

TEST(FormulaProperty, RangeExpansionSize) {
    gen::Rng rng(0xabc);
    for (int i = 0; i < 300; ++i) {
        CellAddr origin{gen::uniform(rng, 1, 40), gen::uniform(rng, 1, 40)};
        CellAddr a{gen::uniform(rng, 1, 30), gen::uniform(rng, 1, 30)};
        CellAddr b{gen::uniform(rng, 1, 30), gen::uniform(rng, 1, 30)};
        Ast ast = parse_formula("=SUM(" + gen::a1(a) + ":" + gen::a1(b) + ")", origin);
        auto cells = referenced_cells(ast, origin);
        std::size_t expected = static_cast<std::size_t>((std::abs(a.row - b.row) + 1) * (std::abs(a.col - b.col) + 1));
        ASSERT_EQ(cells.size(), expected);
        ASSERT_TRUE(cells.count(a) && cells.count(b));
    }
}
