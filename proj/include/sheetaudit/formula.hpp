#pragma once

#include "sheetaudit/error.hpp"
#include "sheetaudit/grid.hpp"

#include <array>
#include <charconv>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sheetaudit {

enum class RefMode : std::uint8_t { Relative, Absolute };

/// A reference with independent row/column modes. A Relative component holds
/// the signed offset from the formula's own cell, an Absolute one the coordinate.
struct CellRef {
    RefMode row_mode = RefMode::Relative;
    RefMode col_mode = RefMode::Relative;
    std::int32_t row = 0;
    std::int32_t col = 0;

    friend bool operator==(const CellRef&, const CellRef&) = default;

    static CellRef relative(std::int32_t drow, std::int32_t dcol) {
        return {RefMode::Relative, RefMode::Relative, drow, dcol};
    }
    static CellRef absolute(std::int32_t row, std::int32_t col) {
        return {RefMode::Absolute, RefMode::Absolute, row, col};
    }
};

enum class NodeKind : std::uint8_t { Number, Text, Ref, Range, Call, Binary, Negate };

enum class BinaryOp : std::uint8_t { Add, Sub, Mul, Div, Pow, Concat, Eq, Ne, Lt, Le, Gt, Ge };

inline std::string_view symbol(BinaryOp op) {
    switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Pow: return "^";
    case BinaryOp::Concat: return "&";
    case BinaryOp::Eq: return "=";
    case BinaryOp::Ne: return "<>";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
    }
    return "?";
}

inline int precedence(BinaryOp op) {
    switch (op) {
    case BinaryOp::Eq:
    case BinaryOp::Ne:
    case BinaryOp::Lt:
    case BinaryOp::Le:
    case BinaryOp::Gt:
    case BinaryOp::Ge: return 1;
    case BinaryOp::Add:
    case BinaryOp::Sub:
    case BinaryOp::Concat: return 2;
    default: return 3;
    }
}

/// Formula syntax tree. References are stored origin-relative, so the tree
/// produced by the parser is already the normalized form: two copy-pasted
/// formulas compare equal.
struct Ast {
    NodeKind kind = NodeKind::Number;
    double number = 0.0;     // Number
    std::string text;        // Text literal, or upper-cased function name for Call
    BinaryOp op = BinaryOp::Add;
    CellRef ref;             // Ref, and first corner of Range
    CellRef ref_end;         // second corner of Range
    std::vector<Ast> children;

    static Ast make_number(double v) {
        Ast a;
        a.kind = NodeKind::Number;
        a.number = v;
        return a;
    }
    static Ast make_text(std::string s) {
        Ast a;
        a.kind = NodeKind::Text;
        a.text = std::move(s);
        return a;
    }
    static Ast make_ref(CellRef r) {
        Ast a;
        a.kind = NodeKind::Ref;
        a.ref = r;
        return a;
    }
    static Ast make_range(CellRef first, CellRef last) {
        Ast a;
        a.kind = NodeKind::Range;
        a.ref = first;
        a.ref_end = last;
        return a;
    }
    static Ast make_call(std::string name, std::vector<Ast> args) {
        Ast a;
        a.kind = NodeKind::Call;
        a.text = std::move(name);
        a.children = std::move(args);
        return a;
    }
    static Ast make_binary(BinaryOp op, Ast lhs, Ast rhs) {
        Ast a;
        a.kind = NodeKind::Binary;
        a.op = op;
        a.children.push_back(std::move(lhs));
        a.children.push_back(std::move(rhs));
        return a;
    }
    static Ast make_negate(Ast operand) {
        Ast a;
        a.kind = NodeKind::Negate;
        a.children.push_back(std::move(operand));
        return a;
    }
};

using NormalizedAst = Ast;

inline bool operator==(const Ast& a, const Ast& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
    case NodeKind::Number: return a.number == b.number;
    case NodeKind::Text: return a.text == b.text;
    case NodeKind::Ref: return a.ref == b.ref;
    case NodeKind::Range: return a.ref == b.ref && a.ref_end == b.ref_end;
    case NodeKind::Call: return a.text == b.text && a.children == b.children;
    case NodeKind::Binary: return a.op == b.op && a.children == b.children;
    case NodeKind::Negate: return a.children == b.children;
    }
    return false;
}

/// Shortest round-trip decimal rendering of a literal.
inline std::string format_number(double v) {
    if (v == 0.0) return "0";
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

// ---------------------------------------------------------------------------
// Parser

namespace detail {

class FormulaParser {
public:
    FormulaParser(std::string_view src, CellAddr origin) : src_(src), origin_(origin) {}

    Ast parse() {
        if (src_.empty() || src_.front() != '=') fail(0, "formula must start with '='");
        pos_ = 1;
        Ast root = comparison();
        skip_ws();
        if (pos_ != src_.size()) fail(pos_, "unexpected '" + std::string(1, src_[pos_]) + "'");
        return root;
    }

private:
    static constexpr int kMaxDepth = 256;

    [[noreturn]] void fail(std::size_t at, const std::string& what) const {
        throw Error(ErrorCode::ParseError, "position " + std::to_string(at + 1) + ": " + what);
    }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool accept(std::string_view token) {
        skip_ws();
        if (src_.substr(pos_, token.size()) == token) {
            pos_ += token.size();
            return true;
        }
        return false;
    }

    struct DepthGuard {
        FormulaParser& p;
        explicit DepthGuard(FormulaParser& parser) : p(parser) {
            if (++p.depth_ > kMaxDepth) p.fail(p.pos_, "expression nested too deeply");
        }
        ~DepthGuard() { --p.depth_; }
    };

    Ast comparison() {
        DepthGuard guard(*this);
        Ast lhs = additive();
        while (true) {
            BinaryOp op;
            if (accept("<>")) op = BinaryOp::Ne;
            else if (accept("<=")) op = BinaryOp::Le;
            else if (accept(">=")) op = BinaryOp::Ge;
            else if (accept("=")) op = BinaryOp::Eq;
            else if (accept("<")) op = BinaryOp::Lt;
            else if (accept(">")) op = BinaryOp::Gt;
            else break;
            lhs = Ast::make_binary(op, std::move(lhs), additive());
        }
        return lhs;
    }

    Ast additive() {
        Ast lhs = multiplicative();
        while (true) {
            BinaryOp op;
            if (accept("+")) op = BinaryOp::Add;
            else if (accept("-")) op = BinaryOp::Sub;
            else if (accept("&")) op = BinaryOp::Concat;
            else break;
            lhs = Ast::make_binary(op, std::move(lhs), multiplicative());
        }
        return lhs;
    }

    Ast multiplicative() {
        Ast lhs = unary();
        while (true) {
            BinaryOp op;
            if (accept("*")) op = BinaryOp::Mul;
            else if (accept("/")) op = BinaryOp::Div;
            else if (accept("^")) op = BinaryOp::Pow;
            else break;
            lhs = Ast::make_binary(op, std::move(lhs), unary());
        }
        return lhs;
    }

    Ast unary() {
        DepthGuard guard(*this);
        if (accept("-")) return Ast::make_negate(unary());
        return atom();
    }

    Ast atom() {
        skip_ws();
        if (pos_ >= src_.size()) fail(pos_, "unexpected end of formula");
        char ch = src_[pos_];
        if (ch == '(') {
            ++pos_;
            Ast inner = comparison();
            if (!accept(")")) fail(pos_, "expected ')'");
            return inner;
        }
        if (ch == '"') return string_literal();
        if (is_digit(ch) || (ch == '.' && pos_ + 1 < src_.size() && is_digit(src_[pos_ + 1]))) {
            return number_literal();
        }
        if (is_alpha(ch) || ch == '$' || ch == '_') return word();
        fail(pos_, "unexpected '" + std::string(1, ch) + "'");
    }

    Ast string_literal() {
        std::size_t start = pos_++;
        std::string value;
        while (pos_ < src_.size()) {
            char ch = src_[pos_++];
            if (ch == '"') {
                if (pos_ < src_.size() && src_[pos_] == '"') {
                    value.push_back('"');
                    ++pos_;
                    continue;
                }
                return Ast::make_text(std::move(value));
            }
            value.push_back(ch);
        }
        fail(start, "unterminated string literal");
    }

    Ast number_literal() {
        std::size_t start = pos_;
        while (pos_ < src_.size() && is_digit(src_[pos_])) ++pos_;
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            while (pos_ < src_.size() && is_digit(src_[pos_])) ++pos_;
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t mark = pos_++;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (pos_ >= src_.size() || !is_digit(src_[pos_])) {
                pos_ = mark;
                fail(mark, "malformed exponent");
            }
            while (pos_ < src_.size() && is_digit(src_[pos_])) ++pos_;
        }
        auto value = parse_decimal(src_.substr(start, pos_ - start));
        if (!value) fail(start, "malformed number");
        return Ast::make_number(*value);
    }

    static bool word_char(char ch) { return is_alpha(ch) || is_digit(ch) || ch == '_' || ch == '.' || ch == '$'; }

    Ast word() {
        std::size_t start = pos_;
        while (pos_ < src_.size() && word_char(src_[pos_])) ++pos_;
        std::string_view w = src_.substr(start, pos_ - start);

        std::size_t after = pos_;
        while (after < src_.size() && std::isspace(static_cast<unsigned char>(src_[after]))) ++after;
        bool is_call = after < src_.size() && src_[after] == '(';

        if (is_call) {
            if (w.find('$') != std::string_view::npos || !(is_alpha(w.front()) || w.front() == '_')) {
                fail(start, "malformed function name '" + std::string(w) + "'");
            }
            pos_ = after + 1;
            std::string name;
            for (char ch : w) name.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
            std::vector<Ast> args;
            if (!accept(")")) {
                do {
                    args.push_back(comparison());
                } while (accept(","));
                if (!accept(")")) fail(pos_, "expected ',' or ')' in argument list");
            }
            return Ast::make_call(std::move(name), std::move(args));
        }

        CellRef first = reference(w, start);
        if (accept(":")) {
            skip_ws();
            std::size_t second_start = pos_;
            while (pos_ < src_.size() && word_char(src_[pos_])) ++pos_;
            if (pos_ == second_start) fail(second_start, "expected reference after ':'");
            CellRef last = reference(src_.substr(second_start, pos_ - second_start), second_start);
            return Ast::make_range(first, last);
        }
        return Ast::make_ref(first);
    }

    CellRef reference(std::string_view w, std::size_t at) const {
        std::size_t i = 0;
        bool col_abs = false, row_abs = false;
        if (i < w.size() && w[i] == '$') col_abs = true, ++i;
        std::size_t letters = i;
        while (i < w.size() && is_alpha(w[i])) ++i;
        std::string_view col_text = w.substr(letters, i - letters);
        if (i < w.size() && w[i] == '$') row_abs = true, ++i;
        std::string_view row_text = w.substr(i);
        bool digits_only = !row_text.empty()
                        && std::all_of(row_text.begin(), row_text.end(), [](char c) { return is_digit(c); });
        if (col_text.empty() || !digits_only) fail(at, "unknown name '" + std::string(w) + "'");
        // Addresses past the grid edge (up to ZZZ9999999) still parse; they
        // fail later in resolve() so the dependency graph can flag them.
        if (col_text.size() > 3 || row_text.size() > 7 || row_text.front() == '0') {
            fail(at, "malformed reference '" + std::string(w) + "'");
        }
        std::int32_t col = 0, row = 0;
        for (char ch : col_text) col = col * 26 + (std::toupper(static_cast<unsigned char>(ch)) - 'A' + 1);
        for (char ch : row_text) row = row * 10 + (ch - '0');

        CellRef ref;
        ref.col_mode = col_abs ? RefMode::Absolute : RefMode::Relative;
        ref.row_mode = row_abs ? RefMode::Absolute : RefMode::Relative;
        ref.col = col_abs ? col : col - origin_.col;
        ref.row = row_abs ? row : row - origin_.row;
        return ref;
    }

    std::string_view src_;
    CellAddr origin_;
    std::size_t pos_ = 0;
    int depth_ = 0;
};

} // namespace detail

/// Parses `src` (which must start with '=') as the formula stored at `origin`.
inline Ast parse_formula(std::string_view src, CellAddr origin) {
    return detail::FormulaParser(src, origin).parse();
}

inline CellAddr resolve(const CellRef& ref, CellAddr origin) {
    std::int64_t row = ref.row_mode == RefMode::Absolute ? ref.row : std::int64_t{origin.row} + ref.row;
    std::int64_t col = ref.col_mode == RefMode::Absolute ? ref.col : std::int64_t{origin.col} + ref.col;
    if (!in_grid(row, col)) {
        throw Error(ErrorCode::OutOfGrid, "reference from " + to_a1(origin) + " leaves the grid (row "
                                              + std::to_string(row) + ", col " + std::to_string(col) + ")");
    }
    return CellAddr{static_cast<std::int32_t>(row), static_cast<std::int32_t>(col)};
}

/// Visits every Ref and Range node in source order.
template <typename Fn>
void for_each_reference(const Ast& ast, Fn&& fn) {
    if (ast.kind == NodeKind::Ref) {
        fn(ast.ref, static_cast<const CellRef*>(nullptr));
    } else if (ast.kind == NodeKind::Range) {
        fn(ast.ref, &ast.ref_end);
    }
    for (const auto& child : ast.children) for_each_reference(child, fn);
}

/// Rectangle covered by a Ref (1x1) or Range, resolved at `origin`.
inline Extent reference_rectangle(const CellRef& first, const CellRef* last, CellAddr origin) {
    CellAddr a = resolve(first, origin);
    CellAddr b = last ? resolve(*last, origin) : a;
    return Extent{{std::min(a.row, b.row), std::min(a.col, b.col)}, {std::max(a.row, b.row), std::max(a.col, b.col)}};
}

/// All addresses a formula reads, ranges expanded. Emptiness is not filtered.
inline std::set<CellAddr> referenced_cells(const Ast& ast, CellAddr origin) {
    std::set<CellAddr> out;
    for_each_reference(ast, [&](const CellRef& first, const CellRef* last) {
        Extent rect = reference_rectangle(first, last, origin);
        for (std::int32_t r = rect.top_left.row; r <= rect.bottom_right.row; ++r) {
            for (std::int32_t c = rect.top_left.col; c <= rect.bottom_right.col; ++c) out.insert({r, c});
        }
    });
    return out;
}

inline std::set<CellAddr> referenced_cells(const Ast& ast, CellAddr origin, const Sheet& /*sheet*/) {
    return referenced_cells(ast, origin);
}

// ---------------------------------------------------------------------------
// Rendering back to A1 text

namespace detail {

inline std::string render_ref(const CellRef& ref, CellAddr origin) {
    std::int64_t row = ref.row_mode == RefMode::Absolute ? ref.row : std::int64_t{origin.row} + ref.row;
    std::int64_t col = ref.col_mode == RefMode::Absolute ? ref.col : std::int64_t{origin.col} + ref.col;
    if (!in_grid(row, col)) {
        throw Error(ErrorCode::OutOfGrid, "cannot render reference outside the grid at " + to_a1(origin));
    }
    std::string out;
    if (ref.col_mode == RefMode::Absolute) out.push_back('$');
    out += column_label(static_cast<std::int32_t>(col));
    if (ref.row_mode == RefMode::Absolute) out.push_back('$');
    out += std::to_string(row);
    return out;
}

inline void render(const Ast& ast, CellAddr origin, std::string& out) {
    switch (ast.kind) {
    case NodeKind::Number: out += format_number(ast.number); break;
    case NodeKind::Text:
        out.push_back('"');
        for (char ch : ast.text) {
            if (ch == '"') out.push_back('"');
            out.push_back(ch);
        }
        out.push_back('"');
        break;
    case NodeKind::Ref: out += render_ref(ast.ref, origin); break;
    case NodeKind::Range:
        out += render_ref(ast.ref, origin);
        out.push_back(':');
        out += render_ref(ast.ref_end, origin);
        break;
    case NodeKind::Call:
        out += ast.text;
        out.push_back('(');
        for (std::size_t i = 0; i < ast.children.size(); ++i) {
            if (i) out.push_back(',');
            render(ast.children[i], origin, out);
        }
        out.push_back(')');
        break;
    case NodeKind::Binary: {
        int p = precedence(ast.op);
        const Ast& lhs = ast.children[0];
        const Ast& rhs = ast.children[1];
        bool wrap_l = lhs.kind == NodeKind::Binary && precedence(lhs.op) < p;
        bool wrap_r = rhs.kind == NodeKind::Binary && precedence(rhs.op) <= p;
        if (wrap_l) out.push_back('(');
        render(lhs, origin, out);
        if (wrap_l) out.push_back(')');
        out += symbol(ast.op);
        if (wrap_r) out.push_back('(');
        render(rhs, origin, out);
        if (wrap_r) out.push_back(')');
        break;
    }
    case NodeKind::Negate: {
        const Ast& operand = ast.children[0];
        bool wrap = operand.kind == NodeKind::Binary;
        out.push_back('-');
        if (wrap) out.push_back('(');
        render(operand, origin, out);
        if (wrap) out.push_back(')');
        break;
    }
    }
}

} // namespace detail

/// Canonical A1 text ("=..." without whitespace) of `ast` placed at `origin`.
inline std::string render_formula(const Ast& ast, CellAddr origin) {
    std::string out = "=";
    detail::render(ast, origin, out);
    return out;
}

// ---------------------------------------------------------------------------
// Whole-sheet parsing

/// Parsed formulas of one sheet, row-major.
class ParsedSheet {
public:
    struct Entry {
        CellAddr addr;
        Ast ast;
    };

    /// Parses every formula cell. All failures are collected and reported in
    /// one ParseError whose details name each bad cell.
    explicit ParsedSheet(const Sheet& sheet) : sheet_(&sheet) {
        std::vector<std::string> failures;
        for (const auto& [addr, content] : sheet.cells()) {
            if (content.kind != CellKind::Formula) continue;
            try {
                index_.emplace(addr, entries_.size());
                entries_.push_back({addr, parse_formula(content.text, addr)});
            } catch (const Error& e) {
                index_.erase(addr);
                failures.push_back(to_a1(addr) + ": " + e.what());
            }
        }
        if (!failures.empty()) {
            std::string message = std::to_string(failures.size()) + " formula cell(s) failed to parse";
            throw Error(ErrorCode::ParseError, std::move(message), std::move(failures));
        }
    }

    const Sheet& sheet() const noexcept { return *sheet_; }
    const std::vector<Entry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }

    const Ast* find(CellAddr addr) const {
        auto it = index_.find(addr);
        return it == index_.end() ? nullptr : &entries_[it->second].ast;
    }

    /// Position of `addr` in entries(), or npos.
    std::size_t index_of(CellAddr addr) const {
        auto it = index_.find(addr);
        return it == index_.end() ? npos : it->second;
    }

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    const Sheet* sheet_;
    std::vector<Entry> entries_;
    std::unordered_map<CellAddr, std::size_t, CellAddrHash> index_;
};

} // namespace sheetaudit
