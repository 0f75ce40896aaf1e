#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "tlcause/error.hpp"

namespace tlcause {

/// Time window [lo, hi] in time units. An absent hi means unbounded (inf),
/// which is distinct from every finite value.
struct WindowBound {
    std::size_t lo = 0;
    std::optional<std::size_t> hi;

    [[nodiscard]] static WindowBound exact(std::size_t lag) { return {lag, lag}; }
    [[nodiscard]] static WindowBound unbounded(std::size_t lo) { return {lo, std::nullopt}; }

    [[nodiscard]] bool bounded() const noexcept { return hi.has_value(); }
    [[nodiscard]] bool valid() const noexcept { return !hi || lo <= *hi; }

    friend bool operator==(const WindowBound&, const WindowBound&) = default;

    /// Orders by lo, then hi with inf after every finite bound.
    friend bool operator<(const WindowBound& a, const WindowBound& b) noexcept {
        if (a.lo != b.lo) return a.lo < b.lo;
        if (a.hi.has_value() != b.hi.has_value()) return a.hi.has_value();
        return a.hi && *a.hi < *b.hi;
    }
};

enum class Comparator { Ge, Gt, Le, Lt };

struct ProbBound {
    Comparator comparator = Comparator::Ge;
    double p = 0.0;

    [[nodiscard]] bool holds(double value) const noexcept {
        switch (comparator) {
            case Comparator::Ge: return value >= p;
            case Comparator::Gt: return value > p;
            case Comparator::Le: return value <= p;
            case Comparator::Lt: return value < p;
        }
        return false;
    }

    friend bool operator==(const ProbBound&, const ProbBound&) = default;
};

struct FormulaNode;

/// Immutable handle to a formula tree. Copies share structure; equality is
/// structural.
class Formula {
public:
    Formula() = default;
    explicit Formula(std::shared_ptr<const FormulaNode> node) : node_(std::move(node)) {}

    [[nodiscard]] const FormulaNode& node() const { return *node_; }
    [[nodiscard]] bool empty() const noexcept { return node_ == nullptr; }

    template <typename T>
    [[nodiscard]] const T* as() const;

    friend bool operator==(const Formula& a, const Formula& b);

private:
    std::shared_ptr<const FormulaNode> node_;
};

struct Atom {
    std::string name;
    friend bool operator==(const Atom&, const Atom&) = default;
};
struct Not {
    Formula operand;
    friend bool operator==(const Not&, const Not&) = default;
};
struct And {
    Formula lhs, rhs;
    friend bool operator==(const And&, const And&) = default;
};
struct Or {
    Formula lhs, rhs;
    friend bool operator==(const Or&, const Or&) = default;
};
/// lhs holds at every step until rhs holds, with rhs reached within the window.
struct Until {
    WindowBound window;
    std::optional<ProbBound> bound;
    Formula lhs, rhs;
    friend bool operator==(const Until&, const Until&) = default;
};
/// After cause holds, effect holds between window.lo and window.hi steps later.
struct LeadsTo {
    WindowBound window;
    std::optional<ProbBound> bound;
    Formula cause, effect;
    friend bool operator==(const LeadsTo&, const LeadsTo&) = default;
};
/// inner holds within window.hi steps (window.lo is always 0).
struct Finally {
    WindowBound window;
    std::optional<ProbBound> bound;
    Formula inner;
    friend bool operator==(const Finally&, const Finally&) = default;
};

struct FormulaNode {
    std::variant<Atom, Not, And, Or, Until, LeadsTo, Finally> value;
};

template <typename T>
const T* Formula::as() const {
    return node_ ? std::get_if<T>(&node_->value) : nullptr;
}

inline bool operator==(const Formula& a, const Formula& b) {
    if (a.node_ == b.node_) return true;
    if (!a.node_ || !b.node_) return false;
    return a.node_->value == b.node_->value;
}

namespace make {

inline Formula node(auto value) {
    return Formula(std::make_shared<const FormulaNode>(FormulaNode{std::move(value)}));
}
inline Formula atom(std::string name) { return node(Atom{std::move(name)}); }
inline Formula negate(Formula f) { return node(Not{std::move(f)}); }
inline Formula conj(Formula a, Formula b) { return node(And{std::move(a), std::move(b)}); }
inline Formula disj(Formula a, Formula b) { return node(Or{std::move(a), std::move(b)}); }
inline Formula until(WindowBound w, Formula a, Formula b, std::optional<ProbBound> bound = {}) {
    return node(Until{w, bound, std::move(a), std::move(b)});
}
inline Formula leads_to(WindowBound w, Formula c, Formula e, std::optional<ProbBound> bound = {}) {
    return node(LeadsTo{w, bound, std::move(c), std::move(e)});
}
inline Formula finally(std::optional<std::size_t> horizon, Formula f,
                       std::optional<ProbBound> bound = {}) {
    return node(Finally{WindowBound{0, horizon}, bound, std::move(f)});
}

}  // namespace make

// ---------------------------------------------------------------------------
// Structural queries

inline bool contains_leads_to(const Formula& f) {
    return std::visit(
        [](const auto& n) -> bool {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Atom>) {
                return false;
            } else if constexpr (std::is_same_v<T, Not>) {
                return contains_leads_to(n.operand);
            } else if constexpr (std::is_same_v<T, And> || std::is_same_v<T, Or>) {
                return contains_leads_to(n.lhs) || contains_leads_to(n.rhs);
            } else if constexpr (std::is_same_v<T, Until>) {
                return contains_leads_to(n.lhs) || contains_leads_to(n.rhs);
            } else if constexpr (std::is_same_v<T, Finally>) {
                return contains_leads_to(n.inner);
            } else {
                return true;
            }
        },
        f.node().value);
}

inline bool contains_prob_bound(const Formula& f) {
    return std::visit(
        [](const auto& n) -> bool {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Atom>) {
                return false;
            } else if constexpr (std::is_same_v<T, Not>) {
                return contains_prob_bound(n.operand);
            } else if constexpr (std::is_same_v<T, And> || std::is_same_v<T, Or>) {
                return contains_prob_bound(n.lhs) || contains_prob_bound(n.rhs);
            } else if constexpr (std::is_same_v<T, Until>) {
                return n.bound || contains_prob_bound(n.lhs) || contains_prob_bound(n.rhs);
            } else if constexpr (std::is_same_v<T, Finally>) {
                return n.bound || contains_prob_bound(n.inner);
            } else {
                return n.bound || contains_prob_bound(n.cause) || contains_prob_bound(n.effect);
            }
        },
        f.node().value);
}

// ---------------------------------------------------------------------------
// Printing

namespace detail {

// Binding strength, loosest first. U and F bind tighter than ~>.
enum Level : int { kLeadsTo = 0, kTemporal = 1, kOr = 2, kAnd = 3, kNot = 4, kAtom = 5 };

inline int level_of(const Formula& f) {
    return std::visit(
        [](const auto& n) -> int {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Atom>) return kAtom;
            else if constexpr (std::is_same_v<T, Not>) return kNot;
            else if constexpr (std::is_same_v<T, And>) return kAnd;
            else if constexpr (std::is_same_v<T, Or>) return kOr;
            else if constexpr (std::is_same_v<T, LeadsTo>) return kLeadsTo;
            else return kTemporal;
        },
        f.node().value);
}

inline std::string format_probability(double p) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, p);
    return std::string(buf, res.ptr);
}

inline std::string format_bound(const std::optional<ProbBound>& b) {
    if (!b) return {};
    const char* op = ">=";
    switch (b->comparator) {
        case Comparator::Ge: op = ">="; break;
        case Comparator::Gt: op = ">"; break;
        case Comparator::Le: op = "<="; break;
        case Comparator::Lt: op = "<"; break;
    }
    return std::string("{") + op + format_probability(b->p) + "}";
}

inline std::string format_hi(const std::optional<std::size_t>& hi) {
    return hi ? std::to_string(*hi) : std::string("inf");
}

inline void print_into(std::string& out, const Formula& f);

inline void print_child(std::string& out, const Formula& f, int min_level) {
    if (level_of(f) < min_level) {
        out += '(';
        print_into(out, f);
        out += ')';
    } else {
        print_into(out, f);
    }
}

inline void print_into(std::string& out, const Formula& f) {
    std::visit(
        [&out](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Atom>) {
                out += n.name;
            } else if constexpr (std::is_same_v<T, Not>) {
                out += '!';
                print_child(out, n.operand, kNot);
            } else if constexpr (std::is_same_v<T, And>) {
                print_child(out, n.lhs, kAnd);
                out += " & ";
                print_child(out, n.rhs, kNot);
            } else if constexpr (std::is_same_v<T, Or>) {
                print_child(out, n.lhs, kOr);
                out += " | ";
                print_child(out, n.rhs, kAnd);
            } else if constexpr (std::is_same_v<T, Until>) {
                print_child(out, n.lhs, kOr);
                out += " U[" + std::to_string(n.window.lo) + "," + format_hi(n.window.hi) + "]" +
                       format_bound(n.bound) + " ";
                print_child(out, n.rhs, kTemporal);
            } else if constexpr (std::is_same_v<T, LeadsTo>) {
                print_child(out, n.cause, kTemporal);
                out += " ~>[" + std::to_string(n.window.lo) + "," + format_hi(n.window.hi) + "]" +
                       format_bound(n.bound) + " ";
                print_child(out, n.effect, kLeadsTo);
            } else {
                out += "F[" + format_hi(n.window.hi) + "]" + format_bound(n.bound) + " ";
                print_child(out, n.inner, kTemporal);
            }
        },
        f.node().value);
}

}  // namespace detail

/// Canonical text with minimal parentheses; parse(print(f)) == f.
inline std::string print(const Formula& f) {
    std::string out;
    detail::print_into(out, f);
    return out;
}

// ---------------------------------------------------------------------------
// Parsing
//
//   leadsto  := temporal ( '~>' window bound? leadsto )?
//   temporal := 'F' '[' hi ']' bound? temporal
//             | or ( 'U' window bound? temporal )?
//   or       := and ( '|' and )*
//   and      := unary ( '&' unary )*
//   unary    := '!' unary | IDENT | '(' leadsto ')'
//   window   := '[' INT ',' ( INT | 'inf' ) ']'
//   bound    := '{' ( '>=' | '>' | '<=' | '<' ) NUMBER '}'
//
// 'U' and 'F' are operators only when directly followed by '['; otherwise
// they are ordinary atom names.

namespace detail {

enum class Tok { Ident, Number, LParen, RParen, LBracket, RBracket, LBrace, RBrace, Comma,
                 Not, And, Or, LeadsTo, Ge, Gt, Le, Lt, End };

struct Token {
    Tok kind;
    std::string text;
    std::size_t line;
    std::size_t column;
};

inline bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
inline bool is_ident_char(char c) {
    return is_ident_start(c) || (c >= '0' && c <= '9') || c == '.';
}
inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

inline std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> out;
    std::size_t line = 1;
    std::size_t col = 1;
    std::size_t i = 0;
    auto push = [&](Tok k, std::size_t len) {
        out.push_back({k, std::string(text.substr(i, len)), line, col});
        i += len;
        col += len;
    };
    while (i < text.size()) {
        const char c = text[i];
        if (c == '\n') {
            ++line;
            col = 1;
            ++i;
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\r') {
            ++i;
            ++col;
            continue;
        }
        if (is_ident_start(c)) {
            std::size_t j = i + 1;
            while (j < text.size() && is_ident_char(text[j])) ++j;
            push(Tok::Ident, j - i);
            continue;
        }
        if (is_digit(c) || c == '.') {
            std::size_t j = i;
            while (j < text.size() && (is_digit(text[j]) || text[j] == '.')) ++j;
            if (j < text.size() && (text[j] == 'e' || text[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < text.size() && (text[k] == '+' || text[k] == '-')) ++k;
                if (k < text.size() && is_digit(text[k])) {
                    j = k;
                    while (j < text.size() && is_digit(text[j])) ++j;
                }
            }
            push(Tok::Number, j - i);
            continue;
        }
        const char n = i + 1 < text.size() ? text[i + 1] : '\0';
        switch (c) {
            case '(': push(Tok::LParen, 1); continue;
            case ')': push(Tok::RParen, 1); continue;
            case '[': push(Tok::LBracket, 1); continue;
            case ']': push(Tok::RBracket, 1); continue;
            case '{': push(Tok::LBrace, 1); continue;
            case '}': push(Tok::RBrace, 1); continue;
            case ',': push(Tok::Comma, 1); continue;
            case '!': push(Tok::Not, 1); continue;
            case '&': push(Tok::And, 1); continue;
            case '|': push(Tok::Or, 1); continue;
            case '~':
                if (n == '>') {
                    push(Tok::LeadsTo, 2);
                    continue;
                }
                break;
            case '>': push(n == '=' ? Tok::Ge : Tok::Gt, n == '=' ? 2 : 1); continue;
            case '<': push(n == '=' ? Tok::Le : Tok::Lt, n == '=' ? 2 : 1); continue;
            default: break;
        }
        throw ParseError("unexpected character", line, col, std::string(1, c));
    }
    out.push_back({Tok::End, "", line, col});
    return out;
}

class Parser {
public:
    explicit Parser(std::string_view text) : tokens_(tokenize(text)) {}

    Formula parse_all() {
        Formula f = parse_leads_to();
        if (peek().kind != Tok::End) fail("unexpected token");
        return f;
    }

private:
    const Token& peek(std::size_t ahead = 0) const {
        return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)];
    }
    const Token& advance() { return tokens_[pos_ < tokens_.size() - 1 ? pos_++ : pos_]; }

    [[noreturn]] void fail(const std::string& message) const { fail_at(message, peek()); }
    [[noreturn]] static void fail_at(const std::string& message, const Token& t) {
        throw ParseError(message, t.line, t.column, t.kind == Tok::End ? "<end>" : t.text);
    }

    const Token& expect(Tok kind, const char* what) {
        if (peek().kind != kind) fail(std::string("expected ") + what);
        return advance();
    }

    bool at_operator(const char* keyword) const {
        return peek().kind == Tok::Ident && peek().text == keyword &&
               peek(1).kind == Tok::LBracket;
    }

    Formula parse_leads_to() {
        Formula lhs = parse_temporal();
        if (peek().kind == Tok::LeadsTo) {
            advance();
            const Token& at = peek();
            WindowBound w = parse_window();
            if (w.lo == 0) fail_at("leads-to window must start at 1 or later", at);
            auto bound = parse_bound();
            Formula rhs = parse_leads_to();
            return make::leads_to(w, std::move(lhs), std::move(rhs), bound);
        }
        return lhs;
    }

    Formula parse_temporal() {
        if (at_operator("F")) {
            advance();
            expect(Tok::LBracket, "'['");
            auto hi = parse_hi();
            expect(Tok::RBracket, "']'");
            auto bound = parse_bound();
            Formula inner = parse_temporal();
            return make::finally(hi, std::move(inner), bound);
        }
        Formula lhs = parse_or();
        if (at_operator("U")) {
            advance();
            WindowBound w = parse_window();
            auto bound = parse_bound();
            Formula rhs = parse_temporal();
            return make::until(w, std::move(lhs), std::move(rhs), bound);
        }
        return lhs;
    }

    Formula parse_or() {
        Formula lhs = parse_and();
        while (peek().kind == Tok::Or) {
            advance();
            lhs = make::disj(std::move(lhs), parse_and());
        }
        return lhs;
    }

    Formula parse_and() {
        Formula lhs = parse_unary();
        while (peek().kind == Tok::And) {
            advance();
            lhs = make::conj(std::move(lhs), parse_unary());
        }
        return lhs;
    }

    Formula parse_unary() {
        switch (peek().kind) {
            case Tok::Not:
                advance();
                return make::negate(parse_unary());
            case Tok::LParen: {
                advance();
                Formula inner = parse_leads_to();
                expect(Tok::RParen, "')'");
                return inner;
            }
            case Tok::Ident:
                if (peek().text == "inf" || at_operator("U") || at_operator("F")) {
                    fail("expected an atom");
                }
                return make::atom(advance().text);
            default:
                fail("expected an atom, '!' or '('");
        }
    }

    std::size_t parse_count() {
        const Token& t = peek();
        if (t.kind != Tok::Number) fail("expected a non-negative integer");
        std::size_t value = 0;
        auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), value);
        if (res.ec != std::errc{} || res.ptr != t.text.data() + t.text.size()) {
            fail("expected a non-negative integer");
        }
        advance();
        return value;
    }

    std::optional<std::size_t> parse_hi() {
        if (peek().kind == Tok::Ident && peek().text == "inf") {
            advance();
            return std::nullopt;
        }
        return parse_count();
    }

    WindowBound parse_window() {
        const Token& open = expect(Tok::LBracket, "'['");
        WindowBound w;
        w.lo = parse_count();
        expect(Tok::Comma, "','");
        w.hi = parse_hi();
        expect(Tok::RBracket, "']'");
        if (!w.valid()) fail_at("window lower bound exceeds upper bound", open);
        return w;
    }

    std::optional<ProbBound> parse_bound() {
        if (peek().kind != Tok::LBrace) return std::nullopt;
        advance();
        ProbBound b;
        switch (peek().kind) {
            case Tok::Ge: b.comparator = Comparator::Ge; break;
            case Tok::Gt: b.comparator = Comparator::Gt; break;
            case Tok::Le: b.comparator = Comparator::Le; break;
            case Tok::Lt: b.comparator = Comparator::Lt; break;
            default: fail("expected a comparator (>=, >, <=, <)");
        }
        advance();
        const Token& num = peek();
        if (num.kind != Tok::Number) fail("expected a probability");
        auto res = std::from_chars(num.text.data(), num.text.data() + num.text.size(), b.p);
        if (res.ec != std::errc{} || res.ptr != num.text.data() + num.text.size()) {
            fail("malformed probability");
        }
        if (!(b.p >= 0.0 && b.p <= 1.0)) fail("probability must lie in [0,1]");
        advance();
        expect(Tok::RBrace, "'}'");
        return b;
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses formula text; throws ParseError with the position and token at fault.
inline Formula parse(std::string_view text) { return detail::Parser(text).parse_all(); }

/// One parsed line of a hypothesis file.
struct FormulaLine {
    std::size_t line;
    Formula formula;
};

/// Parses a hypothesis file body: one formula per line, '#' starts a
/// comment, blank lines are skipped. Error positions refer to the file.
inline std::vector<FormulaLine> parse_formula_lines(std::string_view text) {
    std::vector<FormulaLine> out;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        ++line_no;
        std::string_view line = text.substr(start, end - start);
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
            try {
                out.push_back({line_no, parse(line)});
            } catch (const ParseError& e) {
                throw ParseError(e.message(), line_no, e.column(), e.token());
            }
        }
        if (end == text.size()) break;
        start = end + 1;
    }
    return out;
}

}  // namespace tlcause
