// SPDX-License-Identifier: Apache-2.0
#include "ctxs/expr.hpp"

#include "ctxs/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace ctxs {

namespace {

enum class Tok : std::uint8_t {
    Number,
    Ident,
    LParen,
    RParen,
    Plus,
    Minus,
    Star,
    Amp,
    Pipe,
    Caret,
    Shl,
    Shr,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    End,
};

struct Token {
    Tok kind;
    std::size_t pos;
    std::uint64_t number = 0;
    std::string text;

    Token(Tok k, std::size_t p) : kind(k), pos(p) {}
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_])))
            ++pos_;
        std::size_t start = pos_;
        if (pos_ >= src_.size())
            return {Tok::End, start};
        char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)))
            return number(start);
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_')
            return ident(start);
        ++pos_;
        switch (c) {
        case '(': return {Tok::LParen, start};
        case ')': return {Tok::RParen, start};
        case '+': return {Tok::Plus, start};
        case '-': return {Tok::Minus, start};
        case '*': return {Tok::Star, start};
        case '&': return {Tok::Amp, start};
        case '|': return {Tok::Pipe, start};
        case '^': return {Tok::Caret, start};
        case '<':
            if (eat('<')) return {Tok::Shl, start};
            if (eat('=')) return {Tok::Le, start};
            return {Tok::Lt, start};
        case '>':
            if (eat('>')) return {Tok::Shr, start};
            if (eat('=')) return {Tok::Ge, start};
            return {Tok::Gt, start};
        case '=':
            if (eat('=')) return {Tok::EqEq, start};
            throw ParseError("expected '==' in expression", start);
        case '!':
            if (eat('=')) return {Tok::NotEq, start};
            throw ParseError("expected '!=' in expression", start);
        default:
            throw ParseError(std::string("unexpected character '") + c + "' in expression", start);
        }
    }

private:
    bool eat(char c) {
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    Token number(std::size_t start) {
        int base = 10;
        std::size_t begin = pos_;
        if (src_[pos_] == '0' && pos_ + 1 < src_.size() &&
            (src_[pos_ + 1] == 'x' || src_[pos_ + 1] == 'X')) {
            base = 16;
            pos_ += 2;
            begin = pos_;
        }
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        std::string_view digits = src_.substr(begin, pos_ - begin);
        std::uint64_t value = 0;
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value, base);
        if (ec != std::errc{} || ptr != digits.data() + digits.size())
            throw ParseError("bad numeric literal", start);
        Token t{Tok::Number, start};
        t.number = value;
        return t;
    }

    Token ident(std::size_t start) {
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        Token t{Tok::Ident, start};
        t.text = std::string(src_.substr(start, pos_ - start));
        return t;
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

// Precedence, loosest first: | ^ & (== !=) (< <= > >=) (<< >>) (+ -) (*).
// All binary operators are left-associative.
class Parser {
public:
    Parser(std::string_view src, const ExprScope& scope) : lex_(src), scope_(scope) {
        advance();
    }

    ExprPtr parse() {
        ExprPtr e = bit_or();
        if (cur_.kind != Tok::End)
            throw ParseError("trailing input after expression", cur_.pos);
        return e;
    }

private:
    void advance() { cur_ = lex_.next(); }

    bool accept(Tok k) {
        if (cur_.kind == k) {
            advance();
            return true;
        }
        return false;
    }

    static ExprPtr binary(ExprOp op, ExprPtr l, ExprPtr r) {
        auto e = std::make_shared<Expr>();
        e->op = op;
        e->lhs = std::move(l);
        e->rhs = std::move(r);
        return e;
    }

    ExprPtr bit_or() {
        ExprPtr e = bit_xor();
        while (accept(Tok::Pipe))
            e = binary(ExprOp::BitOr, e, bit_xor());
        return e;
    }

    ExprPtr bit_xor() {
        ExprPtr e = bit_and();
        while (accept(Tok::Caret))
            e = binary(ExprOp::BitXor, e, bit_and());
        return e;
    }

    ExprPtr bit_and() {
        ExprPtr e = equality();
        while (accept(Tok::Amp))
            e = binary(ExprOp::BitAnd, e, equality());
        return e;
    }

    ExprPtr equality() {
        ExprPtr e = relational();
        for (;;) {
            if (accept(Tok::EqEq))
                e = binary(ExprOp::Eq, e, relational());
            else if (accept(Tok::NotEq))
                e = binary(ExprOp::Ne, e, relational());
            else
                return e;
        }
    }

    ExprPtr relational() {
        ExprPtr e = shift();
        for (;;) {
            if (accept(Tok::Lt))
                e = binary(ExprOp::Lt, e, shift());
            else if (accept(Tok::Le))
                e = binary(ExprOp::Le, e, shift());
            else if (accept(Tok::Gt))
                e = binary(ExprOp::Gt, e, shift());
            else if (accept(Tok::Ge))
                e = binary(ExprOp::Ge, e, shift());
            else
                return e;
        }
    }

    ExprPtr shift() {
        ExprPtr e = additive();
        for (;;) {
            if (accept(Tok::Shl))
                e = binary(ExprOp::Shl, e, additive());
            else if (accept(Tok::Shr))
                e = binary(ExprOp::Shr, e, additive());
            else
                return e;
        }
    }

    ExprPtr additive() {
        ExprPtr e = term();
        for (;;) {
            if (accept(Tok::Plus))
                e = binary(ExprOp::Add, e, term());
            else if (accept(Tok::Minus))
                e = binary(ExprOp::Sub, e, term());
            else
                return e;
        }
    }

    ExprPtr term() {
        ExprPtr e = primary();
        while (accept(Tok::Star))
            e = binary(ExprOp::Mul, e, primary());
        return e;
    }

    ExprPtr primary() {
        if (cur_.kind == Tok::Number) {
            auto e = std::make_shared<Expr>();
            e->op = ExprOp::Const;
            e->value = cur_.number;
            advance();
            return e;
        }
        if (cur_.kind == Tok::Ident) {
            if (cur_.text == "ELSE")
                throw ParseError("ELSE is reserved and not a value", cur_.pos);
            auto e = std::make_shared<Expr>();
            e->op = ExprOp::Var;
            e->name = cur_.text;
            if (!resolve(*e))
                throw ParseError("unknown reference '" + cur_.text +
                                     "' (not a register or an input read by this state)",
                                 cur_.pos);
            advance();
            return e;
        }
        if (accept(Tok::LParen)) {
            ExprPtr e = bit_or();
            if (!accept(Tok::RParen))
                throw ParseError("expected ')'", cur_.pos);
            return e;
        }
        throw ParseError("expected value, identifier, or '('", cur_.pos);
    }

    bool resolve(Expr& e) const {
        // Input reads shadow nothing: identifiers are unique circuit-wide, so
        // the first match wins either way.
        auto rit = std::find(scope_.registers.begin(), scope_.registers.end(), e.name);
        if (rit != scope_.registers.end()) {
            e.var_kind = VarKind::Register;
            e.var_index = static_cast<std::uint32_t>(rit - scope_.registers.begin());
            return true;
        }
        auto iit = std::find(scope_.input_reads.begin(), scope_.input_reads.end(), e.name);
        if (iit != scope_.input_reads.end()) {
            e.var_kind = VarKind::InputRead;
            e.var_index = static_cast<std::uint32_t>(iit - scope_.input_reads.begin());
            return true;
        }
        return false;
    }

    Lexer lex_;
    ExprScope scope_;
    Token cur_{Tok::End, 0};
};

const char* op_text(ExprOp op) {
    switch (op) {
    case ExprOp::Add: return "+";
    case ExprOp::Sub: return "-";
    case ExprOp::Mul: return "*";
    case ExprOp::BitAnd: return "&";
    case ExprOp::BitOr: return "|";
    case ExprOp::BitXor: return "^";
    case ExprOp::Shl: return "<<";
    case ExprOp::Shr: return ">>";
    case ExprOp::Eq: return "==";
    case ExprOp::Ne: return "!=";
    case ExprOp::Lt: return "<";
    case ExprOp::Le: return "<=";
    case ExprOp::Gt: return ">";
    case ExprOp::Ge: return ">=";
    case ExprOp::Const:
    case ExprOp::Var: break;
    }
    return "?";
}

} // namespace

ExprPtr parse_expr(std::string_view text, const ExprScope& scope) {
    Parser p(text, scope);
    return p.parse();
}

std::string render_expr(const Expr& e) {
    switch (e.op) {
    case ExprOp::Const: return std::to_string(e.value);
    case ExprOp::Var: return e.name;
    default:
        return "(" + render_expr(*e.lhs) + op_text(e.op) + render_expr(*e.rhs) + ")";
    }
}

std::uint64_t eval_expr(const Expr& e, std::span<const std::uint64_t> regs,
                        std::span<const std::uint64_t> input_reads) {
    switch (e.op) {
    case ExprOp::Const:
        return e.value;
    case ExprOp::Var:
        return e.var_kind == VarKind::Register ? regs[e.var_index] : input_reads[e.var_index];
    default:
        break;
    }
    std::uint64_t a = eval_expr(*e.lhs, regs, input_reads);
    std::uint64_t b = eval_expr(*e.rhs, regs, input_reads);
    switch (e.op) {
    case ExprOp::Add: return a + b;
    case ExprOp::Sub: return a - b;
    case ExprOp::Mul: return a * b;
    case ExprOp::BitAnd: return a & b;
    case ExprOp::BitOr: return a | b;
    case ExprOp::BitXor: return a ^ b;
    case ExprOp::Shl: return b >= 64 ? 0 : a << b;
    case ExprOp::Shr: return b >= 64 ? 0 : a >> b;
    case ExprOp::Eq: return a == b ? 1 : 0;
    case ExprOp::Ne: return a != b ? 1 : 0;
    case ExprOp::Lt: return a < b ? 1 : 0;
    case ExprOp::Le: return a <= b ? 1 : 0;
    case ExprOp::Gt: return a > b ? 1 : 0;
    case ExprOp::Ge: return a >= b ? 1 : 0;
    case ExprOp::Const:
    case ExprOp::Var: break;
    }
    return 0; // unreachable
}

void collect_register_reads(const Expr& e, std::vector<std::uint32_t>& out) {
    if (e.op == ExprOp::Var) {
        if (e.var_kind == VarKind::Register)
            out.push_back(e.var_index);
        return;
    }
    if (e.lhs)
        collect_register_reads(*e.lhs, out);
    if (e.rhs)
        collect_register_reads(*e.rhs, out);
}

} // namespace ctxs
