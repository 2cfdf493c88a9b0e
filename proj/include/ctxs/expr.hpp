// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ctxs {

// Datapath expressions. Evaluation is unsigned 64-bit with wraparound;
// comparisons yield 1/0; shift amounts >= 64 yield 0. Truncation to the
// target width happens at assignment/emission, not inside the expression.
struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class ExprOp : std::uint8_t {
    Const,
    Var,
    Add,
    Sub,
    Mul,
    BitAnd,
    BitOr,
    BitXor,
    Shl,
    Shr,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
};

// A Var refers either to a register (declared on the circuit) or to the
// value read this cycle from an input port listed in the enclosing state's
// reads. Both are resolved to dense indices at parse time.
enum class VarKind : std::uint8_t { Register, InputRead };

struct Expr {
    ExprOp op = ExprOp::Const;
    std::uint64_t value = 0;     // Const
    std::string name;            // Var
    VarKind var_kind = VarKind::Register;
    std::uint32_t var_index = 0; // register index / position in the state's reads
    ExprPtr lhs, rhs;
};

// Name resolution context for parsing: register ids with their indices, and
// the enclosing state's input reads in declaration order.
struct ExprScope {
    std::span<const std::string> registers;
    std::span<const std::string> input_reads;
};

// Throws ParseError with the column offset into `text` on bad syntax or an
// identifier not covered by the scope.
ExprPtr parse_expr(std::string_view text, const ExprScope& scope);

// Fully parenthesized, whitespace-free form. parse_expr(render_expr(e)) of a
// rendered expression renders back to the identical string.
std::string render_expr(const Expr& e);

std::uint64_t eval_expr(const Expr& e, std::span<const std::uint64_t> regs,
                        std::span<const std::uint64_t> input_reads);

// Appends the register indices read by `e` to `out` (deduplicated by caller).
void collect_register_reads(const Expr& e, std::vector<std::uint32_t>& out);

// Masks v to `width` bits (width in 1..64).
inline std::uint64_t mask_to_width(std::uint64_t v, std::uint32_t width) {
    return width >= 64 ? v : v & ((std::uint64_t{1} << width) - 1);
}

} // namespace ctxs
