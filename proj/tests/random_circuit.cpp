// SPDX-License-Identifier: Apache-2.0
#include "random_circuit.hpp"

#include <algorithm>

namespace ctxs::testing {

namespace {

using Rng = std::mt19937_64;

std::uint32_t pick(Rng& rng, std::uint32_t lo, std::uint32_t hi) {
    return std::uniform_int_distribution<std::uint32_t>(lo, hi)(rng);
}

bool chance(Rng& rng, double p) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

ExprPtr leaf(Rng& rng, const std::vector<std::string>& regs,
             const std::vector<std::string>& reads, const ExprScope& scope) {
    const std::size_t vars = regs.size() + reads.size();
    if (vars == 0 || chance(rng, 0.3))
        return parse_expr(std::to_string(pick(rng, 0, 15)), scope);
    std::size_t v = pick(rng, 0, static_cast<std::uint32_t>(vars - 1));
    const std::string& name = v < regs.size() ? regs[v] : reads[v - regs.size()];
    return parse_expr(name, scope);
}

ExprPtr random_expr(Rng& rng, const std::vector<std::string>& regs,
                    const std::vector<std::string>& reads, const ExprScope& scope,
                    std::uint32_t depth) {
    if (depth == 0 || chance(rng, 0.35))
        return leaf(rng, regs, reads, scope);
    static const ExprOp ops[] = {ExprOp::Add, ExprOp::Sub, ExprOp::Mul, ExprOp::BitAnd,
                                 ExprOp::BitOr, ExprOp::BitXor, ExprOp::Shl, ExprOp::Shr,
                                 ExprOp::Eq, ExprOp::Ne, ExprOp::Lt, ExprOp::Le,
                                 ExprOp::Gt, ExprOp::Ge};
    auto e = std::make_shared<Expr>();
    e->op = ops[pick(rng, 0, std::size(ops) - 1)];
    e->lhs = random_expr(rng, regs, reads, scope, depth - 1);
    e->rhs = random_expr(rng, regs, reads, scope, depth - 1);
    return e;
}

} // namespace

Circuit random_circuit(Rng& rng, const GenOptions& opts) {
    Circuit c;
    c.name = "rnd";
    const std::uint32_t ns = pick(rng, opts.min_states, opts.max_states);
    const std::uint32_t nr = pick(rng, 0, opts.max_registers);
    const std::uint32_t ni = pick(rng, 0, opts.max_inputs);
    const std::uint32_t no = pick(rng, 1, std::max(1u, opts.max_outputs));

    std::vector<std::string> reg_ids;
    for (std::uint32_t r = 0; r < nr; ++r) {
        std::string id = "r" + std::to_string(r);
        c.registers.push_back({id, pick(rng, 1, opts.max_reg_width)});
        reg_ids.push_back(std::move(id));
    }
    for (std::uint32_t i = 0; i < ni; ++i)
        c.inputs.push_back({"in" + std::to_string(i), pick(rng, 1, 8)});
    for (std::uint32_t o = 0; o < no; ++o)
        c.outputs.push_back({"out" + std::to_string(o), pick(rng, 1, 8)});

    for (std::uint32_t s = 0; s < ns; ++s) {
        StateDef st;
        st.id = "S" + std::to_string(s);
        st.halt = chance(rng, opts.halt_probability);
        if (st.halt) {
            c.states.push_back(std::move(st));
            continue;
        }

        std::vector<std::string> read_names;
        for (std::uint32_t i = 0; i < ni; ++i) {
            if (chance(rng, 0.4)) {
                st.reads.push_back(i);
                read_names.push_back(c.inputs[i].id);
            }
        }
        ExprScope scope{reg_ids, read_names};

        std::vector<std::uint32_t> targets(nr);
        for (std::uint32_t r = 0; r < nr; ++r)
            targets[r] = r;
        std::shuffle(targets.begin(), targets.end(), rng);
        const std::uint32_t na = nr == 0 ? 0 : pick(rng, 0, std::min(nr, 3u));
        for (std::uint32_t a = 0; a < na; ++a)
            st.assignments.push_back(
                {targets[a], random_expr(rng, reg_ids, read_names, scope, 2)});

        const std::uint32_t ne = pick(rng, 0, 2);
        for (std::uint32_t e = 0; e < ne; ++e)
            st.emissions.push_back(
                {pick(rng, 0, no - 1), random_expr(rng, reg_ids, read_names, scope, 2)});

        const std::uint32_t guarded = pick(rng, 0, 2);
        for (std::uint32_t t = 0; t < guarded; ++t)
            st.transitions.push_back({random_expr(rng, reg_ids, read_names, scope, 1),
                                      "S" + std::to_string(pick(rng, 0, ns - 1))});
        st.transitions.push_back({nullptr, "S" + std::to_string(pick(rng, 0, ns - 1))});
        c.states.push_back(std::move(st));
    }
    c.initial = "S0";
    return c;
}

InputStream random_inputs(Rng& rng, std::size_t count, std::uint64_t max_value) {
    InputStream in;
    in.values.reserve(count);
    std::uniform_int_distribution<std::uint64_t> dist(0, max_value);
    for (std::size_t i = 0; i < count; ++i)
        in.values.push_back(dist(rng));
    return in;
}

} // namespace ctxs::testing
