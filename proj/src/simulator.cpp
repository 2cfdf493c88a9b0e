// SPDX-License-Identifier: Apache-2.0
#include "ctxs/simulator.hpp"

#include "ctxs/errors.hpp"

#include <charconv>
#include <set>

namespace ctxs {

InputStream parse_input_vec(std::string_view text) {
    InputStream in;
    std::size_t pos = 0;
    std::size_t line_no = 1;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        std::string_view line =
            text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() : eol + 1;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
            line.remove_suffix(1);
        while (!line.empty() && line.front() == ' ')
            line.remove_prefix(1);
        if (!line.empty()) {
            std::uint64_t v = 0;
            auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v, 10);
            if (ec != std::errc{} || ptr != line.data() + line.size())
                throw ParseError("bad input vector value on line " + std::to_string(line_no));
            in.values.push_back(v);
        }
        ++line_no;
    }
    return in;
}

std::string format_input_vec(const InputStream& in) {
    std::string out;
    for (std::uint64_t v : in.values) {
        out += std::to_string(v);
        out += '\n';
    }
    return out;
}

std::string format_outputs(std::span<const Emitted> outputs) {
    std::string out;
    for (const Emitted& e : outputs) {
        out += e.port;
        out += ' ';
        out += std::to_string(e.value);
        out += '\n';
    }
    return out;
}

MachineState init_state(const Circuit& c) {
    MachineState m;
    m.state = c.initial;
    m.regs.assign(c.registers.size(), 0);
    return m;
}

StepResult step(const Circuit& c, const MachineState& m, InputStream& in) {
    auto sidx = state_index(c, m.state);
    if (!sidx)
        throw SimError(SimError::Kind::InvalidPlan,
                       "machine is in unknown state \"" + m.state + "\"");
    const StateDef& st = c.states[*sidx];
    if (st.halt)
        throw SimError(SimError::Kind::SteppedHaltState,
                       "cannot step halt state \"" + st.id + "\"");

    StepResult res{m, {}};

    std::vector<std::uint64_t> reads;
    reads.reserve(st.reads.size());
    for (std::uint32_t port : st.reads) {
        if (in.cursor >= in.values.size())
            throw SimError(SimError::Kind::InputUnderrun,
                           "input underrun at state \"" + st.id + "\" (cursor " +
                               std::to_string(in.cursor) + ")");
        reads.push_back(mask_to_width(in.values[in.cursor++], c.inputs[port].width));
    }
    res.next.input_cursor = m.input_cursor + static_cast<std::uint32_t>(st.reads.size());

    // Everything below sees pre-state register values plus this cycle's
    // reads; assignments land together at the state boundary.
    std::vector<std::uint64_t> next_regs = m.regs;
    for (const Assignment& a : st.assignments)
        next_regs[a.target] =
            mask_to_width(eval_expr(*a.value, m.regs, reads), c.registers[a.target].width);

    for (const Emission& e : st.emissions) {
        std::uint64_t v = mask_to_width(eval_expr(*e.value, m.regs, reads), c.outputs[e.port].width);
        res.outputs.push_back({c.outputs[e.port].id, v});
    }
    res.next.output_count = m.output_count + static_cast<std::uint32_t>(st.emissions.size());

    const std::string* target = nullptr;
    for (const Transition& t : st.transitions) {
        if (!t.guard || eval_expr(*t.guard, m.regs, reads) != 0) {
            target = &t.target;
            break;
        }
    }
    res.next.state = *target; // ELSE discipline guarantees a match
    res.next.regs = std::move(next_regs);
    return res;
}

RunOutcome run(const Circuit& c, const CheckpointPlan& p, const MachineState& start,
               InputStream& in, std::uint64_t budget, const InterruptPolicy& policy) {
    if (auto diags = verify_plan(c, p); has_errors(diags))
        throw SimError(SimError::Kind::InvalidPlan, "plan does not verify: " + diags[0].message);

    const std::set<std::string> checkpoints = p.checkpoint_set();
    MachineState m = start;
    RunOutcome out;
    bool pending = false;
    std::uint64_t asserted_at = 0;

    for (;;) {
        auto sidx = state_index(c, m.state);
        if (!sidx)
            throw SimError(SimError::Kind::InvalidPlan,
                           "machine is in unknown state \"" + m.state + "\"");
        if (c.states[*sidx].halt) {
            out.kind = RunOutcome::Kind::Completed;
            return out;
        }
        if (!pending) {
            bool assert_now = false;
            switch (policy.kind) {
            case InterruptPolicy::Kind::None: break;
            case InterruptPolicy::Kind::AtCycle:
                assert_now = out.cycles_executed >= policy.cycle;
                break;
            case InterruptPolicy::Kind::ExternalFlag:
                assert_now = policy.poll && policy.poll();
                break;
            }
            if (assert_now) {
                pending = true;
                asserted_at = out.cycles_executed;
            }
        }
        if (pending && checkpoints.count(m.state)) {
            out.kind = RunOutcome::Kind::Checkpointed;
            out.drain_cycles = out.cycles_executed - asserted_at;
            out.context = encode_context(c, p, m);
            return out;
        }
        if (out.cycles_executed >= budget) {
            out.kind = RunOutcome::Kind::BudgetExhausted;
            return out;
        }
        StepResult sr = step(c, m, in);
        m = std::move(sr.next);
        out.outputs.insert(out.outputs.end(), sr.outputs.begin(), sr.outputs.end());
        ++out.cycles_executed;
    }
}

RunOutcome resume(const Circuit& c, const CheckpointPlan& p, std::span<const std::uint8_t> image,
                  InputStream& in, std::uint64_t budget, const InterruptPolicy& policy) {
    MachineState m = decode_context(image, c, p);
    if (m.input_cursor > in.values.size())
        throw SimError(SimError::Kind::InputUnderrun,
                       "input stream shorter than the saved cursor (" +
                           std::to_string(m.input_cursor) + ")");
    in.cursor = m.input_cursor;
    return run(c, p, m, in, budget, policy);
}

} // namespace ctxs
