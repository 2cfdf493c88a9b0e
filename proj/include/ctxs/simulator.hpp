// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ctxs/circuit.hpp"
#include "ctxs/codec.hpp"
#include "ctxs/planner.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ctxs {

// A test-vector stream. Reads are masked to the consuming port's width;
// the cursor is what context images persist so resumed segments continue
// from the exact stream position.
struct InputStream {
    std::vector<std::uint64_t> values;
    std::size_t cursor = 0;
};

InputStream parse_input_vec(std::string_view text);
std::string format_input_vec(const InputStream& in);

struct Emitted {
    std::string port;
    std::uint64_t value = 0;

    bool operator==(const Emitted&) const = default;
};

// result.out line format: "<port> <value>" per emission, in emission order.
std::string format_outputs(std::span<const Emitted> outputs);

// When an interrupt fires. AtCycle asserts at the top of cycle n of the
// current run segment (0-indexed, before that state's body executes);
// ExternalFlag is a pure query sampled once per cycle at the top. Once
// asserted, the interrupt stays pending until a checkpoint is occupied.
struct InterruptPolicy {
    enum class Kind { None, AtCycle, ExternalFlag };
    Kind kind = Kind::None;
    std::uint64_t cycle = 0;
    std::function<bool()> poll;

    static InterruptPolicy none() { return {}; }
    static InterruptPolicy at_cycle(std::uint64_t n) { return {Kind::AtCycle, n, nullptr}; }
    static InterruptPolicy external(std::function<bool()> p) {
        return {Kind::ExternalFlag, 0, std::move(p)};
    }
};

struct RunOutcome {
    enum class Kind { Completed, Checkpointed, BudgetExhausted };
    Kind kind = Kind::Completed;
    std::vector<Emitted> outputs;        // this segment only
    std::uint64_t cycles_executed = 0;   // transitions executed this segment
    std::vector<std::uint8_t> context;   // encoded image, iff Checkpointed
    std::uint64_t drain_cycles = 0;      // transitions from assertion to capture
};

inline constexpr std::uint64_t kDefaultBudget = 1'000'000;

// Initial state: all registers 0, streams at position 0.
MachineState init_state(const Circuit& c);

struct StepResult {
    MachineState next;
    std::vector<Emitted> outputs;
};

// One clock cycle: consume this state's input reads in declaration order,
// evaluate guards/assignments/emissions against pre-state register values,
// apply assignments simultaneously, take the first true guard (ELSE last).
// Throws SimError on a halt state or input underrun.
StepResult step(const Circuit& c, const MachineState& m, InputStream& in);

// Executes until halt (Completed), until a pending interrupt finds the
// machine at a checkpoint at the top of a cycle (Checkpointed, context
// captured before that state's body runs), or until `budget` transitions
// were executed. Requires verify_plan(c, p) to pass.
RunOutcome run(const Circuit& c, const CheckpointPlan& p, const MachineState& start,
               InputStream& in, std::uint64_t budget, const InterruptPolicy& policy);

// Decodes the image, repositions `in` at the saved cursor, and continues.
// `in` must be the same full stream the interrupted run consumed.
RunOutcome resume(const Circuit& c, const CheckpointPlan& p, std::span<const std::uint8_t> image,
                  InputStream& in, std::uint64_t budget, const InterruptPolicy& policy);

} // namespace ctxs
