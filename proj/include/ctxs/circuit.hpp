// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ctxs/expr.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ctxs {

struct Register {
    std::string id;
    std::uint32_t width = 1; // bits, 1..64
};

struct Port {
    std::string id;
    std::uint32_t width = 1;
};

struct Assignment {
    std::uint32_t target = 0; // register index
    ExprPtr value;
};

struct Emission {
    std::uint32_t port = 0; // output port index
    ExprPtr value;
};

struct Transition {
    ExprPtr guard;      // null means ELSE
    std::string target; // state id; may dangle until validated
};

// One FSM state with its datapath actions. All assignments in a state are
// simultaneous: right-hand sides and guards see pre-state register values.
// Non-halt states carry >= 1 transition whose last entry is the mandatory
// ELSE; halt states carry none.
struct StateDef {
    std::string id;
    std::vector<std::uint32_t> reads; // input port indices, consumed in order each visit
    std::vector<Assignment> assignments;
    std::vector<Emission> emissions;
    std::vector<Transition> transitions;
    bool halt = false;
};

// Declaration order of registers and states is load-bearing: context payloads
// pack live registers in register-declaration order and images address states
// by declaration index.
struct Circuit {
    std::string name;
    std::vector<Register> registers;
    std::vector<Port> inputs;
    std::vector<Port> outputs;
    std::vector<StateDef> states;
    std::string initial;
};

struct Diagnostic {
    enum class Severity { Warning, Error };
    Severity severity = Severity::Error;
    std::string message;
};

bool has_errors(const std::vector<Diagnostic>& diags);

// Front door for the JSON circuit format. Enforces local invariants (unique
// ids, widths in range, ELSE discipline, expression references); graph-level
// problems (dangling targets, unreachable states) are validate_circuit's job.
// Throws ParseError.
Circuit parse_circuit(std::string_view text);

// Empty result iff every Circuit invariant holds. Dangling transition targets
// and a missing initial state are errors; unreachable states are warnings.
std::vector<Diagnostic> validate_circuit(const Circuit& c);

// Sorted-key, whitespace-free JSON with canonically rendered expressions.
// parse_circuit(canonical_text(c)) re-canonicalizes to identical bytes.
std::string canonical_text(const Circuit& c);

// FNV-1a 64 over canonical_text(c); binds plans and context images to the
// exact circuit they were made for.
std::uint64_t circuit_hash(const Circuit& c);

// Indexed by state declaration order; BFS over every transition edge from the
// initial state. All false when the initial state is missing.
std::vector<bool> reachable_states(const Circuit& c);

std::optional<std::uint32_t> state_index(const Circuit& c, std::string_view id);
std::optional<std::uint32_t> register_index(const Circuit& c, std::string_view id);

} // namespace ctxs
