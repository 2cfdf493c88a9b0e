// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ctxs/circuit.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ctxs {

// Live-in sets per state, indexed [state][register] in declaration order.
// A register is live at a state if some path from the top of that state reads
// it before (re)writing it.
struct LivenessMap {
    std::vector<std::vector<bool>> live;

    bool is_live(std::uint32_t state, std::uint32_t reg) const { return live[state][reg]; }
};

// Least fixpoint of live(s) = use(s) | U_{t in succ(s)} (live(t) \ def(s)).
// use(s) covers guards, assignment right-hand sides, and emissions; def(s) is
// the assigned registers. Assignments are simultaneous, so a register read
// and written in the same state is in both use(s) and def(s).
LivenessMap live_registers(const Circuit& c);

// Register ids live at `state`, in register-declaration order.
std::vector<std::string> live_register_ids(const Circuit& c, const LivenessMap& m,
                                           std::uint32_t state);

// Worst-case transitions from the top of each state until a checkpoint state
// is occupied, over every outgoing edge (the running circuit cannot choose
// its path). nullopt means unbounded: a checkpoint-free cycle is reachable.
// Checkpoint states and halt states are 0.
struct DrainMap {
    std::vector<std::optional<std::uint32_t>> bound; // by state index

    std::optional<std::uint32_t> at(std::uint32_t state) const { return bound[state]; }
};

DrainMap worst_case_drain(const Circuit& c, const std::set<std::string>& checkpoints);

} // namespace ctxs
