// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ctxs/analysis.hpp"
#include "ctxs/circuit.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ctxs {

// Context footprint of a checkpoint set. union_bits is the total width of
// every register live at any checkpoint (the save/restore surface the
// hardware must expose); max_context_bits is the largest single image.
struct OverheadReport {
    std::uint64_t union_bits = 0;
    std::uint32_t state_bits = 1; // ceil(log2(|states|)), min 1
    std::uint64_t max_context_bits = 0;
    std::uint32_t checkpoint_count = 0;
};

struct CheckpointPlan {
    std::uint64_t circuit_digest = 0;
    std::int64_t latency_bound = 0;
    std::vector<std::string> checkpoints;                    // state-declaration order
    std::map<std::string, std::vector<std::string>> live;    // checkpoint -> live regs,
                                                             // register-declaration order
    OverheadReport overhead;
    std::uint64_t plan_digest = 0; // FNV-1a of canonical text minus this field

    std::set<std::string> checkpoint_set() const {
        return {checkpoints.begin(), checkpoints.end()};
    }
};

enum class PlanMode { Exact, Greedy };

// Node-count limit for the exact search; 0 means unlimited. Exceeding it
// throws PlanError{BudgetExceeded} rather than returning a possibly
// non-minimal plan.
struct SearchBudget {
    std::uint64_t max_nodes = 0;
};

OverheadReport plan_overhead(const Circuit& c, const std::set<std::string>& checkpoints);

// Assembles a well-formed plan around a given checkpoint set: live lists,
// overhead, and both digests. Does not check the latency bound.
CheckpointPlan build_plan(const Circuit& c, std::int64_t latency_bound,
                          const std::set<std::string>& checkpoints);

// Selects checkpoints so every reachable non-halt state drains to one within
// `latency_bound` transitions. Exact mode minimizes (union_bits,
// checkpoint_count, lexicographic state ids); greedy mode is feasible but may
// be suboptimal. Candidates are the reachable non-halt states, so a feasible
// set always exists for any latency_bound >= 0.
CheckpointPlan plan_checkpoints(const Circuit& c, std::int64_t latency_bound, PlanMode mode,
                                SearchBudget budget = {});

// Exhaustive subset enumeration under the same objective and tie-breaking as
// exact mode. Refuses circuits with more than 20 candidate states.
CheckpointPlan brute_force_plan(const Circuit& c, std::int64_t latency_bound);

// Empty iff the plan binds to this exact circuit, the latency bound holds for
// every reachable non-halt state, the live lists match the liveness analysis,
// and the recorded overhead and digest are self-consistent.
std::vector<Diagnostic> verify_plan(const Circuit& c, const CheckpointPlan& p);

// Sorted-key whitespace-free JSON, plan_digest field included. The digest
// itself is FNV-1a over the same text with plan_digest omitted.
std::string plan_to_text(const CheckpointPlan& p);
CheckpointPlan parse_plan(std::string_view text);

// The digest input: canonical text without the plan_digest field.
std::string plan_canonical_prefix_text(const CheckpointPlan& p);

} // namespace ctxs
