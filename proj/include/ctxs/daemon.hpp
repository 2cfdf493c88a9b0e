// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ctxs/codec.hpp"
#include "ctxs/simulator.hpp"
#include "ctxs/storage.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>

namespace ctxs {

struct NodeOptions {
    NodeDescriptor node;
    std::uint64_t budget = kDefaultBudget;
    std::uint32_t poll_ms = 50;
    bool verbose = false;
};

enum class NodeCycle { Idle, Worked };

// One poll-claim-execute-publish round. Fresh jobs start from the initial
// state; checkpointed jobs resume from the highest published context, pulled
// through this node's scan-word format on the way in to model heterogeneous
// restore. Losing a claim race counts as Idle.
NodeCycle node_run_once(const std::filesystem::path& root, const NodeOptions& opts);

// Polls until keep_going() turns false, sleeping poll_ms between idle rounds.
void node_daemon(const std::filesystem::path& root, const NodeOptions& opts,
                 const std::function<bool()>& keep_going);

} // namespace ctxs
