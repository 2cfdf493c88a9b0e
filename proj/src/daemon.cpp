// SPDX-License-Identifier: Apache-2.0
#include "ctxs/daemon.hpp"

#include "ctxs/errors.hpp"

#include <chrono>
#include <iostream>
#include <thread>

namespace ctxs {

namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
    std::string text = read_file(path);
    return {text.begin(), text.end()};
}

// Round-trips canonical bytes through this node's scan-word representation,
// the same path a real board would push a context through its fabric.
std::vector<std::uint8_t> through_scan_chain(std::span<const std::uint8_t> bytes,
                                             const NodeDescriptor& n) {
    auto words = to_native_scan(bytes, n);
    return from_native_scan(words, n, bytes.size());
}

std::vector<Emitted> parse_outputs(std::string_view text) {
    std::vector<Emitted> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        std::string_view line =
            text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() : eol + 1;
        if (line.empty())
            continue;
        std::size_t space = line.find(' ');
        if (space == std::string_view::npos)
            throw StorageError(StorageError::Kind::Io, "malformed segment output line");
        Emitted e;
        e.port = std::string(line.substr(0, space));
        e.value = std::stoull(std::string(line.substr(space + 1)));
        out.push_back(std::move(e));
    }
    return out;
}

void execute_claimed(const fs::path& root, const NodeOptions& opts, const ClaimToken& token) {
    const fs::path dir = job_dir(root, token.job_id);
    JobManifest manifest = parse_manifest(read_file(dir / "manifest.json"));
    Circuit circuit = parse_circuit(read_file(dir / manifest.circuit_ref));
    CheckpointPlan plan = parse_plan(read_file(dir / manifest.plan_ref));
    InputStream inputs = parse_input_vec(read_file(dir / manifest.input_ref));

    const fs::path req = interrupt_request_path(root, token.job_id);
    InterruptPolicy policy = InterruptPolicy::external([req] {
        std::error_code ec;
        return fs::exists(req, ec);
    });

    // Fresh or resume is decided under the lock; the poll answer may be stale
    // by the time the claim lands.
    const std::int64_t seq = max_context_seq(root, token.job_id);
    std::vector<Emitted> prior;
    RunOutcome outcome;
    if (seq < 0) {
        // The embedded test-mode interrupt applies to the first segment only;
        // later segments are interruptible through the request file.
        if (manifest.deterministic_interrupt)
            policy = InterruptPolicy::at_cycle(*manifest.deterministic_interrupt);
        outcome = run(circuit, plan, init_state(circuit), inputs, opts.budget, policy);
    } else {
        for (std::int64_t i = 0; i <= seq; ++i) {
            auto segment = parse_outputs(
                read_file(dir / "contexts" / ("ctx." + std::to_string(i) + ".out")));
            prior.insert(prior.end(), segment.begin(), segment.end());
        }
        auto image = read_bytes(dir / "contexts" / ("ctx." + std::to_string(seq) + ".ctxs"));
        auto ingested = through_scan_chain(image, opts.node);
        outcome = resume(circuit, plan, ingested, inputs, opts.budget, policy);
    }

    switch (outcome.kind) {
    case RunOutcome::Kind::Completed: {
        std::vector<Emitted> full = std::move(prior);
        full.insert(full.end(), outcome.outputs.begin(), outcome.outputs.end());
        publish_result(root, token, full);
        if (opts.verbose)
            std::cerr << "[" << opts.node.arch_id << "] job " << token.job_id << " completed, "
                      << full.size() << " outputs\n";
        break;
    }
    case RunOutcome::Kind::Checkpointed: {
        // Model extraction through this node's scan chain before the context
        // goes to storage in canonical form.
        auto canonical = through_scan_chain(outcome.context, opts.node);
        std::error_code ec;
        fs::remove(req, ec); // consumed by this capture
        publish_context(root, token, canonical, token.epoch, outcome.outputs);
        if (opts.verbose)
            std::cerr << "[" << opts.node.arch_id << "] job " << token.job_id
                      << " checkpointed at seq " << token.epoch << " (drain "
                      << outcome.drain_cycles << ")\n";
        break;
    }
    case RunOutcome::Kind::BudgetExhausted:
        publish_failure(root, token,
                        "budget exhausted after " + std::to_string(outcome.cycles_executed) +
                            " cycles");
        if (opts.verbose)
            std::cerr << "[" << opts.node.arch_id << "] job " << token.job_id
                      << " failed: budget exhausted\n";
        break;
    }
}

} // namespace

NodeCycle node_run_once(const fs::path& root, const NodeOptions& opts) {
    PollAction action = node_poll(root, opts.node);
    if (action.kind == PollAction::Kind::Idle)
        return NodeCycle::Idle;

    ClaimToken token;
    try {
        token = claim(root, action.job_id, opts.node);
    } catch (const StorageError& e) {
        if (e.kind() == StorageError::Kind::AlreadyClaimed ||
            e.kind() == StorageError::Kind::Lifecycle)
            return NodeCycle::Idle; // benign race loss
        throw;
    }
    if (opts.verbose)
        std::cerr << "[" << opts.node.arch_id << "] claimed job " << action.job_id
                  << (action.kind == PollAction::Kind::ClaimFresh
                          ? " (fresh)"
                          : " (resume seq " + std::to_string(action.resume_seq) + ")")
                  << "\n";

    try {
        execute_claimed(root, opts, token);
    } catch (const std::exception& e) {
        try {
            publish_failure(root, token, e.what());
        } catch (const StorageError&) {
            // lost the claim while failing; nothing left to clean up
        }
        if (opts.verbose)
            std::cerr << "[" << opts.node.arch_id << "] job " << action.job_id
                      << " failed: " << e.what() << "\n";
    }
    return NodeCycle::Worked;
}

void node_daemon(const fs::path& root, const NodeOptions& opts,
                 const std::function<bool()>& keep_going) {
    while (keep_going()) {
        if (node_run_once(root, opts) == NodeCycle::Idle)
            std::this_thread::sleep_for(std::chrono::milliseconds(opts.poll_ms));
    }
}

} // namespace ctxs
