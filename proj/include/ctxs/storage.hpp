// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ctxs/circuit.hpp"
#include "ctxs/codec.hpp"
#include "ctxs/planner.hpp"
#include "ctxs/simulator.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ctxs {

// Shared-storage layout, one directory per job under <root>/jobs/:
//   manifest.json  circuit.json  plan.json  input.vec        (submission)
//   running.lock                                             (claim)
//   control/interrupt.req                                    (interrupt request)
//   contexts/ctx.<seq>.ctxs  contexts/ctx.<seq>.out          (checkpoints)
//   result.out | failed.txt                                  (terminal)
// Every non-lock file appears via <name>.tmp + same-directory rename, so a
// reader never observes a partial write. The lock is an exclusive creation.
struct JobManifest {
    std::string job_id;
    std::string circuit_ref = "circuit.json";
    std::string plan_ref = "plan.json";
    std::string input_ref = "input.vec";
    std::int64_t latency_bound = 0;
    std::vector<std::string> accepted_archs; // empty = ANY
    std::optional<std::uint64_t> deterministic_interrupt;
};

std::string manifest_to_text(const JobManifest& m);
JobManifest parse_manifest(std::string_view text);

// Derived purely from which files exist; daemons keep no private job state.
struct JobView {
    enum class Status { Submitted, Running, Checkpointed, Done, Failed };
    Status status = Status::Submitted;
    std::string node_arch;      // Running only
    std::string failure;        // Failed only
    std::int64_t context_seq = -1; // highest published context, -1 if none
    bool result_present = false;
};

std::string render_status(const JobView& v);

struct PollAction {
    enum class Kind { Idle, ClaimFresh, ClaimResume };
    Kind kind = Kind::Idle;
    std::string job_id;
    std::int64_t resume_seq = -1;
};

// Exclusive claim on a job. epoch counts previously published contexts and
// doubles as the next context sequence number.
struct ClaimToken {
    std::string job_id;
    std::string arch_id;
    std::uint64_t epoch = 0;
};

// Writes circuit/plan/inputs first and the manifest last; the manifest's
// appearance is what makes the job visible to daemons. The plan must verify
// against the circuit. Returns the job id.
std::string submit_job(const std::filesystem::path& root, const JobManifest& manifest,
                       const Circuit& circuit, const CheckpointPlan& plan,
                       const InputStream& inputs);

// First claimable job in lexicographic job_id order: manifest present, arch
// accepted, not finished, not locked. Jobs with published contexts resume at
// the highest sequence; unreadable jobs are skipped and logged to stderr.
PollAction node_poll(const std::filesystem::path& root, const NodeDescriptor& n);

// Exactly one concurrent claimant succeeds; losers get
// StorageError{AlreadyClaimed}. Claiming a finished job is a lifecycle error.
ClaimToken claim(const std::filesystem::path& root, const std::string& job_id,
                 const NodeDescriptor& n);

// Verifies the caller still holds the lock, then removes it.
void release_claim(const std::filesystem::path& root, const ClaimToken& token);

// Publish this segment's context image and emissions as contexts/ctx.<seq>.*,
// then release the lock. seq must be exactly one past the highest published
// sequence (the token's epoch). The context becomes visible before the job is
// re-claimable.
void publish_context(const std::filesystem::path& root, const ClaimToken& token,
                     std::span<const std::uint8_t> image, std::uint64_t seq,
                     std::span<const Emitted> segment_outputs);

// Publish result.out (the job's complete output) and release the lock.
void publish_result(const std::filesystem::path& root, const ClaimToken& token,
                    std::span<const Emitted> outputs);

// Terminal failure marker (failed.txt with the reason) releasing the lock.
void publish_failure(const std::filesystem::path& root, const ClaimToken& token,
                     const std::string& reason);

// Drops control/interrupt.req into the job. Idempotent; the running daemon
// samples it between cycles and deletes it after capturing a context.
void request_interrupt(const std::filesystem::path& root, const std::string& job_id);

JobView job_status(const std::filesystem::path& root, const std::string& job_id);

// Paths and low-level helpers shared with the daemon and tests.
std::filesystem::path job_dir(const std::filesystem::path& root, const std::string& job_id);
std::filesystem::path interrupt_request_path(const std::filesystem::path& root,
                                             const std::string& job_id);
std::int64_t max_context_seq(const std::filesystem::path& root, const std::string& job_id);
std::string read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

} // namespace ctxs
