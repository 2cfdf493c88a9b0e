// SPDX-License-Identifier: Apache-2.0
#include "ctxs/storage.hpp"

#include "ctxs/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iostream>

#include <fcntl.h>
#include <unistd.h>

namespace ctxs {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string lock_contents(const std::string& arch, std::uint64_t epoch) {
    json j;
    j["arch"] = arch;
    j["epoch"] = epoch;
    return j.dump();
}

fs::path lock_path(const fs::path& root, const std::string& job_id) {
    return job_dir(root, job_id) / "running.lock";
}

// Exclusive lock creation that is safe on NFS-like storage: write the
// contents to a private temp file, then link(2) it to the lock name. link
// never overwrites, so exactly one concurrent claimant wins, and the lock is
// never observable with partial contents. The temp name must be unique per
// attempt, not just per process: concurrent claims from one process would
// otherwise clobber each other's contents before the link.
bool try_create_lock(const fs::path& lock, const std::string& contents) {
    static std::atomic<std::uint64_t> attempt{0};
    fs::path tmp = lock;
    tmp += ".claim." + std::to_string(::getpid()) + "." +
           std::to_string(attempt.fetch_add(1, std::memory_order_relaxed));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out || !(out << contents)) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw StorageError(StorageError::Kind::Io,
                               "cannot write claim file " + tmp.string());
        }
    }
    int rc = ::link(tmp.c_str(), lock.c_str());
    int saved = errno;
    std::error_code ec;
    fs::remove(tmp, ec);
    if (rc == 0)
        return true;
    if (saved == EEXIST)
        return false;
    throw StorageError(StorageError::Kind::Io,
                       "cannot create lock " + lock.string() + ": " + std::strerror(saved));
}

void require_holder(const fs::path& root, const ClaimToken& token) {
    fs::path lock = lock_path(root, token.job_id);
    std::string contents;
    try {
        contents = read_file(lock);
    } catch (const StorageError&) {
        throw StorageError(StorageError::Kind::NotClaimHolder,
                           "claim on job \"" + token.job_id + "\" was released");
    }
    if (contents != lock_contents(token.arch_id, token.epoch))
        throw StorageError(StorageError::Kind::NotClaimHolder,
                           "job \"" + token.job_id + "\" is claimed by another node");
}

bool arch_accepted(const JobManifest& m, const std::string& arch) {
    return m.accepted_archs.empty() ||
           std::find(m.accepted_archs.begin(), m.accepted_archs.end(), arch) !=
               m.accepted_archs.end();
}

bool finished(const fs::path& dir) {
    return fs::exists(dir / "result.out") || fs::exists(dir / "failed.txt");
}

} // namespace

std::string manifest_to_text(const JobManifest& m) {
    json j;
    j["job_id"] = m.job_id;
    j["circuit"] = m.circuit_ref;
    j["plan"] = m.plan_ref;
    j["input"] = m.input_ref;
    j["latency_bound"] = m.latency_bound;
    if (m.accepted_archs.empty())
        j["accepted_archs"] = "ANY";
    else
        j["accepted_archs"] = m.accepted_archs;
    if (m.deterministic_interrupt)
        j["deterministic_interrupt"] = *m.deterministic_interrupt;
    return j.dump();
}

JobManifest parse_manifest(std::string_view text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("manifest syntax error: ") + e.what());
    }
    JobManifest m;
    try {
        m.job_id = root.at("job_id").get<std::string>();
        m.circuit_ref = root.at("circuit").get<std::string>();
        m.plan_ref = root.at("plan").get<std::string>();
        m.input_ref = root.at("input").get<std::string>();
        m.latency_bound = root.at("latency_bound").get<std::int64_t>();
        const json& archs = root.at("accepted_archs");
        if (archs.is_string()) {
            if (archs.get<std::string>() != "ANY")
                throw ParseError("accepted_archs must be \"ANY\" or a list");
        } else {
            m.accepted_archs = archs.get<std::vector<std::string>>();
        }
        if (auto it = root.find("deterministic_interrupt"); it != root.end())
            m.deterministic_interrupt = it->get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed manifest: ") + e.what());
    }
    // Refs must stay inside the job directory.
    for (const std::string* ref : {&m.circuit_ref, &m.plan_ref, &m.input_ref})
        if (ref->empty() || ref->find('/') != std::string::npos || *ref == "." || *ref == "..")
            throw ParseError("manifest file ref \"" + *ref + "\" escapes the job directory");
    return m;
}

std::string render_status(const JobView& v) {
    switch (v.status) {
    case JobView::Status::Submitted: return "SUBMITTED";
    case JobView::Status::Running: return "RUNNING arch=" + v.node_arch;
    case JobView::Status::Checkpointed: return "CHECKPOINTED seq=" + std::to_string(v.context_seq);
    case JobView::Status::Done: return "DONE";
    case JobView::Status::Failed: return "FAILED " + v.failure;
    }
    return "?";
}

fs::path job_dir(const fs::path& root, const std::string& job_id) {
    return root / "jobs" / job_id;
}

fs::path interrupt_request_path(const fs::path& root, const std::string& job_id) {
    return job_dir(root, job_id) / "control" / "interrupt.req";
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw StorageError(StorageError::Kind::Io, "cannot read " + path.string());
    std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad())
        throw StorageError(StorageError::Kind::Io, "error reading " + path.string());
    return contents;
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out || !out.write(contents.data(), static_cast<std::streamsize>(contents.size()))) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw StorageError(StorageError::Kind::Io, "cannot write " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw StorageError(StorageError::Kind::Io, "cannot publish " + path.string());
    }
}

std::int64_t max_context_seq(const fs::path& root, const std::string& job_id) {
    fs::path dir = job_dir(root, job_id) / "contexts";
    std::int64_t max_seq = -1;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        std::string name = entry.path().filename().string();
        if (name.rfind("ctx.", 0) != 0 || name.size() < 10 ||
            name.compare(name.size() - 5, 5, ".ctxs") != 0)
            continue;
        std::string_view digits(name.data() + 4, name.size() - 9);
        std::int64_t seq = -1;
        auto [ptr, pec] = std::from_chars(digits.data(), digits.data() + digits.size(), seq, 10);
        if (pec == std::errc{} && ptr == digits.data() + digits.size())
            max_seq = std::max(max_seq, seq);
    }
    return max_seq;
}

std::string submit_job(const fs::path& root, const JobManifest& manifest, const Circuit& circuit,
                       const CheckpointPlan& plan, const InputStream& inputs) {
    if (manifest.job_id.empty() || manifest.job_id.find('/') != std::string::npos)
        throw StorageError(StorageError::Kind::Io,
                           "job id \"" + manifest.job_id + "\" is not a valid directory name");
    if (auto diags = verify_plan(circuit, plan); has_errors(diags))
        throw StorageError(StorageError::Kind::InvalidPlan,
                           "plan does not verify against the circuit: " + diags[0].message);

    std::error_code ec;
    fs::create_directories(root / "jobs", ec);
    if (ec)
        throw StorageError(StorageError::Kind::Io, "cannot create " + (root / "jobs").string());
    fs::path dir = job_dir(root, manifest.job_id);
    if (!fs::create_directory(dir, ec) || ec)
        throw StorageError(StorageError::Kind::JobCollision,
                           "job \"" + manifest.job_id + "\" already exists");
    fs::create_directory(dir / "control");
    fs::create_directory(dir / "contexts");

    write_file_atomic(dir / manifest.circuit_ref, canonical_text(circuit));
    write_file_atomic(dir / manifest.plan_ref, plan_to_text(plan));
    write_file_atomic(dir / manifest.input_ref, format_input_vec(inputs));
    // Manifest last: its appearance signals the job is complete and claimable.
    write_file_atomic(dir / "manifest.json", manifest_to_text(manifest));
    return manifest.job_id;
}

PollAction node_poll(const fs::path& root, const NodeDescriptor& n) {
    fs::path jobs = root / "jobs";
    std::error_code ec;
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(jobs, ec))
        if (entry.is_directory())
            ids.push_back(entry.path().filename().string());
    std::sort(ids.begin(), ids.end());

    for (const std::string& id : ids) {
        fs::path dir = job_dir(root, id);
        if (!fs::exists(dir / "manifest.json"))
            continue; // still being submitted
        JobManifest manifest;
        try {
            manifest = parse_manifest(read_file(dir / "manifest.json"));
        } catch (const std::exception& e) {
            std::cerr << "[poll] skipping unreadable job " << id << ": " << e.what() << "\n";
            continue;
        }
        if (finished(dir) || fs::exists(dir / "running.lock"))
            continue;
        if (!arch_accepted(manifest, n.arch_id))
            continue;
        std::int64_t seq = max_context_seq(root, id);
        if (seq >= 0)
            return {PollAction::Kind::ClaimResume, id, seq};
        return {PollAction::Kind::ClaimFresh, id, -1};
    }
    return {};
}

ClaimToken claim(const fs::path& root, const std::string& job_id, const NodeDescriptor& n) {
    fs::path dir = job_dir(root, job_id);
    if (!fs::exists(dir / "manifest.json"))
        throw StorageError(StorageError::Kind::UnknownJob, "no such job \"" + job_id + "\"");
    if (finished(dir))
        throw StorageError(StorageError::Kind::Lifecycle,
                           "job \"" + job_id + "\" already finished");
    ClaimToken token{job_id, n.arch_id,
                     static_cast<std::uint64_t>(max_context_seq(root, job_id) + 1)};
    if (!try_create_lock(lock_path(root, job_id), lock_contents(token.arch_id, token.epoch)))
        throw StorageError(StorageError::Kind::AlreadyClaimed,
                           "job \"" + job_id + "\" is claimed by another node");
    // A racer may have finished the job between the check above and our lock
    // creation; results only appear under the lock, so re-checking now that
    // we hold it is conclusive.
    if (finished(dir)) {
        release_claim(root, token);
        throw StorageError(StorageError::Kind::Lifecycle,
                           "job \"" + job_id + "\" finished while claiming");
    }
    return token;
}

void release_claim(const fs::path& root, const ClaimToken& token) {
    require_holder(root, token);
    std::error_code ec;
    fs::remove(lock_path(root, token.job_id), ec);
    if (ec)
        throw StorageError(StorageError::Kind::Io,
                           "cannot release claim on \"" + token.job_id + "\"");
}

void publish_context(const fs::path& root, const ClaimToken& token,
                     std::span<const std::uint8_t> image, std::uint64_t seq,
                     std::span<const Emitted> segment_outputs) {
    require_holder(root, token);
    std::int64_t current = max_context_seq(root, token.job_id);
    if (seq != static_cast<std::uint64_t>(current + 1))
        throw StorageError(StorageError::Kind::StaleSequence,
                           "context seq " + std::to_string(seq) + " is not the next sequence (" +
                               std::to_string(current + 1) + ")");
    fs::path dir = job_dir(root, token.job_id) / "contexts";
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::string base = "ctx." + std::to_string(seq);
    write_file_atomic(dir / (base + ".out"), format_outputs(segment_outputs));
    // Image last: resume detection keys on the .ctxs file.
    write_file_atomic(dir / (base + ".ctxs"),
                      std::string_view(reinterpret_cast<const char*>(image.data()), image.size()));
    release_claim(root, token);
}

void publish_result(const fs::path& root, const ClaimToken& token,
                    std::span<const Emitted> outputs) {
    require_holder(root, token);
    write_file_atomic(job_dir(root, token.job_id) / "result.out", format_outputs(outputs));
    release_claim(root, token);
}

void publish_failure(const fs::path& root, const ClaimToken& token, const std::string& reason) {
    require_holder(root, token);
    write_file_atomic(job_dir(root, token.job_id) / "failed.txt", reason + "\n");
    release_claim(root, token);
}

void request_interrupt(const fs::path& root, const std::string& job_id) {
    fs::path dir = job_dir(root, job_id);
    if (!fs::exists(dir))
        throw StorageError(StorageError::Kind::UnknownJob, "no such job \"" + job_id + "\"");
    std::error_code ec;
    fs::create_directories(dir / "control", ec);
    write_file_atomic(interrupt_request_path(root, job_id), "interrupt\n");
}

JobView job_status(const fs::path& root, const std::string& job_id) {
    fs::path dir = job_dir(root, job_id);
    if (!fs::exists(dir / "manifest.json"))
        throw StorageError(StorageError::Kind::UnknownJob, "no such job \"" + job_id + "\"");
    JobView v;
    v.context_seq = max_context_seq(root, job_id);
    v.result_present = fs::exists(dir / "result.out");
    if (v.result_present) {
        v.status = JobView::Status::Done;
    } else if (fs::exists(dir / "failed.txt")) {
        v.status = JobView::Status::Failed;
        try {
            v.failure = read_file(dir / "failed.txt");
            while (!v.failure.empty() && v.failure.back() == '\n')
                v.failure.pop_back();
        } catch (const StorageError&) {
            v.failure = "?";
        }
    } else if (fs::exists(dir / "running.lock")) {
        v.status = JobView::Status::Running;
        try {
            json j = json::parse(read_file(dir / "running.lock"));
            v.node_arch = j.at("arch").get<std::string>();
        } catch (const std::exception&) {
            v.node_arch = "?";
        }
    } else if (v.context_seq >= 0) {
        v.status = JobView::Status::Checkpointed;
    } else {
        v.status = JobView::Status::Submitted;
    }
    return v;
}

} // namespace ctxs
