// SPDX-License-Identifier: Apache-2.0
//
// ctxs: compile circuits into checkpoint plans, submit jobs to shared
// storage, run node daemons against it, and inspect or verify jobs.
#include "ctxs/analysis.hpp"
#include "ctxs/circuit.hpp"
#include "ctxs/codec.hpp"
#include "ctxs/daemon.hpp"
#include "ctxs/errors.hpp"
#include "ctxs/planner.hpp"
#include "ctxs/simulator.hpp"
#include "ctxs/storage.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

namespace fs = std::filesystem;
using namespace ctxs;

namespace {

// Stable exit-code contract: 0 ok, 1 verification mismatch, 2 parse,
// 3 plan/digest, 4 storage, 5 unknown job.
constexpr int kOk = 0;
constexpr int kExitVerifyMismatch = 1;
constexpr int kExitParse = 2;
constexpr int kExitPlan = 3;
constexpr int kExitStorage = 4;
constexpr int kExitUnknownJob = 5;

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw StorageError(StorageError::Kind::Io, "cannot read " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Circuit load_circuit(const fs::path& path) {
    Circuit c = parse_circuit(slurp(path));
    auto diags = validate_circuit(c);
    for (const Diagnostic& d : diags)
        std::cerr << (d.severity == Diagnostic::Severity::Error ? "error: " : "warning: ")
                  << d.message << "\n";
    if (has_errors(diags))
        throw ParseError("circuit \"" + path.string() + "\" is invalid");
    return c;
}

int cmd_compile(const fs::path& circuit_path, std::int64_t latency, const std::string& mode,
                fs::path out_path) {
    Circuit c = load_circuit(circuit_path);
    CheckpointPlan plan = plan_checkpoints(
        c, latency, mode == "greedy" ? PlanMode::Greedy : PlanMode::Exact);
    if (out_path.empty()) {
        out_path = circuit_path;
        out_path.replace_extension(".plan.json");
    }
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << plan_to_text(plan)))
        throw StorageError(StorageError::Kind::Io, "cannot write " + out_path.string());
    out.close();

    std::cout << "circuit: " << c.name << "\n"
              << "states: " << c.states.size() << ", registers: " << c.registers.size() << "\n"
              << "latency bound: " << latency << ", mode: " << mode << "\n";
    std::cout << "checkpoints (" << plan.checkpoints.size() << "):";
    for (const std::string& id : plan.checkpoints)
        std::cout << " " << id;
    std::cout << "\n"
              << "union_bits: " << plan.overhead.union_bits << "\n"
              << "state_bits: " << plan.overhead.state_bits << "\n"
              << "max_context_bits: " << plan.overhead.max_context_bits << "\n";
    DrainMap dm = worst_case_drain(c, plan.checkpoint_set());
    std::cout << "worst-case drain per state:\n";
    for (std::size_t s = 0; s < c.states.size(); ++s) {
        std::cout << "  " << c.states[s].id << ": ";
        if (dm.bound[s])
            std::cout << *dm.bound[s];
        else
            std::cout << "unbounded";
        std::cout << "\n";
    }
    std::cout << "plan written: " << out_path.string() << "\n";
    return kOk;
}

int cmd_submit(const fs::path& root, const fs::path& circuit_path, const fs::path& plan_path,
               const fs::path& input_path, std::string job_id,
               const std::vector<std::string>& archs, std::optional<std::uint64_t> interrupt_at) {
    Circuit c = load_circuit(circuit_path);
    CheckpointPlan plan = parse_plan(slurp(plan_path));
    InputStream inputs = parse_input_vec(slurp(input_path));
    if (job_id.empty()) {
        std::random_device rd;
        std::mt19937_64 rng(rd());
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(rng()));
        job_id = "job-" + std::string(buf, 8);
    }
    JobManifest m;
    m.job_id = job_id;
    m.latency_bound = plan.latency_bound;
    m.deterministic_interrupt = interrupt_at;
    for (const std::string& a : archs)
        if (a != "any" && a != "ANY")
            m.accepted_archs.push_back(a);
    std::cout << submit_job(root, m, c, plan, inputs) << "\n";
    return kOk;
}

NodeDescriptor make_descriptor(const std::string& arch, std::optional<std::uint32_t> word_bits,
                               std::optional<bool> msb_first, const fs::path& root) {
    NodeDescriptor n = arch == "altera-like" ? altera_like(root) : xilinx_like(root);
    n.arch_id = arch;
    if (word_bits)
        n.scan_word_bits = *word_bits;
    if (msb_first)
        n.bit_order = *msb_first ? BitOrder::MsbFirst : BitOrder::LsbFirst;
    return n;
}

int cmd_node(const fs::path& root, const NodeOptions& opts, bool once) {
    if (!fs::exists(root))
        throw StorageError(StorageError::Kind::Io, "storage root " + root.string() + " not found");
    if (once) {
        if (node_run_once(root, opts) == NodeCycle::Idle)
            std::cout << "idle\n";
        return kOk;
    }
    node_daemon(root, opts, [] { return true; });
    return kOk;
}

int cmd_status(const fs::path& root, const std::string& job_id) {
    std::cout << render_status(job_status(root, job_id)) << "\n";
    return kOk;
}

int cmd_interrupt(const fs::path& root, const std::string& job_id) {
    request_interrupt(root, job_id);
    return kOk;
}

// Re-runs the job uninterrupted in-process and diffs against the published
// result.out byte for byte.
int cmd_verify(const fs::path& root, const std::string& job_id, fs::path input_override) {
    fs::path dir = job_dir(root, job_id);
    if (!fs::exists(dir / "manifest.json"))
        throw StorageError(StorageError::Kind::UnknownJob, "no such job \"" + job_id + "\"");
    JobManifest m = parse_manifest(slurp(dir / "manifest.json"));
    Circuit c = parse_circuit(slurp(dir / m.circuit_ref));
    CheckpointPlan plan = parse_plan(slurp(dir / m.plan_ref));
    fs::path input_path = input_override.empty() ? dir / m.input_ref : input_override;
    InputStream inputs = parse_input_vec(slurp(input_path));

    if (!fs::exists(dir / "result.out")) {
        std::cout << "MISMATCH: job has no result.out yet ("
                  << render_status(job_status(root, job_id)) << ")\n";
        return kExitVerifyMismatch;
    }
    RunOutcome ref = run(c, plan, init_state(c), inputs, kDefaultBudget, InterruptPolicy::none());
    std::string expect = format_outputs(ref.outputs);
    std::string got = slurp(dir / "result.out");
    if (expect != got) {
        std::cout << "MISMATCH: result.out differs from the uninterrupted run\n";
        return kExitVerifyMismatch;
    }
    std::cout << "OK: result.out matches the uninterrupted run (" << ref.outputs.size()
              << " emissions)\n";
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"checkpoint-based hardware context switching, simulated at desk scale"};
    app.require_subcommand(1);

    // compile
    auto* compile = app.add_subcommand("compile", "select checkpoints for a circuit");
    fs::path circuit_path, plan_out, plan_path, input_path, root;
    std::int64_t latency = 0;
    std::string mode = "exact", job_id, arch = "xilinx-like";
    std::vector<std::string> archs{"any"};
    std::optional<std::uint64_t> interrupt_at;
    compile->add_option("circuit", circuit_path, "circuit JSON file")->required();
    compile->add_option("--latency", latency, "max transitions to reach a checkpoint")->required();
    compile->add_option("--mode", mode, "exact|greedy")
        ->check(CLI::IsMember({"exact", "greedy"}))
        ->capture_default_str();
    compile->add_option("-o,--output", plan_out, "plan output path (default: <circuit>.plan.json)");

    // submit
    auto* submit = app.add_subcommand("submit", "place a job in shared storage");
    submit->add_option("--root", root, "storage root")->required();
    submit->add_option("circuit", circuit_path, "circuit JSON file")->required();
    submit->add_option("plan", plan_path, "plan JSON file")->required();
    submit->add_option("input", input_path, "input vector file")->required();
    submit->add_option("--job-id", job_id, "job id (default: random)");
    submit->add_option("--archs", archs, "accepted arch ids, or 'any'");
    submit->add_option("--interrupt-at", interrupt_at,
                       "deterministic interrupt cycle for the first run segment");

    // node
    auto* node = app.add_subcommand("node", "run a simulated board daemon");
    std::optional<std::uint32_t> word_bits;
    bool once = false, daemon_mode = false, msb = false, lsb = false, verbose = false;
    std::uint32_t poll_ms = 50;
    std::uint64_t budget = kDefaultBudget;
    node->add_option("--root", root, "storage root")->required();
    node->add_option("--arch", arch, "architecture id")->capture_default_str();
    node->add_option("--word-bits", word_bits, "scan word size")
        ->check(CLI::IsMember({8, 16, 32, 64}));
    node->add_flag("--msb-first", msb, "most significant bit first within scan words");
    node->add_flag("--lsb-first", lsb, "least significant bit first within scan words");
    auto* once_flag = node->add_flag("--once", once, "one poll/claim/execute round, then exit");
    auto* daemon_flag = node->add_flag("--daemon", daemon_mode, "poll forever");
    once_flag->excludes(daemon_flag);
    node->add_option("--poll-ms", poll_ms, "idle poll period")->capture_default_str();
    node->add_option("--budget", budget, "per-segment cycle budget")->capture_default_str();
    node->add_flag("-v,--verbose", verbose, "log claims and publications to stderr");

    // interrupt / status / verify
    auto* interrupt = app.add_subcommand("interrupt", "request an interrupt for a job");
    interrupt->add_option("--root", root, "storage root")->required();
    interrupt->add_option("job", job_id, "job id")->required();
    auto* status = app.add_subcommand("status", "show a job's lifecycle state");
    status->add_option("--root", root, "storage root")->required();
    status->add_option("job", job_id, "job id")->required();
    auto* verify = app.add_subcommand("verify", "diff result.out against an uninterrupted rerun");
    verify->add_option("--root", root, "storage root")->required();
    verify->add_option("job", job_id, "job id")->required();
    fs::path verify_inputs;
    verify->add_option("--inputs", verify_inputs, "reference input vectors (default: the job's)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (compile->parsed())
            return cmd_compile(circuit_path, latency, mode, plan_out);
        if (submit->parsed())
            return cmd_submit(root, circuit_path, plan_path, input_path, job_id, archs,
                              interrupt_at);
        if (node->parsed()) {
            if (!once && !daemon_mode) {
                std::cerr << "error: node requires --once or --daemon\n";
                return kExitStorage;
            }
            NodeOptions opts;
            opts.node = make_descriptor(arch, word_bits, msb ? std::optional<bool>(true)
                                                             : (lsb ? std::optional<bool>(false)
                                                                    : std::nullopt),
                                        root);
            opts.poll_ms = poll_ms;
            opts.budget = budget;
            opts.verbose = verbose;
            return cmd_node(root, opts, once);
        }
        if (interrupt->parsed())
            return cmd_interrupt(root, job_id);
        if (status->parsed())
            return cmd_status(root, job_id);
        if (verify->parsed())
            return cmd_verify(root, job_id, verify_inputs);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    } catch (const PlanError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPlan;
    } catch (const CodecError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPlan;
    } catch (const StorageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        switch (e.kind()) {
        case StorageError::Kind::UnknownJob: return kExitUnknownJob;
        case StorageError::Kind::InvalidPlan: return kExitPlan;
        default: return kExitStorage;
        }
    } catch (const SimError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPlan;
    }
    return kOk;
}
