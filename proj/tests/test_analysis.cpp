// SPDX-License-Identifier: Apache-2.0
#include "ctxs/analysis.hpp"
#include "ctxs/simulator.hpp"

#include "random_circuit.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <functional>
#include <set>

using namespace ctxs;
using namespace ctxs::testing;

namespace {

std::set<std::string> live_set(const Circuit& c, const LivenessMap& m, const char* state) {
    auto ids = live_register_ids(c, m, *state_index(c, state));
    return {ids.begin(), ids.end()};
}

// Independent oracle: does the subgraph induced by non-checkpoint, non-halt
// states contain a cycle? Colored DFS, nothing shared with the analysis code.
bool induced_subgraph_has_cycle(const Circuit& c, const std::set<std::string>& checkpoints) {
    const std::size_t ns = c.states.size();
    std::vector<int> color(ns, 0);
    std::vector<bool> member(ns, false);
    for (std::size_t s = 0; s < ns; ++s)
        member[s] = !c.states[s].halt && !checkpoints.count(c.states[s].id);

    std::function<bool(std::size_t)> visit = [&](std::size_t s) -> bool {
        color[s] = 1;
        for (const Transition& t : c.states[s].transitions) {
            auto idx = state_index(c, t.target);
            if (!idx || !member[*idx])
                continue;
            if (color[*idx] == 1)
                return true;
            if (color[*idx] == 0 && visit(*idx))
                return true;
        }
        color[s] = 2;
        return false;
    };
    for (std::size_t s = 0; s < ns; ++s)
        if (member[s] && color[s] == 0 && visit(s))
            return true;
    return false;
}

} // namespace

TEST_CASE("ring3 live-in sets") {
    Circuit c = load_ring3();
    LivenessMap m = live_registers(c);
    CHECK(live_set(c, m, "S0") == std::set<std::string>{"acc"});
    CHECK(live_set(c, m, "S1") == std::set<std::string>{"acc"});
    CHECK(live_set(c, m, "S2") == std::set<std::string>{"acc"});
    CHECK(live_set(c, m, "S3") == std::set<std::string>{});
    // tmp is written but never read: dead everywhere.
    for (std::size_t s = 0; s < c.states.size(); ++s)
        CHECK_FALSE(m.is_live(static_cast<std::uint32_t>(s), 1));
}

TEST_CASE("liveness of a circuit with no registers") {
    Circuit c = parse_circuit(R"({"name":"z","registers":[],"inputs":[],"outputs":[],
        "states":[{"id":"A","transitions":[{"guard":"ELSE","target":"A"}]}],
        "initial":"A"})");
    LivenessMap m = live_registers(c);
    CHECK(m.live[0].empty());
}

TEST_CASE("self-loop r := r + 1 keeps r live") {
    Circuit c = parse_circuit(R"({"name":"z","registers":[{"id":"r","width":8}],
        "inputs":[],"outputs":[],
        "states":[{"id":"Sw","assignments":[{"target":"r","expr":"r + 1"}],
                   "transitions":[{"guard":"ELSE","target":"Sw"}]}],
        "initial":"Sw"})");
    LivenessMap m = live_registers(c);
    CHECK(live_set(c, m, "Sw") == std::set<std::string>{"r"});
}

TEST_CASE("a register written before any read is dead upstream") {
    // A: r := 1         (kills r)
    // B: emit r         (uses r)
    // live(B) = {r}, live(A) = {} because A redefines r before B reads it.
    Circuit c = parse_circuit(R"({"name":"z","registers":[{"id":"r","width":8}],
        "inputs":[],"outputs":[{"id":"o","width":8}],
        "states":[{"id":"A","assignments":[{"target":"r","expr":"1"}],
                   "transitions":[{"guard":"ELSE","target":"B"}]},
                  {"id":"B","emissions":[{"port":"o","expr":"r"}],
                   "transitions":[{"guard":"ELSE","target":"A"}]}],
        "initial":"A"})");
    LivenessMap m = live_registers(c);
    CHECK(live_set(c, m, "A") == std::set<std::string>{});
    CHECK(live_set(c, m, "B") == std::set<std::string>{"r"});
}

TEST_CASE("guards count as uses") {
    Circuit c = parse_circuit(R"({"name":"z","registers":[{"id":"g","width":4}],
        "inputs":[],"outputs":[],
        "states":[{"id":"A","transitions":[{"guard":"g == 0","target":"H"},
                                           {"guard":"ELSE","target":"A"}]},
                  {"id":"H","halt":true}],
        "initial":"A"})");
    LivenessMap m = live_registers(c);
    CHECK(live_set(c, m, "A") == std::set<std::string>{"g"});
}

TEST_CASE("ring3 worst-case drain") {
    Circuit c = load_ring3();
    SUBCASE("checkpoints {S0}") {
        DrainMap dm = worst_case_drain(c, {"S0"});
        CHECK(dm.bound[0] == 0);
        CHECK(dm.bound[1] == 2);
        CHECK(dm.bound[2] == 1);
        CHECK(dm.bound[3] == 0); // halt convention
    }
    SUBCASE("all states are checkpoints") {
        DrainMap dm = worst_case_drain(c, {"S0", "S1", "S2", "S3"});
        for (std::size_t s = 0; s < 4; ++s)
            CHECK(dm.bound[s] == 0);
    }
    SUBCASE("no checkpoints leaves the ring unbounded") {
        DrainMap dm = worst_case_drain(c, {});
        CHECK_FALSE(dm.bound[0].has_value());
        CHECK_FALSE(dm.bound[1].has_value());
        CHECK_FALSE(dm.bound[2].has_value());
        CHECK(dm.bound[3] == 0);
    }
    SUBCASE("checkpoints {S1}") {
        DrainMap dm = worst_case_drain(c, {"S1"});
        CHECK(dm.bound[0] == 1); // worst of S3 (halt, 0) and S1 (checkpoint, 0), plus one
        CHECK(dm.bound[1] == 0);
        CHECK(dm.bound[2] == 2);
    }
}

TEST_CASE("drain is bounded exactly when the induced residual graph is acyclic") {
    std::mt19937_64 rng(0x5eed0002);
    for (int i = 0; i < 120; ++i) {
        Circuit c = random_circuit(rng);
        // Random checkpoint set over non-halt states.
        std::set<std::string> cps;
        for (const StateDef& st : c.states)
            if (!st.halt && (rng() & 1))
                cps.insert(st.id);
        DrainMap dm = worst_case_drain(c, cps);
        bool all_bounded = true;
        for (std::size_t s = 0; s < c.states.size(); ++s)
            if (!dm.bound[s])
                all_bounded = false;
        CHECK(all_bounded == !induced_subgraph_has_cycle(c, cps));
    }
}

TEST_CASE("enlarging the checkpoint set never increases a drain bound") {
    std::mt19937_64 rng(0x5eed0003);
    for (int i = 0; i < 120; ++i) {
        Circuit c = random_circuit(rng);
        std::set<std::string> small, big;
        for (const StateDef& st : c.states) {
            if (st.halt)
                continue;
            bool in_small = (rng() & 3) == 0;
            if (in_small)
                small.insert(st.id);
            if (in_small || (rng() & 1))
                big.insert(st.id);
        }
        DrainMap a = worst_case_drain(c, small);
        DrainMap b = worst_case_drain(c, big);
        for (std::size_t s = 0; s < c.states.size(); ++s) {
            if (!a.bound[s])
                continue; // unbounded may only improve
            REQUIRE(b.bound[s].has_value());
            CHECK(*b.bound[s] <= *a.bound[s]);
        }
    }
}

TEST_CASE("randomizing dead registers never changes the output sequence") {
    std::mt19937_64 rng(0x5eed0004);
    int exercised = 0;
    for (int i = 0; i < 250 && exercised < 40; ++i) {
        Circuit c = random_circuit(rng);
        if (c.registers.empty())
            continue;
        LivenessMap lm = live_registers(c);
        InputStream full = random_inputs(rng, 128);

        // Walk to a random cycle, then fork: one copy continues untouched,
        // the other gets every dead register scrambled.
        MachineState m = init_state(c);
        InputStream in = full;
        std::uint32_t warmup = static_cast<std::uint32_t>(rng() % 20);
        bool halted = false;
        for (std::uint32_t k = 0; k < warmup; ++k) {
            auto sidx = *state_index(c, m.state);
            if (c.states[sidx].halt) {
                halted = true;
                break;
            }
            m = step(c, m, in).next;
        }
        if (halted)
            continue;

        MachineState scrambled = m;
        auto sidx = *state_index(c, m.state);
        for (std::size_t r = 0; r < c.registers.size(); ++r)
            if (!lm.is_live(sidx, static_cast<std::uint32_t>(r)))
                scrambled.regs[r] = mask_to_width(rng(), c.registers[r].width);
        if (scrambled == m)
            continue; // nothing dead to scramble

        InputStream in_a = full;
        in_a.cursor = in.cursor;
        InputStream in_b = full;
        in_b.cursor = in.cursor;
        std::vector<Emitted> out_a, out_b;
        MachineState a = m, b = scrambled;
        for (int k = 0; k < 40; ++k) {
            auto ai = *state_index(c, a.state);
            auto bi = *state_index(c, b.state);
            REQUIRE(a.state == b.state);
            if (c.states[ai].halt || c.states[bi].halt)
                break;
            auto ra = step(c, a, in_a);
            auto rb = step(c, b, in_b);
            a = std::move(ra.next);
            b = std::move(rb.next);
            out_a.insert(out_a.end(), ra.outputs.begin(), ra.outputs.end());
            out_b.insert(out_b.end(), rb.outputs.begin(), rb.outputs.end());
        }
        CHECK(out_a == out_b);
        ++exercised;
    }
    CHECK(exercised >= 40); // the corpus must actually exercise the property
}
