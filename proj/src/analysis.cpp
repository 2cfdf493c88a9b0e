// SPDX-License-Identifier: Apache-2.0
#include "ctxs/analysis.hpp"

#include <algorithm>
#include <deque>

namespace ctxs {

namespace {

struct UseDef {
    std::vector<bool> use;
    std::vector<bool> def;
};

UseDef use_def(const Circuit& c, const StateDef& st) {
    UseDef ud{std::vector<bool>(c.registers.size(), false),
              std::vector<bool>(c.registers.size(), false)};
    std::vector<std::uint32_t> reads;
    for (const Assignment& a : st.assignments) {
        ud.def[a.target] = true;
        collect_register_reads(*a.value, reads);
    }
    for (const Emission& e : st.emissions)
        collect_register_reads(*e.value, reads);
    for (const Transition& t : st.transitions)
        if (t.guard)
            collect_register_reads(*t.guard, reads);
    for (std::uint32_t r : reads)
        ud.use[r] = true;
    return ud;
}

std::vector<std::vector<std::uint32_t>> successor_lists(const Circuit& c) {
    std::vector<std::vector<std::uint32_t>> succ(c.states.size());
    for (std::size_t s = 0; s < c.states.size(); ++s)
        for (const Transition& t : c.states[s].transitions)
            if (auto idx = state_index(c, t.target))
                succ[s].push_back(*idx);
    return succ;
}

} // namespace

LivenessMap live_registers(const Circuit& c) {
    const std::size_t ns = c.states.size();
    const std::size_t nr = c.registers.size();
    std::vector<UseDef> ud;
    ud.reserve(ns);
    for (const StateDef& st : c.states)
        ud.push_back(use_def(c, st));
    auto succ = successor_lists(c);

    LivenessMap m;
    m.live.assign(ns, std::vector<bool>(nr, false));

    // Monotone on a finite lattice; settles within |states| * |registers|
    // round-robin sweeps.
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t s = ns; s-- > 0;) {
            for (std::size_t r = 0; r < nr; ++r) {
                if (m.live[s][r])
                    continue;
                bool v = ud[s].use[r];
                if (!v && !ud[s].def[r]) {
                    for (std::uint32_t t : succ[s]) {
                        if (m.live[t][r]) {
                            v = true;
                            break;
                        }
                    }
                }
                if (v) {
                    m.live[s][r] = true;
                    changed = true;
                }
            }
        }
    }
    return m;
}

std::vector<std::string> live_register_ids(const Circuit& c, const LivenessMap& m,
                                           std::uint32_t state) {
    std::vector<std::string> out;
    for (std::size_t r = 0; r < c.registers.size(); ++r)
        if (m.live[state][r])
            out.push_back(c.registers[r].id);
    return out;
}

DrainMap worst_case_drain(const Circuit& c, const std::set<std::string>& checkpoints) {
    const std::size_t ns = c.states.size();
    auto succ = successor_lists(c);

    // Reverse edges with multiplicity, plus per-state count of unresolved
    // outgoing edges. A state resolves once every outgoing edge does;
    // checkpoint and halt states resolve at 0 unconditionally. Whatever never
    // resolves sits on or ahead of a checkpoint-free cycle: unbounded.
    std::vector<std::vector<std::uint32_t>> pred(ns);
    std::vector<std::size_t> pending(ns, 0);
    for (std::size_t s = 0; s < ns; ++s) {
        pending[s] = succ[s].size();
        for (std::uint32_t t : succ[s])
            pred[t].push_back(static_cast<std::uint32_t>(s));
    }

    DrainMap dm;
    dm.bound.assign(ns, std::nullopt);
    std::deque<std::uint32_t> ready;
    std::vector<bool> fixed(ns, false);
    for (std::size_t s = 0; s < ns; ++s) {
        if (c.states[s].halt || checkpoints.count(c.states[s].id)) {
            dm.bound[s] = 0;
            fixed[s] = true;
            ready.push_back(static_cast<std::uint32_t>(s));
        }
    }

    std::vector<std::uint32_t> best(ns, 0); // running max over resolved successors
    while (!ready.empty()) {
        std::uint32_t t = ready.front();
        ready.pop_front();
        for (std::uint32_t p : pred[t]) {
            if (fixed[p])
                continue;
            best[p] = std::max(best[p], *dm.bound[t]);
            if (--pending[p] == 0) {
                dm.bound[p] = best[p] + 1;
                fixed[p] = true;
                ready.push_back(p);
            }
        }
    }
    return dm;
}

} // namespace ctxs
