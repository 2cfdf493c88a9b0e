// SPDX-License-Identifier: Apache-2.0
#include "ctxs/planner.hpp"

#include "ctxs/errors.hpp"
#include "ctxs/hash.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cassert>
#include <charconv>
#include <deque>

namespace ctxs {

namespace {

using nlohmann::json;

std::string to_hex16(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = digits[v & 0xF];
        v >>= 4;
    }
    return s;
}

std::uint64_t parse_hex16(const std::string& s, const char* what) {
    std::uint64_t v = 0;
    if (s.size() != 16)
        throw ParseError(std::string("bad ") + what + ": expected 16 hex digits");
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ParseError(std::string("bad ") + what + ": expected 16 hex digits");
    return v;
}

// Index-based view of the transition graph, shared by the search loops.
struct Graph {
    std::size_t ns = 0;
    std::vector<std::vector<std::uint32_t>> succ;
    std::vector<bool> halt;
    std::vector<bool> reachable;
};

Graph make_graph(const Circuit& c) {
    Graph g;
    g.ns = c.states.size();
    g.succ.resize(g.ns);
    g.halt.resize(g.ns);
    for (std::size_t s = 0; s < g.ns; ++s) {
        g.halt[s] = c.states[s].halt;
        for (const Transition& t : c.states[s].transitions)
            if (auto idx = state_index(c, t.target))
                g.succ[s].push_back(*idx);
    }
    g.reachable = reachable_states(c);
    return g;
}

// Count of reachable non-halt states whose drain exceeds the bound (or is
// unbounded) under the given checkpoint assignment.
std::size_t violation_count(const Graph& g, const std::vector<bool>& cp, std::int64_t bound) {
    std::vector<std::int64_t> f(g.ns, -1); // -1 = unresolved
    std::vector<std::size_t> pending(g.ns, 0);
    std::vector<std::vector<std::uint32_t>> pred(g.ns);
    for (std::size_t s = 0; s < g.ns; ++s) {
        pending[s] = g.succ[s].size();
        for (std::uint32_t t : g.succ[s])
            pred[t].push_back(static_cast<std::uint32_t>(s));
    }
    std::deque<std::uint32_t> ready;
    std::vector<std::int64_t> best(g.ns, 0);
    for (std::size_t s = 0; s < g.ns; ++s) {
        if (g.halt[s] || cp[s]) {
            f[s] = 0;
            ready.push_back(static_cast<std::uint32_t>(s));
        }
    }
    while (!ready.empty()) {
        std::uint32_t t = ready.front();
        ready.pop_front();
        for (std::uint32_t p : pred[t]) {
            if (f[p] >= 0)
                continue;
            best[p] = std::max(best[p], f[t]);
            if (--pending[p] == 0) {
                f[p] = best[p] + 1;
                ready.push_back(p);
            }
        }
    }
    std::size_t violations = 0;
    for (std::size_t s = 0; s < g.ns; ++s)
        if (g.reachable[s] && !g.halt[s] && (f[s] < 0 || f[s] > bound))
            ++violations;
    return violations;
}

bool feasible(const Graph& g, const std::vector<bool>& cp, std::int64_t bound) {
    return violation_count(g, cp, bound) == 0;
}

// Objective, lexicographic: total live-register footprint, then checkpoint
// count, then lexicographically smallest id set. Shared by the exact search
// and the brute-force oracle so ties break identically.
struct ObjectiveKey {
    std::uint64_t union_bits = 0;
    std::uint32_t count = 0;
    std::vector<std::string> ids_sorted;

    bool operator<(const ObjectiveKey& o) const {
        if (union_bits != o.union_bits)
            return union_bits < o.union_bits;
        if (count != o.count)
            return count < o.count;
        return ids_sorted < o.ids_sorted;
    }
};

ObjectiveKey key_of(const Circuit& c, const std::vector<bool>& cp,
                    const std::vector<std::vector<std::uint32_t>>& live_regs,
                    const std::vector<std::uint32_t>& width) {
    ObjectiveKey k;
    std::vector<bool> in_union(width.size(), false);
    for (std::size_t s = 0; s < cp.size(); ++s) {
        if (!cp[s])
            continue;
        ++k.count;
        k.ids_sorted.push_back(c.states[s].id);
        for (std::uint32_t r : live_regs[s]) {
            if (!in_union[r]) {
                in_union[r] = true;
                k.union_bits += width[r];
            }
        }
    }
    std::sort(k.ids_sorted.begin(), k.ids_sorted.end());
    return k;
}

// Per-state live register indices and register widths, precomputed once.
struct LiveInfo {
    std::vector<std::vector<std::uint32_t>> live_regs;
    std::vector<std::uint32_t> width;
};

LiveInfo make_live_info(const Circuit& c, const LivenessMap& lm) {
    LiveInfo li;
    li.live_regs.resize(c.states.size());
    for (std::size_t s = 0; s < c.states.size(); ++s)
        for (std::size_t r = 0; r < c.registers.size(); ++r)
            if (lm.live[s][r])
                li.live_regs[s].push_back(static_cast<std::uint32_t>(r));
    for (const Register& r : c.registers)
        li.width.push_back(r.width);
    return li;
}

std::vector<std::uint32_t> candidate_states(const Graph& g) {
    std::vector<std::uint32_t> cands;
    for (std::size_t s = 0; s < g.ns; ++s)
        if (g.reachable[s] && !g.halt[s])
            cands.push_back(static_cast<std::uint32_t>(s));
    return cands;
}

// Branch and bound over include/exclude decisions per candidate state.
// Partial (union_bits, count) is monotone under inclusion, so it lower-bounds
// every completion; an exclusion is explored only if making every undecided
// state a checkpoint would still satisfy the bound.
class ExactSearch {
public:
    ExactSearch(const Circuit& c, const Graph& g, const LiveInfo& li, std::int64_t bound,
                std::uint64_t max_nodes)
        : c_(c), g_(g), li_(li), bound_(bound), max_nodes_(max_nodes),
          cands_(candidate_states(g)), chosen_(g.ns, false),
          union_count_(li.width.size(), 0) {}

    std::vector<bool> release_best() {
        dfs(0);
        return std::move(best_set_);
    }

private:
    void include(std::uint32_t s) {
        chosen_[s] = true;
        ++count_;
        for (std::uint32_t r : li_.live_regs[s])
            if (union_count_[r]++ == 0)
                union_bits_ += li_.width[r];
    }

    void exclude(std::uint32_t s) {
        chosen_[s] = false;
        --count_;
        for (std::uint32_t r : li_.live_regs[s])
            if (--union_count_[r] == 0)
                union_bits_ -= li_.width[r];
    }

    bool optimistic_feasible(std::size_t next_idx) const {
        std::vector<bool> cp = chosen_;
        for (std::size_t i = next_idx; i < cands_.size(); ++i)
            cp[cands_[i]] = true;
        return feasible(g_, cp, bound_);
    }

    void dfs(std::size_t idx) {
        if (max_nodes_ && ++nodes_ > max_nodes_)
            throw PlanError(PlanError::Kind::BudgetExceeded,
                            "exact checkpoint search exceeded node budget");
        if (have_best_) {
            if (union_bits_ > best_.union_bits ||
                (union_bits_ == best_.union_bits && count_ > best_.count))
                return;
        }
        if (idx == cands_.size()) {
            ObjectiveKey k = key_of(c_, chosen_, li_.live_regs, li_.width);
            if (!have_best_ || k < best_) {
                best_ = std::move(k);
                best_set_ = chosen_;
                have_best_ = true;
            }
            return;
        }
        std::uint32_t s = cands_[idx];
        include(s);
        dfs(idx + 1);
        exclude(s);
        if (optimistic_feasible(idx + 1))
            dfs(idx + 1);
    }

    const Circuit& c_;
    const Graph& g_;
    const LiveInfo& li_;
    std::int64_t bound_;
    std::uint64_t max_nodes_;
    std::uint64_t nodes_ = 0;

    std::vector<std::uint32_t> cands_;
    std::vector<bool> chosen_;
    std::vector<std::uint32_t> union_count_;
    std::uint64_t union_bits_ = 0;
    std::uint32_t count_ = 0;

    bool have_best_ = false;
    ObjectiveKey best_;
    std::vector<bool> best_set_;
};

// Adds whichever candidate relieves the most latency violations per union
// bit it adds, until none remain. Every violating state relieves at least
// itself when added, so the loop always terminates.
std::vector<bool> greedy_search(const Circuit& c, const Graph& g, const LiveInfo& li,
                                std::int64_t bound) {
    auto cands = candidate_states(g);
    std::vector<bool> chosen(g.ns, false);
    std::vector<std::uint32_t> union_count(li.width.size(), 0);

    auto added_bits = [&](std::uint32_t s) {
        std::uint64_t bits = 0;
        for (std::uint32_t r : li.live_regs[s])
            if (union_count[r] == 0)
                bits += li.width[r];
        return bits;
    };

    std::size_t current = violation_count(g, chosen, bound);
    while (current > 0) {
        bool have = false;
        std::uint32_t pick = 0;
        std::uint64_t pick_red = 0, pick_bits = 0;
        for (std::uint32_t s : cands) {
            if (chosen[s])
                continue;
            chosen[s] = true;
            std::size_t after = violation_count(g, chosen, bound);
            chosen[s] = false;
            if (after >= current)
                continue;
            std::uint64_t red = current - after;
            std::uint64_t bits = added_bits(s);
            // red/bits as a ratio without division; bits == 0 dominates.
            bool better;
            if (!have) {
                better = true;
            } else {
                std::uint64_t lhs = red * pick_bits;
                std::uint64_t rhs = pick_red * bits;
                if (lhs != rhs)
                    better = lhs > rhs;
                else if (red != pick_red)
                    better = red > pick_red;
                else if (bits != pick_bits)
                    better = bits < pick_bits;
                else
                    better = c.states[s].id < c.states[pick].id;
            }
            if (better) {
                have = true;
                pick = s;
                pick_red = red;
                pick_bits = bits;
            }
        }
        // Every violating state is an unchosen candidate and relieves itself.
        assert(have);
        chosen[pick] = true;
        for (std::uint32_t r : li.live_regs[pick])
            ++union_count[r];
        current = violation_count(g, chosen, bound);
    }
    return chosen;
}

std::set<std::string> names_of(const Circuit& c, const std::vector<bool>& cp) {
    std::set<std::string> out;
    for (std::size_t s = 0; s < cp.size(); ++s)
        if (cp[s])
            out.insert(c.states[s].id);
    return out;
}

void require_valid(const Circuit& c) {
    auto diags = validate_circuit(c);
    if (has_errors(diags)) {
        std::string msg = "circuit is invalid:";
        for (const Diagnostic& d : diags)
            if (d.severity == Diagnostic::Severity::Error)
                msg += " " + d.message + ";";
        throw PlanError(PlanError::Kind::InvalidCircuit, msg);
    }
}

} // namespace

OverheadReport plan_overhead(const Circuit& c, const std::set<std::string>& checkpoints) {
    LivenessMap lm = live_registers(c);
    OverheadReport r;
    r.state_bits = std::max<std::uint32_t>(
        1, static_cast<std::uint32_t>(std::bit_width(
               c.states.empty() ? std::size_t{0} : c.states.size() - 1)));
    std::vector<bool> in_union(c.registers.size(), false);
    std::uint64_t max_live = 0;
    for (const std::string& id : checkpoints) {
        auto idx = state_index(c, id);
        if (!idx)
            throw PlanError(PlanError::Kind::InvalidPlan, "unknown checkpoint state \"" + id + "\"");
        ++r.checkpoint_count;
        std::uint64_t live_bits = 0;
        for (std::size_t reg = 0; reg < c.registers.size(); ++reg) {
            if (lm.live[*idx][reg]) {
                live_bits += c.registers[reg].width;
                if (!in_union[reg]) {
                    in_union[reg] = true;
                    r.union_bits += c.registers[reg].width;
                }
            }
        }
        max_live = std::max(max_live, live_bits);
    }
    r.max_context_bits = max_live + r.state_bits;
    return r;
}

CheckpointPlan build_plan(const Circuit& c, std::int64_t latency_bound,
                          const std::set<std::string>& checkpoints) {
    CheckpointPlan p;
    p.circuit_digest = circuit_hash(c);
    p.latency_bound = latency_bound;
    LivenessMap lm = live_registers(c);
    for (std::size_t s = 0; s < c.states.size(); ++s) {
        const std::string& id = c.states[s].id;
        if (checkpoints.count(id)) {
            p.checkpoints.push_back(id);
            p.live[id] = live_register_ids(c, lm, static_cast<std::uint32_t>(s));
        }
    }
    if (p.checkpoints.size() != checkpoints.size())
        throw PlanError(PlanError::Kind::InvalidPlan, "checkpoint set names unknown states");
    p.overhead = plan_overhead(c, checkpoints);
    p.plan_digest = fnv1a64(plan_canonical_prefix_text(p));
    return p;
}

// Canonical text with the plan_digest field omitted; what plan_digest signs.
std::string plan_canonical_prefix_text(const CheckpointPlan& p) {
    json j;
    j["circuit_digest"] = to_hex16(p.circuit_digest);
    j["latency_bound"] = p.latency_bound;
    j["checkpoints"] = p.checkpoints;
    json live = json::object();
    for (const auto& [state, regs] : p.live)
        live[state] = regs;
    j["live"] = std::move(live);
    j["overhead"] = {{"checkpoint_count", p.overhead.checkpoint_count},
                     {"max_context_bits", p.overhead.max_context_bits},
                     {"state_bits", p.overhead.state_bits},
                     {"union_bits", p.overhead.union_bits}};
    return j.dump();
}

CheckpointPlan plan_checkpoints(const Circuit& c, std::int64_t latency_bound, PlanMode mode,
                                SearchBudget budget) {
    if (latency_bound < 0)
        throw PlanError(PlanError::Kind::NegativeLatency, "latency bound must be >= 0");
    require_valid(c);
    Graph g = make_graph(c);
    LiveInfo li = make_live_info(c, live_registers(c));
    std::vector<bool> cp;
    if (mode == PlanMode::Exact) {
        ExactSearch search(c, g, li, latency_bound, budget.max_nodes);
        cp = search.release_best();
    } else {
        cp = greedy_search(c, g, li, latency_bound);
    }
    return build_plan(c, latency_bound, names_of(c, cp));
}

CheckpointPlan brute_force_plan(const Circuit& c, std::int64_t latency_bound) {
    if (latency_bound < 0)
        throw PlanError(PlanError::Kind::NegativeLatency, "latency bound must be >= 0");
    require_valid(c);
    Graph g = make_graph(c);
    LiveInfo li = make_live_info(c, live_registers(c));
    auto cands = candidate_states(g);
    if (cands.size() > 20)
        throw PlanError(PlanError::Kind::TooManyStates,
                        "brute force is limited to 20 candidate states, got " +
                            std::to_string(cands.size()));
    bool have_best = false;
    ObjectiveKey best;
    std::vector<bool> best_set;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << cands.size()); ++mask) {
        std::vector<bool> cp(g.ns, false);
        for (std::size_t i = 0; i < cands.size(); ++i)
            if (mask & (std::uint64_t{1} << i))
                cp[cands[i]] = true;
        if (!feasible(g, cp, latency_bound))
            continue;
        ObjectiveKey k = key_of(c, cp, li.live_regs, li.width);
        if (!have_best || k < best) {
            best = std::move(k);
            best_set = std::move(cp);
            have_best = true;
        }
    }
    return build_plan(c, latency_bound, names_of(c, best_set));
}

std::vector<Diagnostic> verify_plan(const Circuit& c, const CheckpointPlan& p) {
    std::vector<Diagnostic> diags;
    auto error = [&](std::string msg) {
        diags.push_back({Diagnostic::Severity::Error, std::move(msg)});
    };

    if (p.circuit_digest != circuit_hash(c)) {
        error("circuit digest mismatch: plan was built for a different circuit");
        return diags;
    }
    if (p.latency_bound < 0)
        error("negative latency bound");

    std::set<std::string> cp_set;
    std::int64_t last_index = -1;
    for (const std::string& id : p.checkpoints) {
        auto idx = state_index(c, id);
        if (!idx) {
            error("checkpoint \"" + id + "\" is not a state of the circuit");
            continue;
        }
        if (!cp_set.insert(id).second)
            error("duplicate checkpoint \"" + id + "\"");
        if (static_cast<std::int64_t>(*idx) < last_index)
            error("checkpoints are not in state-declaration order");
        last_index = *idx;
    }
    if (has_errors(diags))
        return diags;

    DrainMap dm = worst_case_drain(c, cp_set);
    std::vector<bool> reach = reachable_states(c);
    for (std::size_t s = 0; s < c.states.size(); ++s) {
        if (!reach[s] || c.states[s].halt)
            continue;
        auto f = dm.bound[s];
        if (!f)
            error("latency violation: state \"" + c.states[s].id +
                  "\" can avoid checkpoints forever");
        else if (static_cast<std::int64_t>(*f) > p.latency_bound)
            error("latency violation: state \"" + c.states[s].id + "\" drains in " +
                  std::to_string(*f) + " > bound " + std::to_string(p.latency_bound));
    }

    LivenessMap lm = live_registers(c);
    for (const std::string& id : p.checkpoints) {
        auto idx = state_index(c, id);
        auto expect = live_register_ids(c, lm, *idx);
        auto it = p.live.find(id);
        if (it == p.live.end())
            error("missing live-register list for checkpoint \"" + id + "\"");
        else if (it->second != expect)
            error("live-register list for checkpoint \"" + id + "\" does not match analysis");
    }
    for (const auto& [state, _] : p.live)
        if (!cp_set.count(state))
            error("live-register list for non-checkpoint state \"" + state + "\"");

    OverheadReport expect = plan_overhead(c, cp_set);
    if (p.overhead.union_bits != expect.union_bits ||
        p.overhead.state_bits != expect.state_bits ||
        p.overhead.max_context_bits != expect.max_context_bits ||
        p.overhead.checkpoint_count != expect.checkpoint_count)
        error("overhead report does not match analysis");

    if (p.plan_digest != fnv1a64(plan_canonical_prefix_text(p)))
        error("plan digest mismatch: plan was modified after generation");
    return diags;
}

std::string plan_to_text(const CheckpointPlan& p) {
    json j = json::parse(plan_canonical_prefix_text(p));
    j["plan_digest"] = to_hex16(p.plan_digest);
    return j.dump();
}

CheckpointPlan parse_plan(std::string_view text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("plan syntax error: ") + e.what(),
                         e.byte > 0 ? e.byte - 1 : 0);
    }
    if (!root.is_object())
        throw ParseError("plan file must be a JSON object");
    for (const auto& [key, _] : root.items()) {
        static const std::set<std::string> allowed{"circuit_digest", "latency_bound",
                                                   "checkpoints", "live", "overhead",
                                                   "plan_digest"};
        if (!allowed.count(key))
            throw ParseError("unknown key \"" + key + "\" in plan");
    }
    CheckpointPlan p;
    try {
        p.circuit_digest =
            parse_hex16(root.at("circuit_digest").get<std::string>(), "circuit_digest");
        p.plan_digest = parse_hex16(root.at("plan_digest").get<std::string>(), "plan_digest");
        p.latency_bound = root.at("latency_bound").get<std::int64_t>();
        p.checkpoints = root.at("checkpoints").get<std::vector<std::string>>();
        for (const auto& [state, regs] : root.at("live").items())
            p.live[state] = regs.get<std::vector<std::string>>();
        const json& o = root.at("overhead");
        p.overhead.union_bits = o.at("union_bits").get<std::uint64_t>();
        p.overhead.state_bits = o.at("state_bits").get<std::uint32_t>();
        p.overhead.max_context_bits = o.at("max_context_bits").get<std::uint64_t>();
        p.overhead.checkpoint_count = o.at("checkpoint_count").get<std::uint32_t>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed plan: ") + e.what());
    }
    return p;
}

} // namespace ctxs
