// SPDX-License-Identifier: Apache-2.0
#include "ctxs/circuit.hpp"

#include "ctxs/errors.hpp"
#include "ctxs/hash.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <deque>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace ctxs {

namespace {

using nlohmann::json;

bool valid_identifier(std::string_view s) {
    if (s.empty() || s == "ELSE")
        return false;
    if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_')
        return false;
    return std::all_of(s.begin() + 1, s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    });
}

void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                         const std::string& where) {
    for (const auto& [key, _] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ParseError("unknown key \"" + key + "\" in " + where);
    }
}

const json& require(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end())
        throw ParseError("missing \"" + std::string(key) + "\" in " + where);
    return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
    const json& v = require(obj, key, where);
    if (!v.is_string())
        throw ParseError("\"" + std::string(key) + "\" must be a string in " + where);
    return v.get<std::string>();
}

std::uint32_t require_width(const json& obj, const std::string& where) {
    const json& v = require(obj, "width", where);
    if (!v.is_number_unsigned())
        throw ParseError("\"width\" must be an unsigned integer in " + where);
    std::uint64_t w = v.get<std::uint64_t>();
    if (w < 1 || w > 64)
        throw ParseError("width out of range (1..64) in " + where);
    return static_cast<std::uint32_t>(w);
}

// Registers, ports, and states share one identifier namespace so that
// expression references are never ambiguous.
class IdTable {
public:
    void add(const std::string& id, const std::string& what) {
        if (!valid_identifier(id))
            throw ParseError("invalid identifier \"" + id + "\" for " + what);
        if (!seen_.insert(id).second)
            throw ParseError("duplicate id \"" + id + "\" (" + what + ")");
    }

private:
    std::unordered_set<std::string> seen_;
};

std::vector<Port> parse_ports(const json& arr, const char* key, IdTable& ids) {
    if (!arr.is_array())
        throw ParseError(std::string("\"") + key + "\" must be an array");
    std::vector<Port> out;
    for (const json& p : arr) {
        if (!p.is_object())
            throw ParseError(std::string("entries of \"") + key + "\" must be objects");
        std::string where = std::string(key) + " entry";
        reject_unknown_keys(p, {"id", "width"}, where);
        Port port;
        port.id = require_string(p, "id", where);
        port.width = require_width(p, where);
        ids.add(port.id, std::string(key) + " port");
        out.push_back(std::move(port));
    }
    return out;
}

StateDef parse_state(const json& s, const Circuit& c, const std::vector<std::string>& reg_ids,
                     IdTable& ids) {
    if (!s.is_object())
        throw ParseError("entries of \"states\" must be objects");
    StateDef st;
    st.id = require_string(s, "id", "state");
    const std::string where = "state \"" + st.id + "\"";
    reject_unknown_keys(s, {"id", "reads", "assignments", "emissions", "transitions", "halt"},
                        where);
    ids.add(st.id, "state");

    if (auto it = s.find("halt"); it != s.end()) {
        if (!it->is_boolean())
            throw ParseError("\"halt\" must be a boolean in " + where);
        st.halt = it->get<bool>();
    }

    std::vector<std::string> read_names;
    if (auto it = s.find("reads"); it != s.end()) {
        if (!it->is_array())
            throw ParseError("\"reads\" must be an array in " + where);
        for (const json& r : *it) {
            if (!r.is_string())
                throw ParseError("\"reads\" entries must be port ids in " + where);
            std::string id = r.get<std::string>();
            auto port = std::find_if(c.inputs.begin(), c.inputs.end(),
                                     [&](const Port& p) { return p.id == id; });
            if (port == c.inputs.end())
                throw ParseError("unknown reference: input port \"" + id + "\" in " + where);
            st.reads.push_back(static_cast<std::uint32_t>(port - c.inputs.begin()));
            read_names.push_back(std::move(id));
        }
    }

    ExprScope scope{reg_ids, read_names};
    auto parse_in_scope = [&](const std::string& text, const char* what) {
        try {
            return parse_expr(text, scope);
        } catch (const ParseError& e) {
            throw ParseError(std::string(e.what()) + " in " + what + " of " + where, e.offset());
        }
    };

    if (auto it = s.find("assignments"); it != s.end()) {
        if (!it->is_array())
            throw ParseError("\"assignments\" must be an array in " + where);
        for (const json& a : *it) {
            if (!a.is_object())
                throw ParseError("\"assignments\" entries must be objects in " + where);
            reject_unknown_keys(a, {"target", "expr"}, "assignment in " + where);
            Assignment as;
            std::string target = require_string(a, "target", "assignment in " + where);
            auto reg = std::find(reg_ids.begin(), reg_ids.end(), target);
            if (reg == reg_ids.end())
                throw ParseError("unknown reference: register \"" + target + "\" in " + where);
            as.target = static_cast<std::uint32_t>(reg - reg_ids.begin());
            as.value =
                parse_in_scope(require_string(a, "expr", "assignment in " + where), "assignment");
            st.assignments.push_back(std::move(as));
        }
    }

    if (auto it = s.find("emissions"); it != s.end()) {
        if (!it->is_array())
            throw ParseError("\"emissions\" must be an array in " + where);
        for (const json& e : *it) {
            if (!e.is_object())
                throw ParseError("\"emissions\" entries must be objects in " + where);
            reject_unknown_keys(e, {"port", "expr"}, "emission in " + where);
            Emission em;
            std::string port = require_string(e, "port", "emission in " + where);
            auto out = std::find_if(c.outputs.begin(), c.outputs.end(),
                                    [&](const Port& p) { return p.id == port; });
            if (out == c.outputs.end())
                throw ParseError("unknown reference: output port \"" + port + "\" in " + where);
            em.port = static_cast<std::uint32_t>(out - c.outputs.begin());
            em.value =
                parse_in_scope(require_string(e, "expr", "emission in " + where), "emission");
            st.emissions.push_back(std::move(em));
        }
    }

    if (auto it = s.find("transitions"); it != s.end()) {
        if (!it->is_array())
            throw ParseError("\"transitions\" must be an array in " + where);
        for (const json& t : *it) {
            if (!t.is_object())
                throw ParseError("\"transitions\" entries must be objects in " + where);
            reject_unknown_keys(t, {"guard", "target"}, "transition in " + where);
            Transition tr;
            tr.target = require_string(t, "target", "transition in " + where);
            std::string guard = require_string(t, "guard", "transition in " + where);
            if (guard != "ELSE")
                tr.guard = parse_in_scope(guard, "guard");
            st.transitions.push_back(std::move(tr));
        }
    }

    if (st.halt) {
        if (!st.transitions.empty())
            throw ParseError("halt state must have no transitions: " + where);
    } else {
        if (st.transitions.empty())
            throw ParseError("missing ELSE: non-halt " + where + " needs a trailing ELSE transition");
        for (std::size_t i = 0; i < st.transitions.size(); ++i) {
            bool is_else = st.transitions[i].guard == nullptr;
            bool is_last = i + 1 == st.transitions.size();
            if (is_else && !is_last)
                throw ParseError("ELSE must be the last transition in " + where);
            if (!is_else && is_last)
                throw ParseError("missing ELSE: last transition of " + where + " must be ELSE");
        }
    }
    return st;
}

bool expr_well_formed(const Expr& e, const Circuit& c, const StateDef& st) {
    switch (e.op) {
    case ExprOp::Const:
        return true;
    case ExprOp::Var:
        if (e.var_kind == VarKind::Register)
            return e.var_index < c.registers.size() && c.registers[e.var_index].id == e.name;
        return e.var_index < st.reads.size() && st.reads[e.var_index] < c.inputs.size() &&
               c.inputs[st.reads[e.var_index]].id == e.name;
    default:
        return e.lhs && e.rhs && expr_well_formed(*e.lhs, c, st) && expr_well_formed(*e.rhs, c, st);
    }
}

json canonical_json(const Circuit& c) {
    json root;
    root["name"] = c.name;
    root["initial"] = c.initial;
    json regs = json::array();
    for (const Register& r : c.registers)
        regs.push_back({{"id", r.id}, {"width", r.width}});
    root["registers"] = std::move(regs);
    auto ports = [](const std::vector<Port>& v) {
        json arr = json::array();
        for (const Port& p : v)
            arr.push_back({{"id", p.id}, {"width", p.width}});
        return arr;
    };
    root["inputs"] = ports(c.inputs);
    root["outputs"] = ports(c.outputs);
    json states = json::array();
    for (const StateDef& st : c.states) {
        json s;
        s["id"] = st.id;
        s["halt"] = st.halt;
        json reads = json::array();
        for (std::uint32_t r : st.reads)
            reads.push_back(c.inputs[r].id);
        s["reads"] = std::move(reads);
        json assigns = json::array();
        for (const Assignment& a : st.assignments)
            assigns.push_back({{"target", c.registers[a.target].id}, {"expr", render_expr(*a.value)}});
        s["assignments"] = std::move(assigns);
        json emits = json::array();
        for (const Emission& e : st.emissions)
            emits.push_back({{"port", c.outputs[e.port].id}, {"expr", render_expr(*e.value)}});
        s["emissions"] = std::move(emits);
        json trans = json::array();
        for (const Transition& t : st.transitions)
            trans.push_back(
                {{"guard", t.guard ? render_expr(*t.guard) : "ELSE"}, {"target", t.target}});
        s["transitions"] = std::move(trans);
        states.push_back(std::move(s));
    }
    root["states"] = std::move(states);
    return root;
}

} // namespace

bool has_errors(const std::vector<Diagnostic>& diags) {
    return std::any_of(diags.begin(), diags.end(), [](const Diagnostic& d) {
        return d.severity == Diagnostic::Severity::Error;
    });
}

Circuit parse_circuit(std::string_view text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("circuit syntax error: ") + e.what(),
                         e.byte > 0 ? e.byte - 1 : 0);
    }
    if (!root.is_object())
        throw ParseError("circuit file must be a JSON object");
    reject_unknown_keys(root, {"name", "registers", "inputs", "outputs", "states", "initial"},
                        "circuit");

    Circuit c;
    c.name = require_string(root, "name", "circuit");
    if (!valid_identifier(c.name))
        throw ParseError("invalid circuit name \"" + c.name + "\"");
    c.initial = require_string(root, "initial", "circuit");

    IdTable ids;
    const json& regs = require(root, "registers", "circuit");
    if (!regs.is_array())
        throw ParseError("\"registers\" must be an array");
    for (const json& r : regs) {
        if (!r.is_object())
            throw ParseError("entries of \"registers\" must be objects");
        reject_unknown_keys(r, {"id", "width"}, "register");
        Register reg;
        reg.id = require_string(r, "id", "register");
        reg.width = require_width(r, "register \"" + reg.id + "\"");
        ids.add(reg.id, "register");
        c.registers.push_back(std::move(reg));
    }
    c.inputs = parse_ports(require(root, "inputs", "circuit"), "inputs", ids);
    c.outputs = parse_ports(require(root, "outputs", "circuit"), "outputs", ids);

    std::vector<std::string> reg_ids;
    reg_ids.reserve(c.registers.size());
    for (const Register& r : c.registers)
        reg_ids.push_back(r.id);

    const json& states = require(root, "states", "circuit");
    if (!states.is_array())
        throw ParseError("\"states\" must be an array");
    if (states.empty())
        throw ParseError("no states");
    for (const json& s : states)
        c.states.push_back(parse_state(s, c, reg_ids, ids));
    return c;
}

std::vector<Diagnostic> validate_circuit(const Circuit& c) {
    std::vector<Diagnostic> diags;
    auto error = [&](std::string msg) {
        diags.push_back({Diagnostic::Severity::Error, std::move(msg)});
    };
    auto warning = [&](std::string msg) {
        diags.push_back({Diagnostic::Severity::Warning, std::move(msg)});
    };

    if (c.states.empty()) {
        error("no states");
        return diags;
    }

    std::unordered_set<std::string> ids;
    auto check_id = [&](const std::string& id, const char* what) {
        if (!valid_identifier(id))
            error(std::string("invalid identifier \"") + id + "\" for " + what);
        else if (!ids.insert(id).second)
            error("duplicate id \"" + id + "\" (" + what + ")");
    };
    for (const Register& r : c.registers) {
        check_id(r.id, "register");
        if (r.width < 1 || r.width > 64)
            error("register \"" + r.id + "\" width out of range (1..64)");
    }
    for (const Port& p : c.inputs) {
        check_id(p.id, "input port");
        if (p.width < 1 || p.width > 64)
            error("input port \"" + p.id + "\" width out of range (1..64)");
    }
    for (const Port& p : c.outputs) {
        check_id(p.id, "output port");
        if (p.width < 1 || p.width > 64)
            error("output port \"" + p.id + "\" width out of range (1..64)");
    }
    for (const StateDef& st : c.states)
        check_id(st.id, "state");

    for (const StateDef& st : c.states) {
        const std::string where = "state \"" + st.id + "\"";
        for (std::uint32_t r : st.reads)
            if (r >= c.inputs.size())
                error("read of undeclared input port in " + where);
        for (const Assignment& a : st.assignments) {
            if (a.target >= c.registers.size())
                error("assignment to undeclared register in " + where);
            if (!a.value || !expr_well_formed(*a.value, c, st))
                error("malformed assignment expression in " + where);
        }
        for (const Emission& e : st.emissions) {
            if (e.port >= c.outputs.size())
                error("emission to undeclared output port in " + where);
            if (!e.value || !expr_well_formed(*e.value, c, st))
                error("malformed emission expression in " + where);
        }
        if (st.halt) {
            if (!st.transitions.empty())
                error("halt " + where + " must have no transitions");
        } else {
            if (st.transitions.empty())
                error("missing ELSE in non-halt " + where);
            for (std::size_t i = 0; i < st.transitions.size(); ++i) {
                const Transition& t = st.transitions[i];
                bool is_else = t.guard == nullptr;
                bool is_last = i + 1 == st.transitions.size();
                if (is_else != is_last)
                    error(is_else ? "ELSE must be last in " + where
                                  : "missing trailing ELSE in " + where);
                if (t.guard && !expr_well_formed(*t.guard, c, st))
                    error("malformed guard expression in " + where);
            }
        }
        for (const Transition& t : st.transitions)
            if (!state_index(c, t.target))
                error("dangling target \"" + t.target + "\" in " + where);
    }

    if (!state_index(c, c.initial)) {
        error("initial state \"" + c.initial + "\" does not exist");
    } else {
        std::vector<bool> reach = reachable_states(c);
        for (std::size_t i = 0; i < c.states.size(); ++i)
            if (!reach[i])
                warning("unreachable state \"" + c.states[i].id + "\"");
    }
    return diags;
}

std::string canonical_text(const Circuit& c) {
    return canonical_json(c).dump();
}

std::uint64_t circuit_hash(const Circuit& c) {
    return fnv1a64(canonical_text(c));
}

std::vector<bool> reachable_states(const Circuit& c) {
    std::vector<bool> reach(c.states.size(), false);
    auto start = state_index(c, c.initial);
    if (!start)
        return reach;
    std::deque<std::uint32_t> queue{*start};
    reach[*start] = true;
    while (!queue.empty()) {
        std::uint32_t s = queue.front();
        queue.pop_front();
        for (const Transition& t : c.states[s].transitions) {
            auto tgt = state_index(c, t.target);
            if (tgt && !reach[*tgt]) {
                reach[*tgt] = true;
                queue.push_back(*tgt);
            }
        }
    }
    return reach;
}

std::optional<std::uint32_t> state_index(const Circuit& c, std::string_view id) {
    for (std::size_t i = 0; i < c.states.size(); ++i)
        if (c.states[i].id == id)
            return static_cast<std::uint32_t>(i);
    return std::nullopt;
}

std::optional<std::uint32_t> register_index(const Circuit& c, std::string_view id) {
    for (std::size_t i = 0; i < c.registers.size(); ++i)
        if (c.registers[i].id == id)
            return static_cast<std::uint32_t>(i);
    return std::nullopt;
}

} // namespace ctxs
