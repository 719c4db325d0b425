#include "kflow/model.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "kflow/protocols.hpp"
#include "kflow/rules.hpp"

namespace kflow {

std::vector<int> Scenario::honest_indices() const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(principals.size()); ++i)
        if (principals[i].role == Role::Honest) out.push_back(i);
    return out;
}

bool OscarState::drawn(ValueHandle v) const {
    return std::binary_search(draws.begin(), draws.end(), v);
}

HandleSet OscarState::known_sorted() const {
    HandleSet out(known.begin(), known.end());
    std::sort(out.begin(), out.end());
    return out;
}

std::size_t Universe::values_per_session(int sessions) const {
    if (sessions <= 0) return 0;
    std::size_t non_base = values.size() - base_count;
    return (non_base + sessions - 1) / sessions;
}

// --- Full-state semantics -----------------------------------------------------

FullState simulate_full(const std::vector<FullRule>& rules, const FullState& k0, int steps) {
    FullState k = k0;
    for (int i = 0; i < steps; ++i) {
        FullState next = k;
        for (const auto& r : rules) {
            if (!k.count({r.speaker, r.value})) continue;
            bool sat = true;
            for (const auto& pr : r.premises)
                if (!k.count(pr)) {
                    sat = false;
                    break;
                }
            if (sat) next.insert({r.listener, r.value});
        }
        if (next == k) break;
        k.swap(next);
    }
    return k;
}

FullState simulate_full_fixpoint(const std::vector<FullRule>& rules, const FullState& k0) {
    FullState k = k0;
    for (;;) {
        FullState next = simulate_full(rules, k, 1);
        if (next == k) return k;
        k.swap(next);
    }
}

MergeResult merge(int principal_count, const std::vector<FullRule>& rules,
                  const FullState& initial, const std::set<int>& adversaries) {
    if (adversaries.empty()) throw Error("merge requires a non-empty adversary set");
    MergeResult out;
    out.principal_map.assign(principal_count, -1);
    int next = 0;
    for (int i = 0; i < principal_count; ++i)
        if (!adversaries.count(i)) out.principal_map[i] = next++;
    out.oscar = next;
    for (int a : adversaries) out.principal_map[a] = out.oscar;
    out.merged_count = next + 1;

    for (const auto& r : rules) {
        FullRule m;
        m.speaker = out.principal_map[r.speaker];
        m.value = r.value;
        m.listener = out.principal_map[r.listener];
        for (const auto& [p, v] : r.premises) m.premises.emplace_back(out.principal_map[p], v);
        std::sort(m.premises.begin(), m.premises.end());
        m.premises.erase(std::unique(m.premises.begin(), m.premises.end()), m.premises.end());
        // Merging can turn a rule into an adversary self-rule; those do not
        // affect the flow and are dropped.
        if (m.speaker == out.oscar && m.listener == out.oscar) continue;
        out.rules.push_back(std::move(m));
    }
    for (const auto& [p, v] : initial) out.state.insert({out.principal_map[p], v});
    return out;
}

// --- Scenario ---------------------------------------------------------------------

Scenario make_scenario(ValueTable& table, const ProtocolSpec& spec, int honest_count,
                       int sessions) {
    if (honest_count < 1 || honest_count > 26) throw Error("honest principal count out of range");
    if (sessions < 1) throw Error("session count must be positive");
    Scenario sc;
    sc.table = &table;
    sc.sessions = sessions;
    sc.options = spec.options;
    sc.protocol = spec.name;

    auto add_principal = [&](const std::string& name, Role role) {
        Principal p;
        p.name = name;
        p.role = role;
        p.identity = table.atom(name, AtomKind::Identity);
        std::vector<ValueHandle> owned{p.identity};
        for (const auto& decl : spec.principal_atoms) {
            ValueHandle a = table.atom(decl.name + "#" + name, decl.kind);
            p.atoms.emplace(decl.name, a);
            owned.push_back(a);
        }
        if (role == Role::Oscar) {
            for (const auto& decl : spec.oscar_atoms) {
                ValueHandle a = table.atom(decl.name + "#" + name, decl.kind);
                p.atoms.emplace(decl.name, a);
                owned.push_back(a);
            }
        }
        p.owns = make_handle_set(std::move(owned));
        sc.principals.push_back(std::move(p));
    };

    for (int i = 0; i < honest_count; ++i)
        add_principal(std::string(1, static_cast<char>('A' + i)), Role::Honest);
    add_principal("Oscar", Role::Oscar);
    sc.oscar = honest_count;

    sc.session_atoms.resize(sessions);
    for (int s = 0; s < sessions; ++s)
        for (const auto& decl : spec.session_atoms)
            sc.session_atoms[s].emplace(decl.name,
                                        table.atom(decl.name + "#" + std::to_string(s + 1), decl.kind));
    return sc;
}

// --- Binding enumeration ---------------------------------------------------------

namespace {

std::vector<RoleBinding> per_session_bindings(const ProtocolSpec& spec, const Scenario& sc) {
    std::vector<RoleBinding> out;
    RoleBinding cur(spec.roles.size(), -1);
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
        if (i == spec.roles.size()) {
            out.push_back(cur);
            return;
        }
        for (int p = 0; p < static_cast<int>(sc.principals.size()); ++p) {
            if (spec.roles[i].range == PrincipalRange::Honest &&
                sc.principals[p].role != Role::Honest)
                continue;
            cur[i] = p;
            rec(i + 1);
        }
    };
    rec(0);
    return out;
}

}  // namespace

std::vector<BindingSet> enumerate_binding_sets(const ProtocolSpec& spec, const Scenario& scenario) {
    std::vector<RoleBinding> per_session = per_session_bindings(spec, scenario);
    if (per_session.empty()) return {BindingSet(scenario.sessions, RoleBinding{})};

    // Sessions are unordered (the universe is a union), so enumerate
    // non-decreasing index sequences.
    std::vector<BindingSet> sets;
    std::vector<std::size_t> idx(scenario.sessions, 0);
    std::function<void(int, std::size_t)> rec = [&](int s, std::size_t from) {
        if (s == scenario.sessions) {
            BindingSet b;
            for (auto i : idx) b.push_back(per_session[i]);
            sets.push_back(std::move(b));
            return;
        }
        for (std::size_t i = from; i < per_session.size(); ++i) {
            idx[s] = i;
            rec(s + 1, i);
        }
    };
    rec(0, 0);

    // Dedup by renaming symmetry over honest principals.
    std::vector<int> honest = scenario.honest_indices();
    if (honest.size() > 6) return sets;  // permutation dedup gets too wide
    std::vector<int> perm(honest.begin(), honest.end());
    std::vector<BindingSet> kept;
    for (const auto& bset : sets) {
        BindingSet canon = bset;
        std::sort(canon.begin(), canon.end());
        std::vector<int> p = perm;
        bool minimal = true;
        do {
            std::vector<int> map(scenario.principals.size());
            std::iota(map.begin(), map.end(), 0);
            for (std::size_t i = 0; i < honest.size(); ++i) map[honest[i]] = p[i];
            BindingSet renamed;
            for (const auto& rb : bset) {
                RoleBinding nb;
                for (int pr : rb) nb.push_back(map[pr]);
                renamed.push_back(std::move(nb));
            }
            std::sort(renamed.begin(), renamed.end());
            if (renamed < canon) {
                minimal = false;
                break;
            }
        } while (std::next_permutation(p.begin(), p.end()));
        if (minimal) kept.push_back(bset);
    }
    return kept;
}

// --- Universe construction ----------------------------------------------------------

Universe build_universe_impl(ValueTable& table, const Scenario& scenario, const ProtocolSpec& spec,
                             const BindingSet& bindings, std::size_t max_values,
                             std::vector<RuleSchema>* expanded_out) {
    if (static_cast<int>(bindings.size()) != scenario.sessions)
        throw Error("binding set size must equal the session count");

    Universe u;
    u.table = &table;
    u.by_kind.resize(6);
    std::vector<std::string> role_names;
    for (const auto& r : spec.roles) role_names.push_back(r.name);

    HandleSet pending;
    auto stage = [&](ValueHandle v, int session, const std::string& why) {
        for (auto s : table.subterms(v)) {
            if (u.lookup.count(s)) continue;
            pending.push_back(s);
            u.lookup.insert(s);
            u.provenance.emplace(s, std::make_pair(session, why));
        }
    };
    auto commit = [&]() {
        for (auto v : pending) {
            u.values.push_back(v);
            u.by_kind[static_cast<std::size_t>(table.kind_of(v))].push_back(v);
        }
        pending.clear();
        std::sort(u.values.begin(), u.values.end());
        for (auto& k : u.by_kind) std::sort(k.begin(), k.end());
        if (u.values.size() > max_values)
            throw UniverseOverflow("universe exceeds " + std::to_string(max_values) + " values");
    };

    // Base atoms: identities, per-principal atoms, Oscar's atoms, session atoms.
    for (const auto& p : scenario.principals) {
        stage(p.identity, -1, "base");
        for (const auto& [name, a] : p.atoms) stage(a, -1, "base");
    }
    for (int s = 0; s < scenario.sessions; ++s)
        for (const auto& [name, a] : scenario.session_atoms[s]) stage(a, s, "base");

    // Declared per-principal values (e.g. server-shared keys).
    for (const auto& decl : spec.principal_values) {
        for (int p = 0; p < static_cast<int>(scenario.principals.size()); ++p) {
            Bindings b;
            b.self_owner = p;
            stage(instantiate_template(decl.tmpl, b, table, scenario), -1, decl.name);
        }
    }
    commit();
    u.base_count = u.values.size();

    // Declared per-session values (intended-run composites).
    std::vector<std::map<std::string, ValueHandle>> session_values(scenario.sessions);
    for (int s = 0; s < scenario.sessions; ++s) {
        for (const auto& decl : spec.session_values) {
            Template expanded = expand_template_for_session(decl.tmpl, role_names, bindings[s],
                                                            scenario, s, session_values[s]);
            Bindings b;
            ValueHandle v = instantiate_template(expanded, b, table, scenario);
            session_values[s].emplace(decl.name, v);
            stage(v, s, decl.name);
        }
    }
    commit();

    // Expand schemas: session-anchored ones once per session, global ones once.
    struct Expanded {
        std::size_t chain;  // position in the protocol's schema list
        int session;        // -1 for global
        RuleSchema schema;
    };
    std::vector<Expanded> expanded;
    for (std::size_t i = 0; i < spec.schemas.size(); ++i) {
        const RuleSchema& s = spec.schemas[i];
        if (s.session_anchored()) {
            for (int sess = 0; sess < scenario.sessions; ++sess)
                expanded.push_back({i, sess,
                                    expand_protocol_schema(s, role_names, scenario, bindings[sess],
                                                           session_values[sess], sess)});
        } else {
            expanded.push_back({i, -1, s});
        }
    }
    if (expanded_out) {
        expanded_out->clear();
        for (const auto& e : expanded) expanded_out->push_back(e.schema);
    }

    // Mention closure: every value an instantiated schema can mention, with
    // free value variables ranging over the previous round's universe.
    // Schema k joins from round k on; one round per schema in total.
    std::size_t rounds = spec.schemas.size();
    for (std::size_t round = 1; round <= rounds; ++round) {
        HandleSet snapshot = u.values;
        for (const auto& e : expanded) {
            if (e.chain + 1 > round) continue;
            const RuleSchema& s = e.schema;
            Bindings base;
            std::vector<std::string> vvars = s.vvars;

            // Per-variable domains narrowed by the schema's direct kind
            // guards, and guards scheduled as soon as their variables bind.
            std::vector<HandleSet> domains(vvars.size());
            for (std::size_t vi = 0; vi < vvars.size(); ++vi) {
                SortCheck sort = SortCheck::AnyValue;
                for (const auto& g : s.guards)
                    if (g.kind == Guard::Kind::KindIs && g.path.steps.empty() &&
                        g.path.var == vvars[vi])
                        sort = g.sort;
                if (sort == SortCheck::AnyValue) {
                    domains[vi] = snapshot;
                } else {
                    Bindings probe;
                    for (auto v : snapshot) {
                        probe.set_value("@", v);
                        Guard chk;
                        chk.kind = Guard::Kind::KindIs;
                        chk.path.var = "@";
                        chk.sort = sort;
                        if (eval_guard(chk, probe, scenario, nullptr)) domains[vi].push_back(v);
                    }
                }
            }
            std::function<void(const Guard&, std::vector<std::string>&)> vars_of_guard =
                [&](const Guard& g, std::vector<std::string>& out) {
                    if (!g.path.var.empty()) out.push_back(g.path.var);
                    if (!g.other.var.empty()) out.push_back(g.other.var);
                    for (const auto& i : g.inner) vars_of_guard(i, out);
                };
            std::vector<std::vector<Guard>> due(vvars.size() + 1);
            for (const auto& g : s.guards) {
                std::vector<std::string> used;
                vars_of_guard(g, used);
                std::size_t last = 0;
                for (const auto& name : used)
                    for (std::size_t vi = 0; vi < vvars.size(); ++vi)
                        if (vvars[vi] == name) last = std::max(last, vi + 1);
                due[last].push_back(g);
            }

            std::function<void(std::size_t, Bindings&)> enum_vvars = [&](std::size_t vi,
                                                                         Bindings& b) {
                for (const auto& g : due[vi])
                    if (!eval_guard(g, b, scenario, nullptr)) return;
                if (vi == vvars.size()) {
                    for (const auto& prem : s.premises)
                        stage(instantiate_template(prem, b, table, scenario), e.session, s.label);
                    stage(instantiate_template(s.conclusion, b, table, scenario), e.session,
                          s.label);
                    return;
                }
                for (auto v : domains[vi]) {
                    b.set_value(vvars[vi], v);
                    enum_vvars(vi + 1, b);
                }
                b.erase_value(vvars[vi]);
            };
            // Principal variables range over the scenario.
            std::function<void(std::size_t, Bindings&)> enum_pvars = [&](std::size_t pi,
                                                                        Bindings& b) {
                if (pi == s.pvars.size()) {
                    enum_vvars(0, b);
                    return;
                }
                for (int p = 0; p < static_cast<int>(scenario.principals.size()); ++p) {
                    if (s.pvars[pi].second == PrincipalRange::Honest &&
                        scenario.principals[p].role != Role::Honest)
                        continue;
                    b.set_principal(s.pvars[pi].first, p);
                    enum_pvars(pi + 1, b);
                }
                b.erase_principal(s.pvars[pi].first);
            };
            enum_pvars(0, base);
        }
        commit();
    }
    return u;
}

Universe build_universe(ValueTable& table, const Scenario& scenario, const ProtocolSpec& spec,
                        const BindingSet& bindings, std::size_t max_values) {
    return build_universe_impl(table, scenario, spec, bindings, max_values, nullptr);
}

// --- Oscar's initial state ------------------------------------------------------------

OscarState initial_oscar_state(const Scenario& scenario, const Universe& universe,
                               const ProtocolSpec& spec) {
    OscarState st;

    auto secret_per_atom = [&](const std::string& decl) {
        for (const auto& d : spec.principal_atoms)
            if (d.name == decl) return d.secret;
        return false;
    };
    auto secret_session_atom = [&](const std::string& decl) {
        for (const auto& d : spec.session_atoms)
            if (d.name == decl) return d.secret;
        return false;
    };

    std::unordered_set<ValueHandle> excluded;
    for (const auto& p : scenario.principals) {
        if (p.role != Role::Honest) continue;
        if (spec.secret_identities) excluded.insert(p.identity);
        for (const auto& [decl, a] : p.atoms)
            if (secret_per_atom(decl)) excluded.insert(a);
    }
    for (const auto& sess : scenario.session_atoms)
        for (const auto& [decl, a] : sess)
            if (secret_session_atom(decl)) excluded.insert(a);

    std::vector<ValueHandle> draws;
    for (auto v : universe.of_kind(ValueKind::Atom))
        if (!excluded.count(v)) draws.push_back(v);
    st.draws = make_handle_set(std::move(draws));
    st.known.insert(st.draws.begin(), st.draws.end());
    return st;
}

}  // namespace kflow
