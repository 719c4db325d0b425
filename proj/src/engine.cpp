#include "kflow/engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <thread>
#include <unordered_map>

namespace kflow {

namespace {

std::string rule_order_key(const GroundRule& r, const ValueTable& table) {
    std::vector<std::string> prem;
    prem.reserve(r.premises.size());
    for (auto p : r.premises) prem.push_back(table.render(p));
    std::sort(prem.begin(), prem.end());
    std::string key = r.label;
    key += '\x01';
    for (auto& p : prem) {
        key += p;
        key += '\x02';
    }
    key += table.render(r.conclusion);
    return key;
}

/// Indices sorted by (label, premise rendering, conclusion rendering); this
/// fixes which rule a learns entry records when several fire in one round.
std::vector<std::size_t> deterministic_rule_order(const std::vector<GroundRule>& rules,
                                                  const ValueTable& table) {
    std::vector<std::pair<std::string, std::size_t>> keyed;
    keyed.reserve(rules.size());
    for (std::size_t i = 0; i < rules.size(); ++i)
        keyed.emplace_back(rule_order_key(rules[i], table), i);
    std::sort(keyed.begin(), keyed.end());
    std::vector<std::size_t> order;
    order.reserve(keyed.size());
    for (auto& [k, i] : keyed) order.push_back(i);
    return order;
}

}  // namespace

OscarState step(const OscarState& state, const std::vector<GroundRule>& rules,
                const ValueTable& table) {
    OscarState next = state;
    std::vector<std::size_t> order = deterministic_rule_order(rules, table);
    for (std::size_t i : order) {
        const GroundRule& r = rules[i];
        bool sat = true;
        for (auto p : r.premises)
            if (!state.knows(p)) {
                sat = false;
                break;
            }
        if (!sat) continue;
        if (next.known.insert(r.conclusion).second && !next.drawn(r.conclusion))
            next.learns.emplace(r.conclusion, LearnEntry{r.premises, r.label});
    }
    return next;
}

OscarState saturate(OscarState state, const std::vector<GroundRule>& rules,
                    const ValueTable& table) {
    std::vector<std::size_t> order = deterministic_rule_order(rules, table);
    std::vector<std::size_t> rank(rules.size());
    for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = i;

    // remaining unknown premises per rule; premise -> dependent rules
    std::vector<std::size_t> remaining(rules.size());
    std::unordered_map<ValueHandle, std::vector<std::size_t>> by_premise;
    for (std::size_t i = 0; i < rules.size(); ++i) {
        std::size_t rem = 0;
        for (auto p : rules[i].premises)
            if (!state.knows(p)) {
                ++rem;
                by_premise[p].push_back(i);
            }
        remaining[i] = rem;
    }

    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < rules.size(); ++i)
        if (remaining[i] == 0) ready.push_back(i);

    while (!ready.empty()) {
        // One parallel round: fire everything currently ready, then admit the
        // rules unlocked by this round's conclusions.
        std::sort(ready.begin(), ready.end(),
                  [&](std::size_t a, std::size_t b) { return rank[a] < rank[b]; });
        std::vector<ValueHandle> fresh;
        for (std::size_t i : ready) {
            const GroundRule& r = rules[i];
            if (state.known.insert(r.conclusion).second) {
                if (!state.drawn(r.conclusion))
                    state.learns.emplace(r.conclusion, LearnEntry{r.premises, r.label});
                fresh.push_back(r.conclusion);
            }
        }
        ready.clear();
        for (auto v : fresh) {
            auto it = by_premise.find(v);
            if (it == by_premise.end()) continue;
            for (std::size_t ri : it->second)
                if (--remaining[ri] == 0) ready.push_back(ri);
        }
    }
    return state;
}

// --- Theorem checking ---------------------------------------------------------

namespace {

struct TheoremCtx {
    const TheoremSpec& thm;
    const Scenario& scenario;
    const Universe& universe;
    const OscarState& state;
    HandleSet knows_sorted;
    std::vector<HandleSet> var_domains;  // per explicit var, sort-filtered
    bool patterns_use_pvars = false;
};

bool theorem_sort_ok(ValueHandle v, SortCheck s, const ValueTable& t) {
    switch (s) {
        case SortCheck::AnyValue: return true;
        case SortCheck::Atomic: return t.kind_of(v) == ValueKind::Atom;
        case SortCheck::Identity:
            return t.kind_of(v) == ValueKind::Atom && t.as_atom(v).kind == AtomKind::Identity;
        case SortCheck::SeedAtom:
            return t.kind_of(v) == ValueKind::Atom && t.as_atom(v).kind == AtomKind::Seed;
        case SortCheck::Cipher: return t.kind_of(v) == ValueKind::Ciphertext;
        case SortCheck::NonceV: return t.kind_of(v) == ValueKind::Nonce;
        case SortCheck::HashVal: return t.kind_of(v) == ValueKind::HashV;
        case SortCheck::TupleVal: return t.kind_of(v) == ValueKind::Tuple;
        case SortCheck::Puf: return t.kind_of(v) == ValueKind::PufResponse;
    }
    return true;
}

bool search_matches(TheoremCtx& ctx, std::size_t mi, const Bindings& b, Bindings& found);
bool search_vars(TheoremCtx& ctx, std::size_t vi, const Bindings& b, Bindings& found);

// Principal variables feed only the guards (unless a pattern names one), so
// they are normally enumerated innermost and structural matching prunes
// first. `then_vars` marks the pvars-first ordering used when a pattern
// mentions a principal variable.
bool search_pvars(TheoremCtx& ctx, std::size_t pi, Bindings& b, Bindings& found,
                  bool then_vars) {
    if (pi == ctx.thm.pvars.size()) {
        if (then_vars) return search_vars(ctx, 0, b, found);
        for (const auto& g : ctx.thm.guards)
            if (!eval_guard(g, b, ctx.scenario, &ctx.state)) return false;
        found = b;
        return true;
    }
    const TheoremPVar& pv = ctx.thm.pvars[pi];
    for (int p = 0; p < static_cast<int>(ctx.scenario.principals.size()); ++p) {
        if (pv.range == PrincipalRange::Honest &&
            ctx.scenario.principals[p].role != Role::Honest)
            continue;
        b.set_principal(pv.name, p);
        if (search_pvars(ctx, pi + 1, b, found, then_vars)) return true;
        b.erase_principal(pv.name);
    }
    return false;
}

bool search_matches(TheoremCtx& ctx, std::size_t mi, const Bindings& b, Bindings& found) {
    if (mi == ctx.thm.matches.size()) {
        Bindings nb = b;
        return search_pvars(ctx, ctx.patterns_use_pvars ? ctx.thm.pvars.size() : 0, nb, found,
                            false);
    }
    const MatchClause& m = ctx.thm.matches[mi];
    const ValueHandle* it = b.find_value(m.var);
    if (!it) throw Error("theorem match on unbound variable " + m.var);
    std::vector<Bindings> exts;
    enumerate_template_matches(m.pattern, *it, b, ctx.scenario, exts);
    for (const auto& e : exts)
        if (search_matches(ctx, mi + 1, e, found)) return true;
    return false;
}

bool search_vars(TheoremCtx& ctx, std::size_t vi, const Bindings& b, Bindings& found) {
    if (vi == ctx.thm.vars.size()) return search_matches(ctx, 0, b, found);
    for (auto v : ctx.var_domains[vi]) {
        Bindings nb = b;
        nb.set_value(ctx.thm.vars[vi].name, v);
        if (search_vars(ctx, vi + 1, nb, found)) return true;
    }
    return false;
}

bool pattern_mentions_pvar(const Template& t) {
    if ((t.kind == Template::Kind::IdOf || t.kind == Template::Kind::PerAtom) &&
        t.principal.kind == PrincipalRef::Kind::Var)
        return true;
    for (const auto& c : t.children)
        if (pattern_mentions_pvar(c)) return true;
    return false;
}

}  // namespace

std::optional<Witness> check_theorem(const OscarState& state, const TheoremSpec& thm,
                                     const Scenario& scenario, const Universe& universe) {
    TheoremCtx ctx{thm, scenario, universe, state, state.known_sorted(), {}, false};
    for (const auto& m : thm.matches)
        ctx.patterns_use_pvars = ctx.patterns_use_pvars || pattern_mentions_pvar(m.pattern);
    for (const auto& var : thm.vars) {
        const HandleSet& domain =
            var.domain == VarDomain::Knows ? ctx.knows_sorted : universe.values;
        HandleSet filtered;
        for (auto v : domain)
            if (theorem_sort_ok(v, var.sort, *scenario.table)) filtered.push_back(v);
        ctx.var_domains.push_back(std::move(filtered));
    }
    Bindings b, found;
    bool hit = ctx.patterns_use_pvars ? search_pvars(ctx, 0, b, found, true)
                                      : search_vars(ctx, 0, b, found);
    if (!hit) return std::nullopt;
    Witness w;
    for (const auto& [name, v] : found.values) w.values.emplace_back(name, v);
    for (const auto& [name, p] : found.principals) w.principals.emplace_back(name, p);
    return w;
}

// --- Trace extraction ------------------------------------------------------------

AttackTrace extract_trace(const OscarState& state, const Witness& witness,
                          const ValueTable& table) {
    AttackTrace trace;
    trace.witness = witness;
    std::unordered_map<ValueHandle, bool> visited;
    std::function<void(ValueHandle)> visit = [&](ValueHandle v) {
        if (visited.count(v)) return;
        visited.emplace(v, true);
        if (state.drawn(v)) return;
        auto it = state.learns.find(v);
        if (it == state.learns.end())
            throw MissingDerivation("witness value " + table.render(v) +
                                    " has no derivation and is not drawn");
        for (auto p : it->second.premises) visit(p);
        trace.steps.push_back(TraceStep{v, it->second.premises, it->second.rule});
    };
    for (const auto& [name, v] : witness.values)
        if (state.knows(v)) visit(v);
    return trace;
}

// --- Analysis driver ----------------------------------------------------------------

PreparedRun prepare_run(const ProtocolSpec& spec, const AnalyzeConfig& cfg,
                        const BindingSet& bindings) {
    PreparedRun run;
    run.table = std::make_unique<ValueTable>();
    run.scenario = make_scenario(*run.table, spec, cfg.honest, cfg.sessions);
    run.bindings = bindings;
    std::vector<RuleSchema> expanded;
    run.universe =
        build_universe_impl(*run.table, run.scenario, spec, bindings, cfg.max_universe, &expanded);
    expanded.insert(expanded.end(), spec.primitives.begin(), spec.primitives.end());
    run.rules = ground_all(expanded, run.universe, run.scenario);
    run.initial = initial_oscar_state(run.scenario, run.universe, spec);
    run.table->freeze();
    return run;
}

namespace {

struct RunOutcome {
    bool attack = false;
    std::vector<std::pair<std::string, std::string>> witness;
    std::vector<Report::Step> trace;
    std::size_t universe_values = 0;
    std::size_t per_session_values = 0;
};

RunOutcome run_one(const ProtocolSpec& spec, const AnalyzeConfig& cfg, const BindingSet& bindings) {
    PreparedRun run = prepare_run(spec, cfg, bindings);
    OscarState sat = saturate(run.initial, run.rules, *run.table);
    RunOutcome out;
    out.universe_values = run.universe.values.size();
    out.per_session_values = run.universe.values_per_session(cfg.sessions);
    auto witness = check_theorem(sat, spec.theorem, run.scenario, run.universe);
    if (!witness) return out;
    out.attack = true;
    AttackTrace trace = extract_trace(sat, *witness, *run.table);
    for (const auto& [name, v] : witness->values)
        out.witness.emplace_back(name, run.table->render(v));
    for (const auto& [name, p] : witness->principals)
        out.witness.emplace_back(name, run.scenario.principals[p].name);
    std::sort(out.witness.begin(), out.witness.end());
    for (const auto& s : trace.steps) {
        Report::Step rs;
        rs.value = run.table->render(s.value);
        for (auto p : s.premises) rs.premises.push_back(run.table->render(p));
        std::sort(rs.premises.begin(), rs.premises.end());
        rs.rule = s.rule;
        out.trace.push_back(std::move(rs));
    }
    return out;
}

}  // namespace

Report analyze(const ProtocolSpec& spec, const AnalyzeConfig& cfg) {
    auto start = std::chrono::steady_clock::now();
    Report report;
    report.protocol = spec.name;
    report.sessions = cfg.sessions;
    report.honest = cfg.honest;

    ValueTable scratch;
    Scenario enum_scenario = make_scenario(scratch, spec, cfg.honest, cfg.sessions);
    std::vector<BindingSet> sets = enumerate_binding_sets(spec, enum_scenario);

    std::vector<std::optional<RunOutcome>> outcomes(sets.size());
    std::vector<std::exception_ptr> errors(sets.size());
    std::atomic<std::size_t> next{0};
    // Lowest index that decides the verdict (attack or error); later sets
    // need not run, which keeps the result independent of the job count.
    std::atomic<std::size_t> decided{sets.size()};
    auto lower_decided = [&](std::size_t i) {
        std::size_t cur = decided.load();
        while (i < cur && !decided.compare_exchange_weak(cur, i)) {
        }
    };

    auto worker = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= sets.size()) return;
            if (i > decided.load()) continue;
            try {
                RunOutcome out = run_one(spec, cfg, sets[i]);
                if (out.attack) lower_decided(i);
                outcomes[i] = std::move(out);
            } catch (...) {
                errors[i] = std::current_exception();
                lower_decided(i);
            }
        }
    };

    int jobs = std::max(1, cfg.jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    // Earliest decisive event in enumeration order wins.
    std::size_t attack_at = sets.size();
    for (std::size_t i = 0; i < sets.size(); ++i) {
        if (errors[i]) std::rethrow_exception(errors[i]);
        if (outcomes[i] && outcomes[i]->attack) {
            attack_at = i;
            break;
        }
    }

    if (attack_at < sets.size()) {
        const RunOutcome& out = *outcomes[attack_at];
        report.attack = true;
        report.verdict = "Attack";
        report.bindings_explored = static_cast<int>(attack_at) + 1;
        report.witness = out.witness;
        report.trace = out.trace;
        report.universe_values = out.universe_values;
        report.per_session_values = out.per_session_values;
    } else {
        report.attack = false;
        report.verdict = "Secure(" + std::to_string(cfg.sessions) + ")";
        report.bindings_explored = static_cast<int>(sets.size());
        for (const auto& o : outcomes)
            if (o) {
                report.universe_values = std::max(report.universe_values, o->universe_values);
                report.per_session_values =
                    std::max(report.per_session_values, o->per_session_values);
            }
    }
    report.ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now() - start)
                    .count();
    return report;
}

}  // namespace kflow
