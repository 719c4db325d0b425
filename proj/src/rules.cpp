#include "kflow/rules.hpp"

#include <algorithm>
#include <cassert>
#include <functional>

namespace kflow {

// --- Template constructors -------------------------------------------------

Template Template::var(std::string n) {
    Template t;
    t.kind = Kind::Var;
    t.name = std::move(n);
    return t;
}
Template Template::constant_of(ValueHandle h) {
    Template t;
    t.kind = Kind::Const;
    t.constant = h;
    return t;
}
Template Template::id_of(PrincipalRef p) {
    Template t;
    t.kind = Kind::IdOf;
    t.principal = std::move(p);
    return t;
}
Template Template::per_atom(std::string decl, PrincipalRef p) {
    Template t;
    t.kind = Kind::PerAtom;
    t.name = std::move(decl);
    t.principal = std::move(p);
    return t;
}
Template Template::sess_atom(std::string decl) {
    Template t;
    t.kind = Kind::SessAtom;
    t.name = std::move(decl);
    return t;
}
Template Template::sess_value(std::string decl) {
    Template t;
    t.kind = Kind::SessValue;
    t.name = std::move(decl);
    return t;
}
Template Template::osc_atom(std::string decl) {
    Template t;
    t.kind = Kind::OscAtom;
    t.name = std::move(decl);
    return t;
}
Template Template::enc(Template key, std::vector<Template> plain) {
    Template t;
    t.kind = Kind::Enc;
    t.children.push_back(std::move(key));
    for (auto& p : plain) t.children.push_back(std::move(p));
    return t;
}
Template Template::nonce_t(Template seed, Template id) {
    Template t;
    t.kind = Kind::NonceT;
    t.children.push_back(std::move(seed));
    t.children.push_back(std::move(id));
    return t;
}
Template Template::hash_t(std::vector<Template> members) {
    Template t;
    t.kind = Kind::HashT;
    t.children = std::move(members);
    return t;
}
Template Template::tuple_t(std::vector<Template> members) {
    Template t;
    t.kind = Kind::TupleT;
    t.children = std::move(members);
    return t;
}
Template Template::puf_t(Template challenge) {
    Template t;
    t.kind = Kind::PufT;
    t.children.push_back(std::move(challenge));
    return t;
}

bool Template::references_session() const {
    if (kind == Kind::SessAtom || kind == Kind::SessValue) return true;
    if ((kind == Kind::IdOf || kind == Kind::PerAtom) &&
        principal.kind == PrincipalRef::Kind::RoleName)
        return true;
    for (const auto& c : children)
        if (c.references_session()) return true;
    return false;
}

bool RuleSchema::session_anchored() const {
    for (const auto& p : premises)
        if (p.references_session()) return true;
    return conclusion.references_session();
}

// --- Expansion ---------------------------------------------------------------

namespace {

int resolve_principal(const PrincipalRef& p, const Bindings& b, const Scenario&) {
    switch (p.kind) {
        case PrincipalRef::Kind::Fixed: return p.index;
        case PrincipalRef::Kind::Var: {
            const int* it = b.find_principal(p.name);
            if (!it) throw Error("unbound principal variable " + p.name);
            return *it;
        }
        case PrincipalRef::Kind::SelfOwner:
            if (b.self_owner < 0) throw Error("no owner in scope for 'self'");
            return b.self_owner;
        case PrincipalRef::Kind::RoleName:
            throw Error("unexpanded role reference " + p.name);
    }
    return -1;
}

Template expand_template(const Template& t, const std::vector<std::string>& roles,
                         const RoleBinding& binding, const Scenario& sc, int session,
                         const std::map<std::string, ValueHandle>& session_values) {
    auto expand_pref = [&](const PrincipalRef& p) -> PrincipalRef {
        if (p.kind != PrincipalRef::Kind::RoleName) return p;
        for (std::size_t i = 0; i < roles.size(); ++i)
            if (roles[i] == p.name) return PrincipalRef::fixed(binding[i]);
        throw Error("unknown role " + p.name);
    };
    Template out = t;
    switch (t.kind) {
        case Template::Kind::IdOf:
        case Template::Kind::PerAtom:
            out.principal = expand_pref(t.principal);
            return out;
        case Template::Kind::SessAtom: {
            auto it = sc.session_atoms[session].find(t.name);
            if (it == sc.session_atoms[session].end())
                throw Error("unknown session atom " + t.name);
            return Template::constant_of(it->second);
        }
        case Template::Kind::SessValue: {
            auto it = session_values.find(t.name);
            if (it == session_values.end()) throw Error("unknown session value " + t.name);
            return Template::constant_of(it->second);
        }
        default:
            out.children.clear();
            for (const auto& c : t.children)
                out.children.push_back(expand_template(c, roles, binding, sc, session, session_values));
            return out;
    }
}

}  // namespace

Template expand_template_for_session(const Template& t, const std::vector<std::string>& roles,
                                     const RoleBinding& binding, const Scenario& scenario,
                                     int session,
                                     const std::map<std::string, ValueHandle>& session_values) {
    return expand_template(t, roles, binding, scenario, session, session_values);
}

RuleSchema expand_protocol_schema(const RuleSchema& schema, const std::vector<std::string>& roles,
                                  const Scenario& scenario, const RoleBinding& binding,
                                  const std::map<std::string, ValueHandle>& session_values,
                                  int session) {
    RuleSchema out = schema;
    out.premises.clear();
    for (const auto& p : schema.premises)
        out.premises.push_back(expand_template(p, roles, binding, scenario, session, session_values));
    out.conclusion =
        expand_template(schema.conclusion, roles, binding, scenario, session, session_values);
    return out;
}

// --- Resolution / instantiation ---------------------------------------------

namespace {

enum class ResolveStatus { Found, Missing, Unbound };

struct Resolved {
    ResolveStatus status;
    ValueHandle handle;
};

Resolved resolve_rec(const Template& t, const Bindings& b, const Scenario& sc,
                     const ValueTable& table) {
    switch (t.kind) {
        case Template::Kind::Var: {
            const ValueHandle* it = b.find_value(t.name);
            if (!it) return {ResolveStatus::Unbound, {}};
            return {ResolveStatus::Found, *it};
        }
        case Template::Kind::Const:
            return {ResolveStatus::Found, t.constant};
        case Template::Kind::IdOf: {
            int p = resolve_principal(t.principal, b, sc);
            return {ResolveStatus::Found, sc.principals[p].identity};
        }
        case Template::Kind::PerAtom: {
            int p = resolve_principal(t.principal, b, sc);
            auto it = sc.principals[p].atoms.find(t.name);
            if (it == sc.principals[p].atoms.end())
                throw Error("unknown per-principal atom " + t.name);
            return {ResolveStatus::Found, it->second};
        }
        case Template::Kind::SessAtom: {
            if (!b.session_atoms) throw Error("no session in scope for atom " + t.name);
            auto it = b.session_atoms->find(t.name);
            if (it == b.session_atoms->end()) throw Error("unknown session atom " + t.name);
            return {ResolveStatus::Found, it->second};
        }
        case Template::Kind::SessValue: {
            if (!b.session_values) throw Error("no session in scope for value " + t.name);
            auto it = b.session_values->find(t.name);
            if (it == b.session_values->end()) throw Error("unknown session value " + t.name);
            return {ResolveStatus::Found, it->second};
        }
        case Template::Kind::OscAtom: {
            const auto& osc = sc.oscar_principal();
            auto it = osc.atoms.find(t.name);
            if (it == osc.atoms.end()) throw Error("unknown Oscar atom " + t.name);
            return {ResolveStatus::Found, it->second};
        }
        default: break;
    }
    std::vector<ValueHandle> kids;
    kids.reserve(t.children.size());
    for (const auto& c : t.children) {
        Resolved r = resolve_rec(c, b, sc, table);
        if (r.status != ResolveStatus::Found) return r;
        kids.push_back(r.handle);
    }
    ValueTerm term = [&]() -> ValueTerm {
        switch (t.kind) {
            case Template::Kind::Enc:
                return Ciphertext{kids[0], HandleSet(kids.begin() + 1, kids.end())};
            case Template::Kind::NonceT: return Nonce{kids[0], kids[1]};
            case Template::Kind::HashT: return HashV{kids};
            case Template::Kind::TupleT: return Tuple{kids};
            default: return PufResponse{kids[0]};
        }
    }();
    ValueHandle h = table.lookup(term);
    if (!h.valid()) return {ResolveStatus::Missing, {}};
    return {ResolveStatus::Found, h};
}

}  // namespace

std::optional<ValueHandle> resolve_template(const Template& t, const Bindings& b,
                                            const Scenario& scenario) {
    Resolved r = resolve_rec(t, b, scenario, *scenario.table);
    if (r.status == ResolveStatus::Found) return r.handle;
    return std::nullopt;
}

ValueHandle instantiate_template(const Template& t, const Bindings& b, ValueTable& table,
                                 const Scenario& scenario) {
    switch (t.kind) {
        case Template::Kind::Enc:
        case Template::Kind::NonceT:
        case Template::Kind::HashT:
        case Template::Kind::TupleT:
        case Template::Kind::PufT: {
            std::vector<ValueHandle> kids;
            kids.reserve(t.children.size());
            for (const auto& c : t.children)
                kids.push_back(instantiate_template(c, b, table, scenario));
            switch (t.kind) {
                case Template::Kind::Enc:
                    return table.cipher(kids[0], {kids.begin() + 1, kids.end()});
                case Template::Kind::NonceT: return table.nonce(kids[0], kids[1]);
                case Template::Kind::HashT: return table.hashv(kids);
                case Template::Kind::TupleT: return table.tuple(kids);
                default: return table.puf(kids[0]);
            }
        }
        default: {
            Resolved r = resolve_rec(t, b, scenario, table);
            if (r.status != ResolveStatus::Found)
                throw Error("cannot instantiate template: unbound or missing leaf");
            return r.handle;
        }
    }
}

// --- Matching ----------------------------------------------------------------

namespace {

void enumerate_matches_rec(const Template& t, ValueHandle v, const Bindings& b,
                           const Scenario& sc, std::vector<Bindings>& out);

void enumerate_set_matches(const std::vector<const Template*>& ts, std::size_t i,
                           const HandleSet& members, std::vector<std::size_t>& chosen,
                           const Bindings& b, const Scenario& sc, std::vector<Bindings>& out) {
    if (i == ts.size()) {
        // The instantiated member set must equal the value's set: every
        // member has to be produced by some template.
        std::vector<bool> covered(members.size(), false);
        for (auto c : chosen) covered[c] = true;
        for (bool c : covered)
            if (!c) return;
        out.push_back(b);
        return;
    }
    for (std::size_t mi = 0; mi < members.size(); ++mi) {
        std::vector<Bindings> exts;
        enumerate_matches_rec(*ts[i], members[mi], b, sc, exts);
        for (const auto& e : exts) {
            chosen.push_back(mi);
            enumerate_set_matches(ts, i + 1, members, chosen, e, sc, out);
            chosen.pop_back();
        }
    }
}

void enumerate_matches_rec(const Template& t, ValueHandle v, const Bindings& b,
                           const Scenario& sc, std::vector<Bindings>& out) {
    const ValueTable& table = *sc.table;
    switch (t.kind) {
        case Template::Kind::Var: {
            if (const ValueHandle* it = b.find_value(t.name)) {
                if (*it == v) out.push_back(b);
            } else {
                Bindings nb = b;
                nb.values.emplace_back(t.name, v);
                out.push_back(std::move(nb));
            }
            return;
        }
        case Template::Kind::Const:
        case Template::Kind::IdOf:
        case Template::Kind::PerAtom:
        case Template::Kind::SessAtom:
        case Template::Kind::SessValue:
        case Template::Kind::OscAtom: {
            Resolved r = resolve_rec(t, b, sc, table);
            if (r.status == ResolveStatus::Found && r.handle == v) out.push_back(b);
            return;
        }
        case Template::Kind::Enc: {
            if (table.kind_of(v) != ValueKind::Ciphertext) return;
            const auto& c = std::get<Ciphertext>(table.term(v));
            std::vector<Bindings> key_exts;
            enumerate_matches_rec(t.children[0], c.key, b, sc, key_exts);
            std::vector<const Template*> members;
            for (std::size_t i = 1; i < t.children.size(); ++i) members.push_back(&t.children[i]);
            for (const auto& e : key_exts) {
                std::vector<std::size_t> chosen;
                enumerate_set_matches(members, 0, c.plaintext, chosen, e, sc, out);
            }
            return;
        }
        case Template::Kind::NonceT: {
            if (table.kind_of(v) != ValueKind::Nonce) return;
            const auto& n = std::get<Nonce>(table.term(v));
            std::vector<Bindings> seed_exts;
            enumerate_matches_rec(t.children[0], n.seed, b, sc, seed_exts);
            for (const auto& e : seed_exts) enumerate_matches_rec(t.children[1], n.id, e, sc, out);
            return;
        }
        case Template::Kind::HashT: {
            if (table.kind_of(v) != ValueKind::HashV) return;
            const auto& h = std::get<HashV>(table.term(v));
            std::vector<const Template*> members;
            for (const auto& c : t.children) members.push_back(&c);
            std::vector<std::size_t> chosen;
            enumerate_set_matches(members, 0, h.preimage, chosen, b, sc, out);
            return;
        }
        case Template::Kind::TupleT: {
            if (table.kind_of(v) != ValueKind::Tuple) return;
            const auto& tp = std::get<Tuple>(table.term(v));
            std::vector<const Template*> members;
            for (const auto& c : t.children) members.push_back(&c);
            std::vector<std::size_t> chosen;
            enumerate_set_matches(members, 0, tp.contents, chosen, b, sc, out);
            return;
        }
        case Template::Kind::PufT: {
            if (table.kind_of(v) != ValueKind::PufResponse) return;
            const auto& p = std::get<PufResponse>(table.term(v));
            enumerate_matches_rec(t.children[0], p.challenge, b, sc, out);
            return;
        }
    }
}

}  // namespace

void enumerate_template_matches(const Template& t, ValueHandle v, const Bindings& b,
                                const Scenario& scenario, std::vector<Bindings>& out) {
    enumerate_matches_rec(t, v, b, scenario, out);
}

// --- Guard evaluation ----------------------------------------------------------

namespace {

// Scalar path evaluation; nullopt when a projection does not apply.
std::optional<ValueHandle> eval_scalar_path(const GuardPath& p, const Bindings& b,
                                            const ValueTable& table, std::size_t upto) {
    const ValueHandle* it = b.find_value(p.var);
    if (!it) throw Error("unbound guard variable " + p.var);
    ValueHandle cur = *it;
    for (std::size_t i = 0; i < upto; ++i) {
        const ValueTerm& t = table.term(cur);
        switch (p.steps[i]) {
            case GuardPath::Step::Key:
                if (auto* c = std::get_if<Ciphertext>(&t)) cur = c->key;
                else return std::nullopt;
                break;
            case GuardPath::Step::Seed:
                if (auto* n = std::get_if<Nonce>(&t)) cur = n->seed;
                else return std::nullopt;
                break;
            case GuardPath::Step::Id:
                if (auto* n = std::get_if<Nonce>(&t)) cur = n->id;
                else return std::nullopt;
                break;
            case GuardPath::Step::Challenge:
                if (auto* pf = std::get_if<PufResponse>(&t)) cur = pf->challenge;
                else return std::nullopt;
                break;
            default:
                return std::nullopt;  // set step is terminal
        }
    }
    return cur;
}

// Set path: the final step must be a set projection; a bare variable of a
// composite kind projects to nothing (paths name the field explicitly).
const HandleSet* eval_set_path(const GuardPath& p, const Bindings& b, const ValueTable& table) {
    if (p.steps.empty()) return nullptr;
    auto head = eval_scalar_path(p, b, table, p.steps.size() - 1);
    if (!head) return nullptr;
    const ValueTerm& t = table.term(*head);
    switch (p.steps.back()) {
        case GuardPath::Step::Plain:
            if (auto* c = std::get_if<Ciphertext>(&t)) return &c->plaintext;
            return nullptr;
        case GuardPath::Step::Pre:
            if (auto* h = std::get_if<HashV>(&t)) return &h->preimage;
            return nullptr;
        case GuardPath::Step::Contents:
            if (auto* tp = std::get_if<Tuple>(&t)) return &tp->contents;
            return nullptr;
        default:
            return nullptr;
    }
}

bool sort_checks(ValueHandle v, SortCheck s, const ValueTable& table) {
    switch (s) {
        case SortCheck::AnyValue: return true;
        case SortCheck::Atomic: return table.kind_of(v) == ValueKind::Atom;
        case SortCheck::Identity:
            return table.kind_of(v) == ValueKind::Atom &&
                   table.as_atom(v).kind == AtomKind::Identity;
        case SortCheck::SeedAtom:
            return table.kind_of(v) == ValueKind::Atom && table.as_atom(v).kind == AtomKind::Seed;
        case SortCheck::Cipher: return table.kind_of(v) == ValueKind::Ciphertext;
        case SortCheck::NonceV: return table.kind_of(v) == ValueKind::Nonce;
        case SortCheck::HashVal: return table.kind_of(v) == ValueKind::HashV;
        case SortCheck::TupleVal: return table.kind_of(v) == ValueKind::Tuple;
        case SortCheck::Puf: return table.kind_of(v) == ValueKind::PufResponse;
    }
    return false;
}

bool owns_value(const Principal& p, ValueHandle v) {
    return std::binary_search(p.owns.begin(), p.owns.end(), v);
}

}  // namespace

bool eval_guard(const Guard& g, const Bindings& b, const Scenario& scenario,
                const OscarState* state) {
    const ValueTable& table = *scenario.table;
    auto scalar = [&](const GuardPath& p) { return eval_scalar_path(p, b, table, p.steps.size()); };
    switch (g.kind) {
        case Guard::Kind::KindIs: {
            auto v = scalar(g.path);
            return v && sort_checks(*v, g.sort, table);
        }
        case Guard::Kind::Eq: {
            auto a = scalar(g.path), c = scalar(g.other);
            return a && c && *a == *c;
        }
        case Guard::Kind::Ne: {
            auto a = scalar(g.path), c = scalar(g.other);
            return a && c && *a != *c;
        }
        case Guard::Kind::Member: {
            auto v = scalar(g.path);
            const HandleSet* s = eval_set_path(g.other, b, table);
            return v && s && std::binary_search(s->begin(), s->end(), *v);
        }
        case Guard::Kind::SetEq: {
            const HandleSet* a = eval_set_path(g.path, b, table);
            const HandleSet* c = eval_set_path(g.other, b, table);
            return a && c && *a == *c;
        }
        case Guard::Kind::Card: {
            const HandleSet* s = eval_set_path(g.path, b, table);
            return s && s->size() == g.card;
        }
        case Guard::Kind::CardAtMost: {
            const HandleSet* s = eval_set_path(g.path, b, table);
            return s && s->size() <= g.card;
        }
        case Guard::Kind::AllMembersSort: {
            const HandleSet* s = eval_set_path(g.path, b, table);
            if (!s) return false;
            for (auto m : *s)
                if (!sort_checks(m, g.sort, table)) return false;
            return true;
        }
        case Guard::Kind::AllMembersKnown: {
            if (!state) throw Error("knowledge guard outside theorem evaluation");
            const HandleSet* s = eval_set_path(g.path, b, table);
            if (!s) return false;
            for (auto m : *s)
                if (!state->knows(m)) return false;
            return true;
        }
        case Guard::Kind::AllMembersNotDrawn: {
            if (!state) throw Error("knowledge guard outside theorem evaluation");
            const HandleSet* s = eval_set_path(g.path, b, table);
            if (!s) return false;
            for (auto m : *s)
                if (state->drawn(m)) return false;
            return true;
        }
        case Guard::Kind::OwnsVar: {
            const int* it = b.find_principal(g.pvar);
            if (!it) throw Error("unbound principal variable " + g.pvar);
            auto v = scalar(g.path);
            return v && owns_value(scenario.principals[*it], *v);
        }
        case Guard::Kind::OscarOwns: {
            auto v = scalar(g.path);
            return v && owns_value(scenario.oscar_principal(), *v);
        }
        case Guard::Kind::DistinctP: {
            const int* a = b.find_principal(g.pvar);
            const int* c = b.find_principal(g.pvar2);
            if (!a || !c) throw Error("unbound principal variable in distinct()");
            return *a != *c;
        }
        case Guard::Kind::IfPublicKey: {
            if (!scenario.options.public_key_crypto) return true;
            for (const auto& inner : g.inner)
                if (!eval_guard(inner, b, scenario, state)) return false;
            return true;
        }
    }
    return false;
}

// --- Grounding -----------------------------------------------------------------

namespace {

ValueKind template_top_kind(const Template& t) {
    switch (t.kind) {
        case Template::Kind::Enc: return ValueKind::Ciphertext;
        case Template::Kind::NonceT: return ValueKind::Nonce;
        case Template::Kind::HashT: return ValueKind::HashV;
        case Template::Kind::TupleT: return ValueKind::Tuple;
        case Template::Kind::PufT: return ValueKind::PufResponse;
        default: return ValueKind::Atom;  // unused
    }
}

bool template_is_composite(const Template& t) {
    switch (t.kind) {
        case Template::Kind::Enc:
        case Template::Kind::NonceT:
        case Template::Kind::HashT:
        case Template::Kind::TupleT:
        case Template::Kind::PufT: return true;
        default: return false;
    }
}

void solve_templates(const std::vector<const Template*>& templates, std::size_t i,
                     const Universe& universe, const Scenario& sc, const Bindings& b,
                     std::vector<Bindings>& out) {
    if (i == templates.size()) {
        out.push_back(b);
        return;
    }
    const Template& t = *templates[i];
    Resolved r = resolve_rec(t, b, sc, *sc.table);
    if (r.status == ResolveStatus::Found) {
        if (universe.contains(r.handle)) solve_templates(templates, i + 1, universe, sc, b, out);
        return;
    }
    if (r.status == ResolveStatus::Missing) return;
    // Unbound variables remain: match against universe candidates.
    const HandleSet& candidates =
        template_is_composite(t) ? universe.of_kind(template_top_kind(t)) : universe.values;
    for (auto v : candidates) {
        std::vector<Bindings> exts;
        enumerate_matches_rec(t, v, b, sc, exts);
        for (const auto& e : exts) solve_templates(templates, i + 1, universe, sc, e, out);
    }
}

void enumerate_pvars(const std::vector<std::pair<std::string, PrincipalRange>>& pvars,
                     std::size_t i, const Scenario& sc, Bindings& b,
                     const std::function<void(const Bindings&)>& k) {
    if (i == pvars.size()) {
        k(b);
        return;
    }
    const auto& [name, range] = pvars[i];
    for (int p = 0; p < static_cast<int>(sc.principals.size()); ++p) {
        if (range == PrincipalRange::Honest && sc.principals[p].role != Role::Honest) continue;
        b.set_principal(name, p);
        enumerate_pvars(pvars, i + 1, sc, b, k);
        b.erase_principal(name);
    }
}

std::vector<GroundRule> ground_primitive(const RuleSchema& s, const Universe& u,
                                         const Scenario& sc) {
    const ValueTable& T = *u.table;
    std::vector<GroundRule> out;
    auto key_ok = [&](ValueHandle key) {
        if (sc.options.identities_are_keys && !sort_checks(key, SortCheck::Identity, T))
            return false;
        if (sc.options.public_key_crypto) {
            if (T.kind_of(key) != ValueKind::Atom) return false;
            bool owned = false;
            for (const auto& p : sc.principals) owned = owned || owns_value(p, key);
            if (!owned) return false;
        }
        return true;
    };
    auto emit = [&](HandleSet premises, ValueHandle conclusion) {
        if (std::binary_search(premises.begin(), premises.end(), conclusion)) return;
        out.push_back(GroundRule{s.label, std::move(premises), conclusion});
    };
    switch (s.builtin) {
        case Primitive::Encryptor:
            for (auto h : u.of_kind(ValueKind::Ciphertext)) {
                const auto& c = std::get<Ciphertext>(T.term(h));
                if (!key_ok(c.key)) continue;
                HandleSet prem = c.plaintext;
                prem.push_back(c.key);
                emit(make_handle_set(std::move(prem)), h);
            }
            break;
        case Primitive::Decryptor:
            for (auto h : u.of_kind(ValueKind::Ciphertext)) {
                const auto& c = std::get<Ciphertext>(T.term(h));
                if (!key_ok(c.key)) continue;
                if (sc.options.public_key_crypto && !owns_value(sc.oscar_principal(), c.key))
                    continue;
                for (auto m : c.plaintext)
                    emit(make_handle_set({h, c.key}), m);
            }
            break;
        case Primitive::NonceGenerator:
            for (auto h : u.of_kind(ValueKind::Nonce)) {
                const auto& n = std::get<Nonce>(T.term(h));
                if (n.id != sc.oscar_principal().identity) continue;
                emit(make_handle_set({n.seed}), h);
            }
            break;
        case Primitive::Hasher:
            for (auto h : u.of_kind(ValueKind::HashV))
                emit(std::get<HashV>(T.term(h)).preimage, h);
            break;
        case Primitive::TupleProjection:
            for (auto h : u.of_kind(ValueKind::Tuple))
                for (auto m : std::get<Tuple>(T.term(h)).contents)
                    emit({h}, m);
            break;
        case Primitive::GetResponse: {
            auto it = sc.oscar_principal().atoms.find(s.builtin_param);
            if (it == sc.oscar_principal().atoms.end()) break;
            ValueHandle hosc = it->second;
            for (auto h : u.of_kind(ValueKind::PufResponse)) {
                const auto& p = std::get<PufResponse>(T.term(h));
                if (T.kind_of(p.challenge) != ValueKind::HashV) continue;
                const auto& ch = std::get<HashV>(T.term(p.challenge));
                if (ch.preimage.size() > 2) continue;
                if (!std::binary_search(ch.preimage.begin(), ch.preimage.end(), hosc)) continue;
                emit({p.challenge}, h);
            }
            break;
        }
        case Primitive::GetSecret: {
            auto it = sc.oscar_principal().atoms.find(s.builtin_param);
            if (it == sc.oscar_principal().atoms.end()) break;
            ValueHandle hosc = it->second;
            for (auto h : u.of_kind(ValueKind::HashV)) {
                const auto& hh = std::get<HashV>(T.term(h));
                if (hh.preimage.size() != 2) continue;
                if (!std::binary_search(hh.preimage.begin(), hh.preimage.end(), hosc)) continue;
                ValueHandle other =
                    hh.preimage[0] == hosc ? hh.preimage[1] : hh.preimage[0];
                if (T.kind_of(other) != ValueKind::PufResponse) continue;
                emit(hh.preimage, h);
            }
            break;
        }
        case Primitive::None: break;
    }
    return out;
}

}  // namespace

std::vector<GroundRule> ground(const RuleSchema& schema, const Universe& universe,
                               const Scenario& scenario) {
    std::vector<GroundRule> out;
    if (schema.builtin != Primitive::None) {
        out = ground_primitive(schema, universe, scenario);
    } else {
        std::vector<const Template*> templates;
        templates.push_back(&schema.conclusion);
        for (const auto& p : schema.premises) templates.push_back(&p);
        Bindings base;
        enumerate_pvars(schema.pvars, 0, scenario, base, [&](const Bindings& pb) {
            std::vector<Bindings> solutions;
            solve_templates(templates, 0, universe, scenario, pb, solutions);
            for (const auto& sol : solutions) {
                bool ok = true;
                for (const auto& g : schema.guards)
                    if (!eval_guard(g, sol, scenario, nullptr)) {
                        ok = false;
                        break;
                    }
                if (!ok) continue;
                ValueHandle conclusion = *resolve_template(schema.conclusion, sol, scenario);
                std::vector<ValueHandle> prem;
                for (const auto& p : schema.premises)
                    prem.push_back(*resolve_template(p, sol, scenario));
                HandleSet premises = make_handle_set(std::move(prem));
                if (std::binary_search(premises.begin(), premises.end(), conclusion)) continue;
                out.push_back(GroundRule{schema.label, std::move(premises), conclusion});
            }
        });
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<GroundRule> ground_all(const std::vector<RuleSchema>& schemas,
                                   const Universe& universe, const Scenario& scenario) {
    std::vector<GroundRule> all;
    for (const auto& s : schemas) {
        auto rs = ground(s, universe, scenario);
        all.insert(all.end(), rs.begin(), rs.end());
    }
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    return all;
}

// --- Primitive library -----------------------------------------------------------

RuleSchema primitive_encryptor() {
    RuleSchema s;
    s.label = "enc";
    s.builtin = Primitive::Encryptor;
    return s;
}
RuleSchema primitive_decryptor() {
    RuleSchema s;
    s.label = "dec";
    s.builtin = Primitive::Decryptor;
    return s;
}
RuleSchema primitive_nonce_generator() {
    RuleSchema s;
    s.label = "noncegen";
    s.builtin = Primitive::NonceGenerator;
    return s;
}
RuleSchema primitive_hasher() {
    RuleSchema s;
    s.label = "hashgen";
    s.builtin = Primitive::Hasher;
    return s;
}
RuleSchema primitive_tuple_projection() {
    RuleSchema s;
    s.label = "project";
    s.builtin = Primitive::TupleProjection;
    return s;
}
RuleSchema primitive_get_response(std::string oscar_hash_decl) {
    RuleSchema s;
    s.label = "getresponse";
    s.builtin = Primitive::GetResponse;
    s.builtin_param = std::move(oscar_hash_decl);
    return s;
}
RuleSchema primitive_get_secret(std::string oscar_hash_decl) {
    RuleSchema s;
    s.label = "getsecret";
    s.builtin = Primitive::GetSecret;
    s.builtin_param = std::move(oscar_hash_decl);
    return s;
}

}  // namespace kflow
