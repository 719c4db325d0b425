#ifndef KFLOW_RULES_HPP
#define KFLOW_RULES_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kflow/model.hpp"
#include "kflow/terms.hpp"

namespace kflow {

// --- Template language ----------------------------------------------------

/// Names a principal inside a template: a protocol role (resolved per
/// session), a schema principal variable, the owning principal of a
/// per-principal value declaration, or a concrete index after expansion.
struct PrincipalRef {
    enum class Kind { RoleName, Var, SelfOwner, Fixed };
    Kind kind = Kind::Var;
    std::string name;  // role name or variable name
    int index = -1;    // Kind::Fixed

    static PrincipalRef role(std::string r) { return {Kind::RoleName, std::move(r), -1}; }
    static PrincipalRef var(std::string v) { return {Kind::Var, std::move(v), -1}; }
    static PrincipalRef self() { return {Kind::SelfOwner, {}, -1}; }
    static PrincipalRef fixed(int i) { return {Kind::Fixed, {}, i}; }

    friend bool operator==(const PrincipalRef&, const PrincipalRef&) = default;
};

/// Value template: constructors over variables, declared atoms, and
/// principal identities. Set-valued constructor fields hold one template per
/// member; instantiation takes the set union, matching requires the member
/// templates to cover the value's set exactly.
struct Template {
    enum class Kind {
        Var,        // free value variable
        Const,      // concrete handle (after expansion)
        IdOf,       // identity atom of a principal
        PerAtom,    // per-principal atom declaration
        SessAtom,   // per-session atom declaration
        SessValue,  // per-session value declaration
        OscAtom,    // one of Oscar's declared atoms
        Enc,        // children: [key, member...]
        NonceT,     // children: [seed, id]
        HashT,      // children: members
        TupleT,     // children: members
        PufT,       // children: [challenge]
    };

    Kind kind = Kind::Var;
    std::string name;  // variable or declaration name
    PrincipalRef principal;
    ValueHandle constant;
    std::vector<Template> children;

    static Template var(std::string n);
    static Template constant_of(ValueHandle h);
    static Template id_of(PrincipalRef p);
    static Template per_atom(std::string decl, PrincipalRef p);
    static Template sess_atom(std::string decl);
    static Template sess_value(std::string decl);
    static Template osc_atom(std::string decl);
    static Template enc(Template key, std::vector<Template> plain);
    static Template nonce_t(Template seed, Template id);
    static Template hash_t(std::vector<Template> members);
    static Template tuple_t(std::vector<Template> members);
    static Template puf_t(Template challenge);

    bool references_session() const;  // any role or per-session declaration

    friend bool operator==(const Template&, const Template&) = default;
};

// --- Guard language ---------------------------------------------------------

/// Projection path rooted at a bound value variable. Scalar steps may chain;
/// a set-valued step (plain/pre/contents) must be last.
struct GuardPath {
    std::string var;
    enum class Step { Key, Seed, Id, Challenge, Plain, Pre, Contents };
    std::vector<Step> steps;

    friend bool operator==(const GuardPath&, const GuardPath&) = default;
};

enum class SortCheck { AnyValue, Atomic, Identity, SeedAtom, Cipher, NonceV, HashVal, TupleVal, Puf };

struct Guard {
    enum class Kind {
        KindIs,           // path sorts to `sort`
        Eq,               // scalar paths equal
        Ne,               // scalar paths differ
        Member,           // scalar `path` is a member of set `set_path`
        SetEq,            // set paths are equal
        Card,             // |set_path| == n
        CardAtMost,       // |set_path| <= n
        AllMembersSort,   // every member of set_path checks against sort
        AllMembersKnown,  // theorem-only: every member in Oscar.knows
        AllMembersNotDrawn,  // theorem-only: no member in Oscar.draws
        OwnsVar,          // principal var `pvar` owns value at `path`
        OscarOwns,        // Oscar owns value at `path`
        DistinctP,        // two principal vars differ
        IfPublicKey,      // inner guard applies only when the option is set
    };

    Kind kind;
    GuardPath path;
    GuardPath other;
    SortCheck sort = SortCheck::AnyValue;
    std::size_t card = 0;
    std::string pvar, pvar2;
    std::vector<Guard> inner;

    friend bool operator==(const Guard&, const Guard&) = default;
};

// --- Schemas and ground rules ----------------------------------------------

enum class PrincipalRange { Honest, Any };

enum class Primitive {
    None,
    Encryptor,
    Decryptor,
    NonceGenerator,
    Hasher,
    TupleProjection,
    GetResponse,
    GetSecret,
};

struct RuleSchema {
    std::string label;
    Primitive builtin = Primitive::None;
    std::string builtin_param;  // GetResponse/GetSecret: Oscar atom declaration
    std::vector<std::pair<std::string, PrincipalRange>> pvars;
    std::vector<std::string> vvars;
    std::vector<Template> premises;
    Template conclusion;
    std::vector<Guard> guards;

    bool session_anchored() const;

    friend bool operator==(const RuleSchema&, const RuleSchema&) = default;
};

/// The operational rule form: fire when all premises are known, learn the
/// conclusion. Premises and conclusion always lie inside the universe.
struct GroundRule {
    std::string label;
    HandleSet premises;
    ValueHandle conclusion;

    friend bool operator==(const GroundRule& a, const GroundRule& b) {
        return a.label == b.label && a.premises == b.premises && a.conclusion == b.conclusion;
    }
    friend bool operator<(const GroundRule& a, const GroundRule& b) {
        if (a.label != b.label) return a.label < b.label;
        if (a.conclusion != b.conclusion) return a.conclusion < b.conclusion;
        return a.premises < b.premises;
    }
};

// --- Theorems ----------------------------------------------------------------

enum class VarDomain { UniverseD, Knows };

struct TheoremVar {
    std::string name;
    VarDomain domain = VarDomain::UniverseD;
    SortCheck sort = SortCheck::AnyValue;

    friend bool operator==(const TheoremVar&, const TheoremVar&) = default;
};

struct TheoremPVar {
    std::string name;
    PrincipalRange range = PrincipalRange::Honest;

    friend bool operator==(const TheoremPVar&, const TheoremPVar&) = default;
};

/// `var` (already bound) must structurally match `pattern`; unbound variables
/// inside the pattern are bound by the match.
struct MatchClause {
    std::string var;
    Template pattern;

    friend bool operator==(const MatchClause&, const MatchClause&) = default;
};

/// Forbidden-configuration pattern: existentially quantified variables with
/// guards; a satisfying assignment is an attack witness.
struct TheoremSpec {
    std::string label;
    std::vector<TheoremVar> vars;
    std::vector<TheoremPVar> pvars;
    std::vector<MatchClause> matches;
    std::vector<Guard> guards;

    friend bool operator==(const TheoremSpec&, const TheoremSpec&) = default;
};

// --- Operations ---------------------------------------------------------------

/// Variable assignment during matching/instantiation. Flat vectors: the
/// matcher copies bindings on every branch, and these stay tiny.
struct Bindings {
    std::vector<std::pair<std::string, ValueHandle>> values;
    std::vector<std::pair<std::string, int>> principals;
    int self_owner = -1;  // for per-principal value declarations
    const std::unordered_map<std::string, ValueHandle>* session_atoms = nullptr;
    const std::map<std::string, ValueHandle>* session_values = nullptr;

    const ValueHandle* find_value(const std::string& name) const {
        for (const auto& [n, v] : values)
            if (n == name) return &v;
        return nullptr;
    }
    void set_value(const std::string& name, ValueHandle v) {
        for (auto& [n, old] : values)
            if (n == name) {
                old = v;
                return;
            }
        values.emplace_back(name, v);
    }
    void erase_value(const std::string& name) {
        for (auto it = values.begin(); it != values.end(); ++it)
            if (it->first == name) {
                values.erase(it);
                return;
            }
    }
    const int* find_principal(const std::string& name) const {
        for (const auto& [n, p] : principals)
            if (n == name) return &p;
        return nullptr;
    }
    void set_principal(const std::string& name, int p) {
        for (auto& [n, old] : principals)
            if (n == name) {
                old = p;
                return;
            }
        principals.emplace_back(name, p);
    }
    void erase_principal(const std::string& name) {
        for (auto it = principals.begin(); it != principals.end(); ++it)
            if (it->first == name) {
                principals.erase(it);
                return;
            }
    }
};

/// Replaces role references and per-session declarations with constants for
/// one session of a binding set. Global schemas pass through unchanged.
RuleSchema expand_protocol_schema(const RuleSchema& schema, const std::vector<std::string>& roles,
                                  const Scenario& scenario, const RoleBinding& binding,
                                  const std::map<std::string, ValueHandle>& session_values,
                                  int session);

Template expand_template_for_session(const Template& t, const std::vector<std::string>& roles,
                                     const RoleBinding& binding, const Scenario& scenario,
                                     int session,
                                     const std::map<std::string, ValueHandle>& session_values);

/// Resolves a fully-bound template to an existing handle; nullopt when any
/// part is not interned (the rule then falls outside the universe).
std::optional<ValueHandle> resolve_template(const Template& t, const Bindings& b,
                                            const Scenario& scenario);

/// Interns the template's value, creating whatever is missing.
ValueHandle instantiate_template(const Template& t, const Bindings& b, ValueTable& table,
                                 const Scenario& scenario);

/// All binding extensions under which `t` structurally matches `v`.
void enumerate_template_matches(const Template& t, ValueHandle v, const Bindings& b,
                                const Scenario& scenario, std::vector<Bindings>& out);

bool eval_guard(const Guard& g, const Bindings& b, const Scenario& scenario,
                const OscarState* state);

/// All assignments of the schema's variables over universe values and
/// scenario principals that satisfy the guards, as ground rules.
/// Deterministic and duplicate-free.
std::vector<GroundRule> ground(const RuleSchema& schema, const Universe& universe,
                               const Scenario& scenario);

std::vector<GroundRule> ground_all(const std::vector<RuleSchema>& schemas,
                                   const Universe& universe, const Scenario& scenario);

// Primitive library (Model-Excerpt style rules the intruder can always use).
RuleSchema primitive_encryptor();
RuleSchema primitive_decryptor();
RuleSchema primitive_nonce_generator();
RuleSchema primitive_hasher();
RuleSchema primitive_tuple_projection();
RuleSchema primitive_get_response(std::string oscar_hash_decl = "hosc");
RuleSchema primitive_get_secret(std::string oscar_hash_decl = "hosc");

}  // namespace kflow

#endif
