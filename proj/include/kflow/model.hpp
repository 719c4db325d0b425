#ifndef KFLOW_MODEL_HPP
#define KFLOW_MODEL_HPP

#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "kflow/terms.hpp"

namespace kflow {

struct ProtocolSpec;  // protocols.hpp
struct RuleSchema;    // rules.hpp

struct UniverseOverflow : Error {
    using Error::Error;
};

enum class Role { Honest, Oscar };

struct Options {
    bool public_key_crypto = false;
    bool identities_are_keys = false;

    friend bool operator==(const Options&, const Options&) = default;
};

struct Principal {
    std::string name;
    Role role = Role::Honest;
    ValueHandle identity;
    HandleSet owns;   // identity plus declared per-principal atoms
    // Honest principals draw the whole universe; Oscar's draws are computed
    // by initial_oscar_state.
    std::unordered_map<std::string, ValueHandle> atoms;  // per-principal atom decl -> handle
};

struct Scenario {
    ValueTable* table = nullptr;
    std::vector<Principal> principals;
    int oscar = -1;  // index into principals
    int sessions = 1;
    Options options;
    std::string protocol;
    std::vector<std::unordered_map<std::string, ValueHandle>> session_atoms;  // [session][decl]

    const Principal& oscar_principal() const { return principals[oscar]; }
    std::vector<int> honest_indices() const;
};

/// Assignment of one principal index per protocol role, for one session.
using RoleBinding = std::vector<int>;
/// One binding per session.
using BindingSet = std::vector<RoleBinding>;

struct Universe {
    const ValueTable* table = nullptr;
    HandleSet values;  // subterm-closed
    std::unordered_set<ValueHandle> lookup;
    std::vector<HandleSet> by_kind;  // indexed by ValueKind
    // Provenance: session index that first mentioned the value (-1 for base
    // atoms and globally-mentioned values), with the mentioning rule label.
    std::map<ValueHandle, std::pair<int, std::string>> provenance;
    std::size_t base_count = 0;

    bool contains(ValueHandle v) const { return lookup.count(v) != 0; }
    const HandleSet& of_kind(ValueKind k) const { return by_kind[static_cast<std::size_t>(k)]; }
    /// Measured per-session value count (the w*m bound's m).
    std::size_t values_per_session(int sessions) const;
};

struct LearnEntry {
    HandleSet premises;
    std::string rule;
};

struct OscarState {
    HandleSet draws;
    std::unordered_set<ValueHandle> known;
    std::map<ValueHandle, LearnEntry> learns;

    bool knows(ValueHandle v) const { return known.count(v) != 0; }
    bool drawn(ValueHandle v) const;
    HandleSet known_sorted() const;
};

// --- Full-state semantics (all principals), used for property testing ----

using FullState = std::set<std::pair<int, ValueHandle>>;

struct FullRule {
    int speaker = -1;
    ValueHandle value;
    int listener = -1;
    std::vector<std::pair<int, ValueHandle>> premises;
};

/// Applies every rule at most once per step, `steps` times.
FullState simulate_full(const std::vector<FullRule>& rules, const FullState& k0, int steps);

/// Iterates to the least fixed point containing k0.
FullState simulate_full_fixpoint(const std::vector<FullRule>& rules, const FullState& k0);

struct MergeResult {
    int merged_count = 0;
    int oscar = -1;                  // merged adversary index
    std::vector<int> principal_map;  // old index -> new index
    std::vector<FullRule> rules;
    FullState state;
};

/// Collapses the adversary set into a single principal, rewriting rules and
/// state pointwise and dropping adversary self-rules.
MergeResult merge(int principal_count, const std::vector<FullRule>& rules,
                  const FullState& initial, const std::set<int>& adversaries);

// --- Scenario / universe construction -----------------------------------

Scenario make_scenario(ValueTable& table, const ProtocolSpec& spec, int honest_count,
                       int sessions);

/// All assignments of principals to protocol roles for every session,
/// deduplicated by renaming symmetry over honest principals.
std::vector<BindingSet> enumerate_binding_sets(const ProtocolSpec& spec,
                                               const Scenario& scenario);

Universe build_universe(ValueTable& table, const Scenario& scenario, const ProtocolSpec& spec,
                        const BindingSet& bindings, std::size_t max_values = 10000);

/// As build_universe, optionally returning the session-expanded schemas the
/// closure ran over (the same ones grounding should use).
Universe build_universe_impl(ValueTable& table, const Scenario& scenario, const ProtocolSpec& spec,
                             const BindingSet& bindings, std::size_t max_values,
                             std::vector<RuleSchema>* expanded_out);

/// Oscar draws every atomic universe value except the protocol's declared
/// honest secrets; learns starts empty.
OscarState initial_oscar_state(const Scenario& scenario, const Universe& universe,
                               const ProtocolSpec& spec);

}  // namespace kflow

#endif
