#ifndef KFLOW_TEST_UTIL_HPP
#define KFLOW_TEST_UTIL_HPP

#include <algorithm>
#include <cstdint>
#include <set>
#include <vector>

#include "kflow/engine.hpp"

namespace kflow::test {

// Deterministic PRNG for property tests (splitmix64).
struct Rng {
    std::uint64_t state;
    explicit Rng(std::uint64_t seed) : state(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    std::size_t below(std::size_t n) { return n == 0 ? 0 : next() % n; }
    bool chance(int num, int den) { return below(static_cast<std::size_t>(den)) < static_cast<std::size_t>(num); }
};

// Brute-force closure: repeatedly apply every rule until nothing changes.
// Kept deliberately naive; it is the oracle the engine is checked against.
inline std::set<ValueHandle> naive_closure(const HandleSet& draws,
                                           const std::vector<GroundRule>& rules) {
    std::set<ValueHandle> known(draws.begin(), draws.end());
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& r : rules) {
            bool sat = true;
            for (auto p : r.premises)
                if (!known.count(p)) {
                    sat = false;
                    break;
                }
            if (sat && known.insert(r.conclusion).second) changed = true;
        }
    }
    return known;
}

// Random small instance over a fresh atom table.
struct RandomInstance {
    ValueTable table;
    std::vector<ValueHandle> values;
    std::vector<GroundRule> rules;
    HandleSet draws;
};

inline RandomInstance random_instance(Rng& rng, std::size_t max_values = 6,
                                      std::size_t max_rules = 8) {
    RandomInstance inst;
    std::size_t n = 2 + rng.below(max_values - 1);
    for (std::size_t i = 0; i < n; ++i)
        inst.values.push_back(inst.table.atom("v" + std::to_string(i)));
    std::size_t nr = rng.below(max_rules + 1);
    for (std::size_t i = 0; i < nr; ++i) {
        GroundRule r;
        r.label = "r" + std::to_string(i);
        std::size_t np = rng.below(3);
        std::vector<ValueHandle> prem;
        for (std::size_t j = 0; j < np; ++j) prem.push_back(inst.values[rng.below(n)]);
        r.premises = make_handle_set(prem);
        r.conclusion = inst.values[rng.below(n)];
        if (std::binary_search(r.premises.begin(), r.premises.end(), r.conclusion)) continue;
        inst.rules.push_back(std::move(r));
    }
    std::vector<ValueHandle> draws;
    for (auto v : inst.values)
        if (rng.chance(1, 2)) draws.push_back(v);
    if (draws.empty()) draws.push_back(inst.values[0]);
    inst.draws = make_handle_set(draws);
    return inst;
}

inline OscarState state_from_draws(const HandleSet& draws) {
    OscarState st;
    st.draws = draws;
    st.known.insert(draws.begin(), draws.end());
    return st;
}

}  // namespace kflow::test

#endif
