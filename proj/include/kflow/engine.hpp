#ifndef KFLOW_ENGINE_HPP
#define KFLOW_ENGINE_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kflow/model.hpp"
#include "kflow/protocols.hpp"
#include "kflow/rules.hpp"

namespace kflow {

struct MissingDerivation : Error {
    using Error::Error;
};

struct Witness {
    std::vector<std::pair<std::string, ValueHandle>> values;     // var -> value
    std::vector<std::pair<std::string, int>> principals;         // pvar -> principal index
};

struct TraceStep {
    ValueHandle value;
    HandleSet premises;
    std::string rule;
};

/// Minimal backward slice of the learns DAG from the witness values down to
/// Oscar's draws, topologically ordered.
struct AttackTrace {
    std::vector<TraceStep> steps;
    Witness witness;
};

/// One application of the projection operator: everything derivable from the
/// current knowledge in a single parallel round.
OscarState step(const OscarState& state, const std::vector<GroundRule>& rules,
                const ValueTable& table);

/// Least fixed point of step containing the initial knowledge. Semi-naive:
/// a rule is re-examined only when one of its premises is newly derived.
OscarState saturate(OscarState state, const std::vector<GroundRule>& rules,
                    const ValueTable& table);

std::optional<Witness> check_theorem(const OscarState& state, const TheoremSpec& thm,
                                     const Scenario& scenario, const Universe& universe);

AttackTrace extract_trace(const OscarState& state, const Witness& witness,
                          const ValueTable& table);

struct AnalyzeConfig {
    int honest = 2;
    int sessions = 1;
    std::size_t max_universe = 10000;
    int jobs = 1;
};

struct Report {
    std::string protocol;
    int sessions = 1;
    int honest = 2;
    bool attack = false;
    std::string verdict;  // "Attack" or "Secure(w)"
    int bindings_explored = 0;
    std::vector<std::pair<std::string, std::string>> witness;  // var -> rendered value
    struct Step {
        std::string value;
        std::vector<std::string> premises;
        std::string rule;
    };
    std::vector<Step> trace;
    std::size_t universe_values = 0;   // deciding run
    std::size_t per_session_values = 0;
    long long ms = 0;
};

/// Everything needed to analyze one binding set; the table owns every value
/// the run touches.
struct PreparedRun {
    std::unique_ptr<ValueTable> table;
    Scenario scenario;
    BindingSet bindings;
    Universe universe;
    std::vector<GroundRule> rules;
    OscarState initial;
};

PreparedRun prepare_run(const ProtocolSpec& spec, const AnalyzeConfig& cfg,
                        const BindingSet& bindings);

/// Enumerates role bindings for all sessions, analyzes each (optionally in
/// parallel), and reports the first attack in enumeration order, else
/// Secure(w). Deterministic for fixed inputs regardless of job count.
Report analyze(const ProtocolSpec& spec, const AnalyzeConfig& cfg);

std::string report_to_json(const Report& report);
std::string trace_to_dot(const Report& report);

}  // namespace kflow

#endif
