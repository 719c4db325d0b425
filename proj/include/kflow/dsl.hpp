#ifndef KFLOW_DSL_HPP
#define KFLOW_DSL_HPP

#include <string>
#include <variant>
#include <vector>

#include "kflow/protocols.hpp"

namespace kflow {

struct SourceSpan {
    int line = 1;
    int col_start = 1;
    int col_end = 1;
};

enum class DiagSeverity { Error, Warning };

struct ParseDiagnostic {
    DiagSeverity severity = DiagSeverity::Error;
    std::string code;  // SyntaxError, UnboundVariable, UnknownPrimitive, DuplicateRuleLabel
    std::string message;
    SourceSpan span;

    std::string to_string() const;
};

struct ParseResult {
    std::vector<ParseDiagnostic> diagnostics;
    ProtocolSpec spec;  // valid only when ok()

    bool ok() const { return diagnostics.empty(); }
};

/// Parses a protocol document. Never throws on malformed input: any byte
/// sequence yields either a spec or diagnostics.
ParseResult parse_protocol(const std::string& text, const std::string& filename = "<input>");

/// Deterministic textual form; parse_protocol(render_protocol(s)) is
/// structurally equal to s.
std::string render_protocol(const ProtocolSpec& spec);

}  // namespace kflow

#endif
