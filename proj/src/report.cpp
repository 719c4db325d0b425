#include <algorithm>
#include <set>
#include <sstream>

#include "json.hpp"
#include "kflow/engine.hpp"

namespace kflow {

std::string report_to_json(const Report& report) {
    nlohmann::ordered_json j;
    j["protocol"] = report.protocol;
    j["sessions"] = report.sessions;
    j["bindings_explored"] = report.bindings_explored;
    j["verdict"] = report.verdict;
    nlohmann::ordered_json witness = nlohmann::ordered_json::array();
    for (const auto& [var, value] : report.witness)
        witness.push_back({{"var", var}, {"value", value}});
    j["witness"] = std::move(witness);
    nlohmann::ordered_json trace = nlohmann::ordered_json::array();
    for (const auto& s : report.trace)
        trace.push_back({{"value", s.value}, {"premises", s.premises}, {"rule", s.rule}});
    j["trace"] = std::move(trace);
    j["ms"] = report.ms;
    return j.dump(2) + "\n";
}

namespace {

std::string dot_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

}  // namespace

std::string trace_to_dot(const Report& report) {
    std::set<std::string> nodes;
    std::set<std::string> edges;
    for (const auto& s : report.trace) {
        nodes.insert(s.value);
        for (const auto& p : s.premises) {
            nodes.insert(p);
            edges.insert("  \"" + dot_escape(p) + "\" -> \"" + dot_escape(s.value) +
                         "\" [label=\"" + dot_escape(s.rule) + "\"];\n");
        }
    }
    std::ostringstream out;
    out << "digraph attack {\n";
    out << "  rankdir=LR;\n";
    out << "  node [shape=box, fontsize=10];\n";
    for (const auto& n : nodes) out << "  \"" << dot_escape(n) << "\";\n";
    for (const auto& e : edges) out << e;
    out << "}\n";
    return out.str();
}

}  // namespace kflow
