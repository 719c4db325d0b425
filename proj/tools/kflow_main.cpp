#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "kflow/dsl.hpp"
#include "kflow/engine.hpp"

namespace {

constexpr int kExitSecure = 0;
constexpr int kExitAttack = 1;
constexpr int kExitError = 2;

std::optional<std::string> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// A protocol argument is a built-in name or a path to a .kf file.
std::optional<kflow::ProtocolSpec> load_protocol(const std::string& arg, std::string& err) {
    if (auto builtin = kflow::find_builtin(arg)) return builtin;
    if (arg.find('/') != std::string::npos || arg.find(".kf") != std::string::npos) {
        auto text = read_file(arg);
        if (!text) {
            err = "cannot read " + arg;
            return std::nullopt;
        }
        kflow::ParseResult res = kflow::parse_protocol(*text, arg);
        if (!res.ok()) {
            std::ostringstream out;
            for (const auto& d : res.diagnostics) out << arg << ": " << d.to_string() << "\n";
            err = out.str();
            return std::nullopt;
        }
        return res.spec;
    }
    err = "unknown protocol '" + arg + "' (try `kflow list` or pass a .kf file)";
    return std::nullopt;
}

bool write_output(const std::string& path, const std::string& content, std::string& err) {
    if (path == "-") {
        std::cout << content;
        return true;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        err = "cannot write " + path;
        return false;
    }
    out << content;
    return true;
}

void dump_universes(const kflow::ProtocolSpec& spec, const kflow::AnalyzeConfig& cfg,
                    std::ostream& out) {
    kflow::ValueTable scratch;
    kflow::Scenario sc = kflow::make_scenario(scratch, spec, cfg.honest, cfg.sessions);
    auto sets = kflow::enumerate_binding_sets(spec, sc);
    for (std::size_t i = 0; i < sets.size(); ++i) {
        out << "# binding set " << i << ":";
        for (const auto& rb : sets[i]) {
            out << " [";
            for (std::size_t r = 0; r < rb.size(); ++r) {
                if (r) out << " ";
                out << spec.roles[r].name << "=" << sc.principals[rb[r]].name;
            }
            out << "]";
        }
        out << "\n";
        kflow::PreparedRun run = kflow::prepare_run(spec, cfg, sets[i]);
        std::vector<std::string> lines;
        for (auto v : run.universe.values) lines.push_back(run.table->render(v));
        std::sort(lines.begin(), lines.end());
        for (const auto& l : lines) out << l << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kflow: knowledge-flow security protocol analyzer"};
    app.require_subcommand(1);

    // Accepted for forward compatibility; the engine is deterministic and
    // ignores it.
    (void)std::getenv("KFLOW_SEED");

    std::string protocol;
    int sessions = 1;
    int honest = 2;
    int jobs = 0;
    std::size_t max_universe = 10000;
    std::string json_path, dot_path;
    bool dump_flag = false;

    CLI::App* analyze = app.add_subcommand("analyze", "analyze a protocol for attacks");
    analyze->add_option("--protocol", protocol, "built-in name or .kf file")->required();
    analyze->add_option("--sessions", sessions, "parallel session bound w")
        ->check(CLI::Range(1, 8));
    analyze->add_option("--honest", honest, "number of honest principals")->check(CLI::Range(1, 8));
    analyze->add_option("--json", json_path, "write the JSON report here ('-' for stdout)");
    analyze->add_option("--dot", dot_path, "write the attack slice as a DOT digraph");
    analyze->add_option("--jobs", jobs, "parallel workers (default: hardware)");
    analyze->add_option("--max-universe", max_universe, "hard cap on universe size")
        ->check(CLI::PositiveNumber);
    analyze->add_flag("--dump-universe", dump_flag, "print every explored universe to stdout");

    CLI::App* list = app.add_subcommand("list", "list built-in protocols");

    std::string parse_path;
    bool check_only = false;
    CLI::App* parse = app.add_subcommand("parse", "parse a .kf protocol file");
    parse->add_option("file", parse_path, "protocol file")->required();
    parse->add_flag("--check", check_only, "validate only, print nothing on success");

    CLI::App* dump = app.add_subcommand("dump-universe", "print the value universe per binding");
    dump->add_option("--protocol", protocol, "built-in name or .kf file")->required();
    dump->add_option("--sessions", sessions, "parallel session bound w")->check(CLI::Range(1, 8));
    dump->add_option("--honest", honest, "number of honest principals")->check(CLI::Range(1, 8));
    dump->add_option("--max-universe", max_universe, "hard cap on universe size")
        ->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitSecure : kExitError;
    }

    try {
        if (list->parsed()) {
            for (const auto& name : kflow::builtin_protocol_names()) {
                auto spec = kflow::find_builtin(name);
                std::printf("%-14s %s\n", name.c_str(), spec->description.c_str());
            }
            return kExitSecure;
        }

        if (parse->parsed()) {
            auto text = read_file(parse_path);
            if (!text) {
                std::cerr << "error: cannot read " << parse_path << "\n";
                return kExitError;
            }
            kflow::ParseResult res = kflow::parse_protocol(*text, parse_path);
            if (!res.ok()) {
                for (const auto& d : res.diagnostics)
                    std::cerr << parse_path << ": " << d.to_string() << "\n";
                return kExitError;
            }
            if (!check_only)
                std::printf("protocol %s: %zu roles, %zu rules, theorem %s\n",
                            res.spec.name.c_str(), res.spec.roles.size(), res.spec.schemas.size(),
                            res.spec.theorem.label.c_str());
            return kExitSecure;
        }

        std::string err;
        auto spec = load_protocol(protocol, err);
        if (!spec) {
            std::cerr << "error: " << err << "\n";
            return kExitError;
        }

        kflow::AnalyzeConfig cfg;
        cfg.sessions = sessions;
        cfg.honest = honest;
        cfg.max_universe = max_universe;
        cfg.jobs = jobs > 0 ? jobs
                            : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

        if (dump->parsed()) {
            dump_universes(*spec, cfg, std::cout);
            return kExitSecure;
        }

        if (dump_flag) dump_universes(*spec, cfg, std::cout);
        kflow::Report report = kflow::analyze(*spec, cfg);
        std::printf(
            "%s  sessions=%d honest=%d bindings=%d universe=%zu per-session=%zu  [%lld ms]\n",
            report.verdict.c_str(), report.sessions, report.honest, report.bindings_explored,
            report.universe_values, report.per_session_values, report.ms);
        for (const auto& [var, value] : report.witness)
            std::printf("  witness %s = %s\n", var.c_str(), value.c_str());
        for (const auto& s : report.trace) {
            std::printf("  %s  <-[%s]", s.value.c_str(), s.rule.c_str());
            for (const auto& p : s.premises) std::printf("  %s", p.c_str());
            std::printf("\n");
        }
        if (!json_path.empty() && !write_output(json_path, kflow::report_to_json(report), err)) {
            std::cerr << "error: " << err << "\n";
            return kExitError;
        }
        if (!dot_path.empty() && !write_output(dot_path, kflow::trace_to_dot(report), err)) {
            std::cerr << "error: " << err << "\n";
            return kExitError;
        }
        return report.attack ? kExitAttack : kExitSecure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
}
