#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"

#ifndef KFLOW_CLI_PATH
#define KFLOW_CLI_PATH "kflow"
#endif
#ifndef KFLOW_SOURCE_DIR
#define KFLOW_SOURCE_DIR "."
#endif

namespace {

int run(const std::string& args) {
    std::string cmd = std::string(KFLOW_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("exit codes") {
    CHECK(run("list") == 0);
    CHECK(run("analyze --protocol ns --sessions 1") == 1);          // attack
    CHECK(run("analyze --protocol nsl --sessions 1") == 0);         // secure
    CHECK(run("analyze --protocol nonesuch") == 2);                 // usage error
    CHECK(run("analyze") == 2);                                     // missing flag
    CHECK(run("bogus-subcommand") == 2);
    CHECK(run("analyze --protocol cpuf_renewal --sessions 1 --dump-universe") == 0);
    CHECK(run(std::string("parse ") + KFLOW_SOURCE_DIR + "/protocols/ns.kf --check") == 0);
    CHECK(run("parse /nonexistent.kf --check") == 2);
}

TEST_CASE("parse rejects malformed input with exit 2") {
    std::string tmp = "/tmp/kflow_bad.kf";
    std::ofstream(tmp) << "protocol broken {";
    CHECK(run("parse " + tmp + " --check") == 2);
}

TEST_CASE("json reports are byte-identical outside the timing field") {
    std::string a = "/tmp/kflow_a.json", b = "/tmp/kflow_b.json";
    REQUIRE(run("analyze --protocol ns --sessions 1 --jobs 2 --json " + a) == 1);
    REQUIRE(run("analyze --protocol ns --sessions 1 --jobs 7 --json " + b) == 1);
    nlohmann::json ja = nlohmann::json::parse(slurp(a));
    nlohmann::json jb = nlohmann::json::parse(slurp(b));
    CHECK(ja.contains("ms"));
    ja.erase("ms");
    jb.erase("ms");
    CHECK(ja.dump() == jb.dump());
}

TEST_CASE("dot output holds the attack slice") {
    std::string dot = "/tmp/kflow_attack.dot";
    REQUIRE(run("analyze --protocol ns --sessions 1 --dot " + dot) == 1);
    std::string text = slurp(dot);
    CHECK(text.find("digraph attack") != std::string::npos);
    CHECK(text.find("ns2") != std::string::npos);
}

TEST_CASE("dump-universe lists values sorted one per line") {
    std::string out = "/tmp/kflow_universe.txt";
    std::string cmd = std::string(KFLOW_CLI_PATH) +
                      " dump-universe --protocol cpuf_renewal --sessions 1 > " + out + " 2>&1";
    REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    std::string text = slurp(out);
    CHECK(text.find("# binding set 0") != std::string::npos);
    CHECK(text.find("hash{presecret#1}") != std::string::npos);
    std::istringstream lines(text);
    std::string prev, line;
    while (std::getline(lines, line)) {
        if (line.rfind("#", 0) == 0) {
            prev.clear();
            continue;
        }
        if (!prev.empty()) CHECK(prev < line);
        prev = line;
    }
}

TEST_CASE("KFLOW_SEED is accepted and ignored") {
    std::string a = "/tmp/kflow_seed_a.json", b = "/tmp/kflow_seed_b.json";
    std::string base = std::string(KFLOW_CLI_PATH) + " analyze --protocol ns --sessions 1 --json ";
    REQUIRE(WEXITSTATUS(std::system(("KFLOW_SEED=1 " + base + a + " >/dev/null 2>&1").c_str())) == 1);
    REQUIRE(WEXITSTATUS(std::system(("KFLOW_SEED=99 " + base + b + " >/dev/null 2>&1").c_str())) == 1);
    nlohmann::json ja = nlohmann::json::parse(slurp(a));
    nlohmann::json jb = nlohmann::json::parse(slurp(b));
    ja.erase("ms");
    jb.erase("ms");
    CHECK(ja.dump() == jb.dump());
}
