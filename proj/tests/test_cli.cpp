#include "catch_amalgamated.hpp"

#include "cli.hpp"
#include "mission/mission.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using mission::cli::dispatch;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = dispatch(args, out, err);
    return {code, out.str(), err.str()};
}

std::string tmp(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("mission_cli_" + name)).string();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream(path, std::ios::binary | std::ios::trunc) << text;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

const char* kScenario = R"({
  "version": 1, "seed": 42,
  "contract": {"success_threshold": 0.0, "tau_ss": 0.9, "tau_uu": 0.6, "p1": 0.8},
  "events": [{"at_task": 6, "kind": "civilians_detected"}],
  "mc2_abort_response": {"response": "grant", "latency_tasks": 0}
})";

}  // namespace

TEST_CASE("chain eval", "[cli]") {
    auto r = run({"chain", "eval", "--tau-ss", "0.9", "--tau-uu", "0.6", "--p1", "1.0", "--n", "3"});
    CHECK(r.code == 0);
    CHECK(r.out == "0.85\n");
    for (const char* m : {"recurrence", "rho"}) {
        r = run({"chain", "eval", "--tau-ss", "0.9", "--tau-uu", "0.6", "--p1", "1.0", "--n", "3", "--method", m});
        CHECK(r.out == "0.85\n");
    }
    r = run({"chain", "eval", "--tau-ss", "0.9", "--tau-uu", "0.6", "--n", "3", "--format", "csv"});
    CHECK(r.code == 0);
    CHECK(r.out == "n,given_first_successful,given_first_incomplete\n3,0.85,0.6\n");

    r = run({"--format", "json-lines", "chain", "eval", "--tau-ss", "0.9", "--tau-uu", "0.6", "--p1", "0.8", "--n", "5"});
    CHECK(nlohmann::json::parse(r.out).at("probability").get<double>() == Catch::Approx(0.8));
}

TEST_CASE("chain domain errors exit 1 with the error name", "[cli]") {
    auto r = run({"chain", "eval", "--tau-ss", "1", "--tau-uu", "1", "--p1", "1", "--n", "3"});
    CHECK(r.code == 1);
    CHECK(starts_with(r.err, "DegenerateKernel:"));
    r = run({"chain", "eval", "--tau-ss", "0.9", "--tau-uu", "0.6", "--p1", "1.5", "--n", "3"});
    CHECK(r.code == 1);
    CHECK(starts_with(r.err, "InvalidArgument:"));

    const auto log = tmp("runs.txt");
    write_file(log, "s s s s\n");
    r = run({"chain", "estimate", "--log", log});
    CHECK(r.code == 1);
    CHECK(starts_with(r.err, "InsufficientData:"));
    write_file(log, "s u s\nu u s\n");
    r = run({"chain", "estimate", "--log", log, "--format", "csv"});
    CHECK(r.code == 0);
    CHECK(r.out.find("0,0.333333333333") != std::string::npos);
    write_file(log, "s q\n");
    r = run({"chain", "estimate", "--log", log});
    CHECK(starts_with(r.err, "MalformedFile:"));
    std::filesystem::remove(log);
    r = run({"chain", "estimate", "--log", log});
    CHECK(starts_with(r.err, "IoError:"));
}

TEST_CASE("chain mc and limit", "[cli]") {
    auto a = run({"chain", "mc", "--tau-ss", "0.9", "--tau-uu", "0.6", "--p1", "1", "--n", "3", "--samples", "100000",
                  "--seed", "5", "--format", "csv"});
    auto b = run({"--seed", "5", "chain", "mc", "--tau-ss", "0.9", "--tau-uu", "0.6", "--p1", "1", "--n", "3",
                  "--samples", "100000", "--format", "csv"});
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
    auto r = run({"chain", "limit", "--tau-ss", "0.4", "--tau-uu", "0.1"});
    CHECK(r.out == "0.6\n");
}

TEST_CASE("seed falls back to the environment", "[cli]") {
    const std::vector<std::string> args{"splits", "--n", "20", "--k", "4"};
    ::setenv("MISSION_CHAIN_SEED", "9", 1);
    const auto env = run(args);
    ::unsetenv("MISSION_CHAIN_SEED");
    auto flag_args = args;
    flag_args.insert(flag_args.end(), {"--seed", "9"});
    CHECK(env.out == run(flag_args).out);
    CHECK(env.out != run(args).out);
    ::setenv("MISSION_CHAIN_SEED", "nine", 1);
    CHECK(run(args).code == 2);
    ::unsetenv("MISSION_CHAIN_SEED");
}

TEST_CASE("usage errors exit 2", "[cli]") {
    CHECK(run({}).code == 2);
    CHECK(run({"fly"}).code == 2);
    CHECK(run({"chain", "eval", "--tau-ss", "0.9"}).code == 2);
    CHECK(run({"chain", "eval", "--tau-ss", "x", "--tau-uu", "0.6", "--n", "2"}).code == 2);
    CHECK(run({"splits", "--n", "10", "--k", "2", "--format", "xml"}).code == 2);
    const auto r = run({"chain"});
    CHECK(r.code == 2);
    CHECK(r.err.find("Usage") != std::string::npos);
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("simulate, replay and bbx", "[cli]") {
    const auto scenario = tmp("scenario.json"), ledger = tmp("ledger.bbx"), ledger2 = tmp("ledger2.bbx");
    write_file(scenario, kScenario);
    auto sim1 = run({"simulate", "--scenario", scenario, "--ledger-out", ledger});
    auto sim2 = run({"simulate", "--scenario", scenario, "--ledger-out", ledger2});
    REQUIRE(sim1.code == 0);
    CHECK(read_file(ledger) == read_file(ledger2));
    const auto head = nlohmann::json::parse(sim1.out.substr(0, sim1.out.find('\n')));
    CHECK(head.at("ledger_status") == "Valid");

    auto rep = run({"replay", "--ledger", ledger});
    CHECK(rep.code == 0);
    CHECK(rep.out == sim1.out);

    auto ver = run({"bbx", "verify", "--ledger", ledger});
    CHECK(ver.code == 0);
    CHECK(ver.out == "Valid\n");

    // Flip one payload character of the fourth record.
    std::string text = read_file(ledger);
    std::size_t pos = 0;
    for (int i = 0; i < 4; ++i) pos = text.find('\n', pos) + 1;
    pos = text.find("payload_base64\":\"", pos) + 17;
    text[pos + 2] = text[pos + 2] == 'A' ? 'B' : 'A';
    write_file(ledger2, text);
    ver = run({"bbx", "verify", "--ledger", ledger2});
    CHECK(ver.code == 1);
    CHECK(ver.out == "BrokenAt(3)\n");
    rep = run({"replay", "--ledger", ledger2});
    CHECK(rep.code == 1);
    CHECK(starts_with(rep.err, "TamperedLedger: BrokenAt(3)"));

    write_file(ledger2, text.substr(0, text.size() / 2));
    ver = run({"bbx", "verify", "--ledger", ledger2});
    CHECK(ver.code == 1);
    CHECK(starts_with(ver.err, "MalformedFile:"));

    auto dec = run({"bbx", "decoy", "--ledger", ledger, "--out", ledger2, "--seed", "3"});
    CHECK(dec.code == 0);
    CHECK(run({"bbx", "verify", "--ledger", ledger2}).code == 0);
    CHECK(run({"replay", "--ledger", ledger2}).code == 0);

    auto zer = run({"bbx", "zeroize", "--ledger", ledger2});
    CHECK(zer.code == 0);
    ver = run({"bbx", "verify", "--ledger", ledger2});
    CHECK(ver.out == "BrokenAt(0)\n");
    CHECK(ver.code == 1);

    write_file(scenario, R"({"version": 1, "seed": 1, "contract": {"success_threshold": 0.5, "tau_ss": 0.9, "tau_uu": 0.6, "p1": 0.8}, "events": [{"at_task": 9, "kind": "civilians_detected"}]})");
    auto bad = run({"simulate", "--scenario", scenario, "--ledger-out", ledger});
    CHECK(bad.code == 1);
    CHECK(starts_with(bad.err, "InvalidScenario:"));

    for (const auto& p : {scenario, ledger, ledger2}) std::filesystem::remove(p);
}

TEST_CASE("gen-data and output redirection", "[cli]") {
    const auto csv = tmp("data.csv"), summary = tmp("summary.csv");
    auto r = run({"gen-data", "--rows", "700", "--seed", "4", "--out", csv, "--output", summary});
    CHECK(r.code == 0);
    CHECK(r.out.empty());
    const std::string s = read_file(summary);
    CHECK(starts_with(s, "path,rows_written,positive_count,file_digest\n"));
    CHECK(s.find(mission::file_sha256_hex(csv)) != std::string::npos);
    auto again = run({"gen-data", "--rows", "700", "--seed", "4", "--out", csv});
    CHECK(again.out == s);
    r = run({"gen-data", "--rows", "0", "--out", csv});
    CHECK(r.code == 1);
    CHECK(run({"gen-data", "--rows", "5", "--out", "/nonexistent-dir/x.csv"}).err.rfind("IoError:", 0) == 0);
    std::filesystem::remove(csv);
    std::filesystem::remove(summary);
}

TEST_CASE("metrics and splits", "[cli]") {
    const auto pred = tmp("pred.csv");
    write_file(pred, "label,prediction,score\n1,1,0.9\n0,1,0.6\n0,0,0.2\n1,0,0.4\n");
    auto r = run({"metrics", "--pred", pred});
    CHECK(r.code == 0);
    CHECK(r.out == "accuracy,precision,recall,f1,roc_auc,tn,fp,fn,tp\n0.5,0.5,0.5,0.5,0.75,1,1,1,1\n");

    write_file(pred, "1,1\n1,0\n");
    r = run({"metrics", "--pred", pred, "--format", "json-lines"});
    CHECK(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j.at("roc_auc").is_null());
    write_file(pred, "1,1,0.2\n1,0,0.1\n");
    r = run({"metrics", "--pred", pred});
    CHECK(starts_with(r.err, "SingleClass:"));
    write_file(pred, "1,1,0.2\n");
    write_file(pred, "");
    CHECK(starts_with(run({"metrics", "--pred", pred}).err, "EmptyInput:"));
    write_file(pred, "0,0\n");
    r = run({"metrics", "--pred", pred});
    CHECK(r.code == 0);
    CHECK(r.out.find("undefined") != std::string::npos);
    std::filesystem::remove(pred);

    r = run({"splits", "--n", "7", "--k", "5", "--seed", "1"});
    CHECK(r.code == 0);
    CHECK(starts_with(r.out, "fold,index\n"));
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 8);
    r = run({"splits", "--n", "3", "--k", "5"});
    CHECK(r.code == 1);
    CHECK(starts_with(r.err, "BadFoldCount:"));
}

TEST_CASE("the installed binary behaves like dispatch", "[cli][process]") {
    const std::string out = tmp("proc.txt");
    const std::string cmd = std::string(MISSION_CLI_PATH) +
                            " chain eval --tau-ss 0.9 --tau-uu 0.6 --p1 1.0 --n 3 > " + out;
    const int status = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(status) == 0);
    CHECK(read_file(out) == "0.85\n");
    const int bad = std::system((std::string(MISSION_CLI_PATH) + " chain eval --tau-ss 1 --tau-uu 1 --p1 1 --n 3 2>/dev/null").c_str());
    CHECK(WEXITSTATUS(bad) == 1);
    const int usage = std::system((std::string(MISSION_CLI_PATH) + " nonsense 2>/dev/null").c_str());
    CHECK(WEXITSTATUS(usage) == 2);
    std::filesystem::remove(out);
}
