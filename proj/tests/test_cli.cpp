#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>

#include <json.hpp>

#include "red/expression.hpp"

#ifdef RED_CLI_BINARY

namespace {

struct CommandResult {
    int exit_code = -1;
    std::string output; // stdout only
};

CommandResult run_cli(const std::string& args) {
    const std::string command = std::string(RED_CLI_BINARY) + " " + args + " 2>/dev/null";
    CommandResult result;
    FILE* pipe = popen(command.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> chunk{};
    std::size_t n = 0;
    while ((n = fread(chunk.data(), 1, chunk.size(), pipe)) > 0) {
        result.output.append(chunk.data(), n);
    }
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

std::string write_fig1_csv() {
    const std::string path = "cli-fig1.csv";
    std::ofstream out(path);
    out << "x0,x1,y\n";
    std::uint64_t state = 99;
    auto uniform = [&state]() {
        state = state * 6364136223846793005ULL + 1442695040888963407ULL;
        return -2.0 + 4.0 * static_cast<double>(state >> 11) / 9007199254740992.0;
    };
    for (int i = 0; i < 240; ++i) {
        const double x0 = uniform();
        const double x1 = uniform();
        const double y = std::pow(x1, 6.0) + std::sin(x1);
        out << red::format_double(x0) << ',' << red::format_double(x1) << ','
            << red::format_double(y) << "\n";
    }
    return path;
}

int count_lines(const std::string& text) {
    int lines = 0;
    for (char c : text) {
        lines += c == '\n' ? 1 : 0;
    }
    return lines;
}

} // namespace

TEST_CASE("cli inspect prints the node table and residual list") {
    const CommandResult r = run_cli("inspect --eq \"sin(x0)*x0+ln(x1^2)\"");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("equation: sin(x0) * x0 + ln(x1 ^ 2)") != std::string::npos);
    CHECK(r.output.find("residual_list: 2 3 4 5 6 8 9") != std::string::npos);
    // Header + 10 node rows + equation line + list line.
    CHECK(count_lines(r.output) == 13);
}

TEST_CASE("cli inspect emits machine-readable records") {
    const CommandResult r = run_cli("inspect --eq \"x0 + 1\" --json");
    CHECK(r.exit_code == 0);
    const auto record = nlohmann::json::parse(r.output);
    CHECK(record["equation"] == "x0 + 1");
    CHECK(record["nodes"].size() == 4);
    CHECK(record["residual_list"].size() == 2);
}

TEST_CASE("cli fit on a one-row table reports a data error") {
    {
        std::ofstream out("cli-tiny.csv");
        out << "x0,y\n1,2\n";
    }
    const CommandResult r = run_cli("fit --data cli-tiny.csv");
    CHECK(r.exit_code == 2);
}

TEST_CASE("cli rejects unknown flags and subcommands") {
    CHECK(run_cli("inspect --eq x0 --frobnicate").exit_code == 1);
    CHECK(run_cli("nonsense").exit_code == 1);
    CHECK(run_cli("red --data missing.csv").exit_code == 1); // --init missing
}

TEST_CASE("cli fit solves the identity table") {
    {
        std::ofstream out("cli-line.csv");
        out << "x0,y\n";
        for (int i = 0; i < 40; ++i) {
            const double x = -5.0 + 0.25 * static_cast<double>(i);
            out << red::format_double(x) << ',' << red::format_double(2.0 * x) << "\n";
        }
    }
    const CommandResult r =
        run_cli("fit --data cli-line.csv --seed 1 --gp-population 200 --gp-generations 10 --json");
    CHECK(r.exit_code == 0);
    const auto record = nlohmann::json::parse(r.output);
    CHECK(record["test_mse"].get<double>() < 1e-6);
}

TEST_CASE("cli refinement run completes and reports a refined equation") {
    const std::string data = write_fig1_csv();
    const CommandResult r = run_cli("red --data " + data +
                                    " --init \"x1^6 + x1\" --max-iter 10 --threshold 0.001"
                                    " --seed 0 --json");
    CHECK(r.exit_code == 0);
    // One record per iteration plus the final summary line.
    std::istringstream lines(r.output);
    std::string line;
    std::string last;
    while (std::getline(lines, line)) {
        if (!line.empty()) {
            last = line;
        }
    }
    const auto final_record = nlohmann::json::parse(last);
    CHECK(final_record["val_mse"].get<double>() <=
          final_record["initial_val_mse"].get<double>());
    const std::string refined = final_record["equation"].get<std::string>();
    CHECK(refined.find("sin") != std::string::npos);
    CHECK(final_record["test_mse"].get<double>() < 0.001);
}

TEST_CASE("cli refinement is deterministic under a fixed seed") {
    const std::string data = write_fig1_csv();
    const std::string args = "red --data " + data +
                             " --init \"x1^6 + 0.5\" --max-iter 4 --seed 7"
                             " --gp-population 150 --gp-generations 8 --json";
    const CommandResult a = run_cli(args);
    const CommandResult b = run_cli(args);
    CHECK(a.exit_code == 0);
    CHECK(a.output == b.output);
}

TEST_CASE("cli residual prints the target as CSV") {
    const std::string data = write_fig1_csv();
    // Node 3 of "x1^6 + x1": the second plus child; the residual equals
    // y - x1^6 = sin(x1).
    const CommandResult r = run_cli("residual --data " + data + " --eq \"x1^6 + x1\" --node 3");
    CHECK(r.exit_code == 0);
    CHECK(r.output.rfind("y_res,valid\n", 0) == 0);
    CHECK(count_lines(r.output) == 241);

    const CommandResult bad = run_cli("residual --data " + data + " --eq \"x1^6 + x1\" --node 77");
    CHECK(bad.exit_code == 2);
    const CommandResult root = run_cli("residual --data " + data + " --eq \"x1^6 + x1\" --node 1");
    CHECK(root.exit_code == 2);
}

TEST_CASE("cli bench runs a small experiment end to end") {
    {
        std::ofstream corpus("cli-corpus.tsv");
        corpus << "line\t2 * x0\tx0:-5:5\n";
        corpus << "wiggle\tsin(x0) * x0 + ln(x1 ^ 2)\tx0:-5:5,x1:1:5\n";
    }
    {
        std::ofstream config("cli-bench.json");
        config << R"({
            "corpus": "cli-corpus.tsv",
            "rows": 60,
            "seeds": [0],
            "methods": ["classic", "red", "refit"],
            "gp": {"population_size": 80, "generations": 6, "tournament_size": 4},
            "red": {"max_iterations": 3}
        })";
    }
    const CommandResult r = run_cli("bench --config cli-bench.json --out cli-bench-out --jobs 2");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("method,attempted,completed,gated") != std::string::npos);
    for (const char* name : {"raw.jsonl", "report.csv", "win_ratio.csv"}) {
        std::ifstream in(std::string("cli-bench-out/") + name);
        CHECK(in.good());
    }

    const CommandResult missing = run_cli("bench --config does-not-exist.json");
    CHECK(missing.exit_code == 2);
}

#endif // RED_CLI_BINARY
