#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "gapmpcc/cli.hpp"

using namespace gapmpcc;

namespace {

struct CliRun {
    int code = -1;
    std::string out, err;
};

CliRun run(std::vector<std::string> args) {
    args.insert(args.begin(), "gapmpcc");
    std::vector<const char *> argv;
    for (const auto &a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    CliRun r;
    r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string temp_path(const std::string &stem) {
    return (std::filesystem::temp_directory_path() / ("gapmpcc_cli_" + stem + ".json")).string();
}

std::string problem_file(const char *name) {
    return (std::filesystem::path(GAPMPCC_PROBLEM_DIR) / name).string();
}

std::string line_value(const std::string &text, const std::string &key) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        if (line.rfind(key, 0) == 0)
            return line.substr(key.size());
    return {};
}

} // namespace

TEST(CliSolve, ScholtesIsStrong) {
    const CliRun r = run({"solve", "--builtin", "scholtes_toy"});
    EXPECT_EQ(r.code, exit_code::strong) << r.err;
    EXPECT_EQ(line_value(r.out, "status: "), "strong");
    EXPECT_NE(r.out.find("kkt_res"), std::string::npos);
    EXPECT_NE(r.out.find("class: strong"), std::string::npos);
}

TEST(CliSolve, JsonMatchesPrintedValuesExactly) {
    const std::string path = temp_path("report");
    const CliRun r = run({"solve", "--problem", problem_file("constrained_toy.json"), "--json", path});
    ASSERT_EQ(r.code, exit_code::strong) << r.err;
    std::ifstream in(path);
    nlohmann::json j;
    in >> j;
    std::filesystem::remove(path);
    const double printed = std::stod(line_value(r.out, "J: "));
    EXPECT_EQ(j["final"]["J"].get<double>(), printed);
    EXPECT_NEAR(printed, 1.5, 1e-6);
    EXPECT_EQ(j["status"], "strong");
    EXPECT_EQ(j["final"]["class"], "strong");
    EXPECT_EQ(j["gap"]["a"], 1.0);
    EXPECT_EQ(j["gap"]["b"], 2.0);
    ASSERT_FALSE(j["iterations"].empty());
    for (const char *k : {"k", "mu", "phi", "h_norm", "kkt_res", "inner_iters"})
        EXPECT_TRUE(j["iterations"][0].contains(k)) << k;
    for (const char *k : {"z", "u", "v", "w", "licq", "ulsc", "second_order_min"})
        EXPECT_TRUE(j["final"].contains(k)) << k;
}

TEST(CliSolve, TwoPairInstanceReachesOracleValue) {
    const CliRun r = run({"solve", "--problem", problem_file("two_pair_coupled.json")});
    EXPECT_EQ(r.code, exit_code::strong) << r.out;
    EXPECT_NEAR(std::stod(line_value(r.out, "J: ")), -3.0, 1e-6);
}

TEST(CliSolve, SaddleFailsInside) {
    const CliRun r = run({"solve", "--builtin", "bilinear_saddle", "--z0", "1,1"});
    EXPECT_EQ(r.code, exit_code::inner_failure);
    EXPECT_NE(line_value(r.out, "status: "), "strong");
}

TEST(CliSolve, StallIsReported) {
    // Two rounds are not enough to push the gap below 1e-8 from a bad start.
    const CliRun r = run({"solve", "--builtin", "bilinear_min", "--z0", "1,1", "--max-outer", "2"});
    EXPECT_EQ(r.code, exit_code::stalled);
    EXPECT_EQ(line_value(r.out, "status: "), "infeasible_stall");
}

TEST(CliSolve, InputErrors) {
    EXPECT_EQ(run({"solve", "--problem", "/nonexistent/missing.json"}).code, exit_code::input_error);
    EXPECT_EQ(run({"solve"}).code, exit_code::input_error);
    EXPECT_EQ(run({}).code, exit_code::input_error);
    EXPECT_EQ(run({"solve", "--builtin", "nope"}).code, exit_code::input_error);
    EXPECT_EQ(run({"solve", "--builtin", "scholtes_toy", "--problem", problem_file("scholtes_toy.json")}).code,
              exit_code::input_error);
    EXPECT_EQ(run({"solve", "--builtin", "scholtes_toy", "--z0", "1,2,3"}).code, exit_code::input_error);
    EXPECT_EQ(run({"solve", "--builtin", "scholtes_toy", "--z0", "1,x"}).code, exit_code::input_error);
    EXPECT_EQ(run({"solve", "--builtin", "scholtes_toy", "--a", "2", "--b", "1"}).code, exit_code::input_error);
    EXPECT_EQ(run({"solve", "--builtin", "scholtes_toy", "--kappa", "0.5"}).code, exit_code::input_error);
    EXPECT_EQ(run({"solve", "--builtin", "scholtes_toy", "--bogus"}).code, exit_code::input_error);

    const std::string bad = temp_path("asym");
    std::ofstream(bad) << R"({"name":"x","n_x":0,"n_lambda":1,"Q":[[1,0.001],[0,1]],"q":[0,0]})";
    const CliRun r = run({"solve", "--problem", bad});
    std::filesystem::remove(bad);
    EXPECT_EQ(r.code, exit_code::input_error);
    EXPECT_NE(r.err.find("Q[1][0]"), std::string::npos) << r.err;
}

TEST(CliCheck, ScholtesOriginIsClarke) {
    const CliRun r = run({"check", "--builtin", "scholtes_toy", "--z", "0,0", "--v=-2", "--w=-2"});
    EXPECT_EQ(r.code, exit_code::not_strong);
    EXPECT_EQ(line_value(r.out, "class: "), "clarke");
    EXPECT_EQ(line_value(r.out, "ULSC: "), "true");
    EXPECT_EQ(line_value(r.out, "second-order probe min: "), "n/a");
}

TEST(CliCheck, StrongBranchPoint) {
    const CliRun r = run({"check", "--builtin", "scholtes_toy", "--z", "1,0", "--v", "0", "--w=-2"});
    EXPECT_EQ(r.code, exit_code::strong);
    EXPECT_EQ(line_value(r.out, "class: "), "strong");
}

TEST(CliCheck, PointFileAndFittedMultipliers) {
    CliRun r = run({"check", "--builtin", "bilinear_min", "--point", problem_file("bilinear_min_point.json")});
    EXPECT_EQ(r.code, exit_code::strong) << r.err;

    // No multipliers given: the least-squares fit recovers v = w = 1.
    r = run({"check", "--builtin", "bilinear_min", "--z", "0,0"});
    EXPECT_EQ(r.code, exit_code::strong);
    EXPECT_EQ(line_value(r.out, "v: "), "[1]");
}

TEST(CliCheck, PenaltyRootWithMu) {
    const std::string path = temp_path("check");
    const CliRun r = run({"check", "--builtin", "scholtes_toy", "--z", std::to_string(296.0 / 5296.0) + "," +
                                                                      std::to_string(396.0 / 5296.0),
                       "--mu", "100", "--json", path});
    EXPECT_EQ(r.code, exit_code::not_strong);
    std::ifstream in(path);
    nlohmann::json j;
    in >> j;
    std::filesystem::remove(path);
    ASSERT_TRUE(j["final"]["second_order_min"].is_number());
    EXPECT_LT(j["final"]["second_order_min"].get<double>(), 0.0);
}

TEST(CliCheck, InputErrors) {
    EXPECT_EQ(run({"check", "--builtin", "scholtes_toy"}).code, exit_code::input_error);
    EXPECT_EQ(run({"check", "--builtin", "scholtes_toy", "--z", "0"}).code, exit_code::input_error);
    EXPECT_EQ(run({"check", "--builtin", "scholtes_toy", "--z", "0,0", "--mu", "0"}).code, exit_code::input_error);
    EXPECT_EQ(run({"check", "--builtin", "scholtes_toy", "--point", "/nonexistent/p.json"}).code,
              exit_code::input_error);
    const std::string bad = temp_path("badpoint");
    std::ofstream(bad) << R"({"z":[0,0],"extra":[1]})";
    EXPECT_EQ(run({"check", "--builtin", "scholtes_toy", "--point", bad}).code, exit_code::input_error);
    std::filesystem::remove(bad);
}

TEST(CliVerify, PassesForFixedSeeds) {
    for (const char *seed : {"0", "7"}) {
        const CliRun r = run({"verify", "--seed", seed});
        EXPECT_EQ(r.code, 0) << r.out;
        EXPECT_NE(r.out.find("all properties passed"), std::string::npos);
    }
}

TEST(CliVerify, CoarseDifferenceStepFails) {
    const CliRun r = run({"verify", "--fd-step", "1"});
    EXPECT_EQ(r.code, exit_code::verify_failed);
    EXPECT_NE(r.out.find("FAIL "), std::string::npos);
}

TEST(CliVerify, RejectsBadOptions) {
    EXPECT_EQ(run({"verify", "--fd-step", "0"}).code, exit_code::input_error);
    EXPECT_EQ(run({"verify", "--samples", "0"}).code, exit_code::input_error);
}

TEST(Cli, HelpExitsCleanly) {
    const CliRun r = run({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("solve"), std::string::npos);
}
