#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "mc2g/cli.hpp"

using namespace mc2g;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "mc2g");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

int exit_code(const std::string& args) {
  const std::string cmd = std::string(MC2G_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("mc2g_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    nlohmann::json cfg{{"name", "tiny"},
                       {"model", {{"n_users", 200}, {"n_items", 120}, {"k1", 2}, {"k2", 2}, {"alphabet", {1, 2, 3}},
                                  {"nominal", {{3, 1}, {1, 2}}}, {"personalization", {{"keep", 0.8}}},
                                  {"user_graph", {{"quality", 1.0}}}, {"item_graph", {{"quality", 1.0}}}}},
                       {"sweep", {{"axis", "ratio"}, {"values", {0.5, 1.5}}}},
                       {"trials", 2},
                       {"seed", 3}};
    std::ofstream(config()) << cfg.dump(2);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string config() const { return (dir_ / "tiny.json").string(); }
  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, TheoryReport) {
  const auto r = cli({"theory", "--config", config()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_TRUE(j.contains("d_U"));
  EXPECT_GT(j.at("achievability").at("value").get<double>(), 0.0);
}

TEST_F(CliTest, SweepWritesHeaderAndRows) {
  const auto r = cli({"sweep", "--config", config(), "--jobs", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, kSweepCsvHeader);
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  EXPECT_EQ(rows, 2);
  const auto file = (dir_ / "out.csv").string();
  ASSERT_EQ(cli({"sweep", "--config", config(), "--out", file, "--trials", "1"}).code, 0);
  EXPECT_TRUE(fs::exists(file));
}

TEST_F(CliTest, SynthThenRunMatchesInMemory) {
  const auto inst_dir = (dir_ / "inst").string();
  ASSERT_EQ(cli({"synth", "--config", config(), "--p", "0.2", "--seed", "11", "--out", inst_dir}).code, 0);
  const auto from_disk = cli({"run", "--instance", inst_dir});
  ASSERT_EQ(from_disk.code, 0) << from_disk.err;
  const auto in_memory = cli({"run", "--config", config(), "--p", "0.2", "--seed", "11"});
  ASSERT_EQ(in_memory.code, 0) << in_memory.err;
  auto a = nlohmann::json::parse(from_disk.out), b = nlohmann::json::parse(in_memory.out);
  a.erase("times");
  b.erase("times");
  EXPECT_EQ(a, b);

  const auto est_dir = (dir_ / "est").string();
  ASSERT_EQ(cli({"run", "--instance", inst_dir, "--labels-out", est_dir}).code, 0);
  const auto ev = cli({"eval", "--truth", inst_dir, "--est", est_dir});
  ASSERT_EQ(ev.code, 0) << ev.err;
  const auto e = nlohmann::json::parse(ev.out);
  EXPECT_EQ(e.at("user_error"), a.at("user_error"));
  EXPECT_EQ(e.at("mae"), a.at("mae"));
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(cli({"sweep", "--config", config(), "--bogus"}).code, 2);
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"run"}).code, 2);
  EXPECT_EQ(cli({"run", "--config", config()}).code, 2);
  EXPECT_EQ(cli({"run", "--config", config(), "--p", "0.1", "--ratio", "1"}).code, 2);
  EXPECT_EQ(cli({"synth", "--config", config(), "--p", "2", "--out", (dir_ / "x").string()}).code, 2);
  std::ofstream(dir_ / "bad.json") << R"({"trails": 1})";
  const auto r = cli({"theory", "--config", (dir_ / "bad.json").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("trails"), std::string::npos);
}

TEST_F(CliTest, RuntimeErrors) {
  std::ofstream(dir_ / "zero.json") << R"({"model": {"n_users": 50, "n_items": 40, "k1": 2, "k2": 2, "alphabet": [0, 1],
    "nominal": [[0, 1], [0, 1]], "user_graph": {"quality": 1}, "item_graph": {"quality": 1}}})";
  EXPECT_EQ(cli({"theory", "--config", (dir_ / "zero.json").string()}).code, 1);
}

TEST_F(CliTest, Help) {
  const auto r = cli({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("sweep"), std::string::npos);
  EXPECT_EQ(cli({"run", "--help"}).code, 0);
}

TEST_F(CliTest, BinaryExitCodes) {
  EXPECT_EQ(exit_code("--help"), 0);
  EXPECT_EQ(exit_code("theory --config " + config()), 0);
  EXPECT_EQ(exit_code("theory --config " + config() + " --unknown-flag"), 2);
  EXPECT_EQ(exit_code("frobnicate"), 2);
}
