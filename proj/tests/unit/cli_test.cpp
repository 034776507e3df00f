#include <gtest/gtest.h>

#include <sstream>
#include <string>
#include <vector>

#include "splitguard/harness/cli.hpp"

using namespace splitguard::harness;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome cli(std::vector<std::string> args) {
  args.insert(args.begin(), "splitguard");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string desk() { return std::string(SPLITGUARD_CONFIGS) + "/desk.cfg"; }

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST(Cli, UnknownFlagPrintsUsage) {
  const auto r = cli({"run", "--bogus"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("--config"), std::string::npos) << r.err;
}

TEST(Cli, MissingSubcommandIsUsageError) { EXPECT_EQ(cli({}).code, kExitUsage); }

TEST(Cli, MissingConfigIsIoError) {
  EXPECT_EQ(cli({"run", "--config", "/nonexistent/x.cfg"}).code, kExitIo);
}

TEST(Cli, BadSettingIsUsageError) {
  EXPECT_EQ(cli({"run", "--set", "sg_lc.alpha=abc"}).code, kExitUsage);
  EXPECT_EQ(cli({"run", "--set", "nonsense"}).code, kExitUsage);
}

TEST(Cli, RunIsReproducible) {
  const std::vector<std::string> args = {"run", "--config", desk(), "--trials", "1", "--seed", "7",
                                         "--set", "run.measure_overhead=false"};
  const auto a = cli(args), b = cli(args);
  ASSERT_EQ(a.code, kExitOk) << a.err;
  ASSERT_EQ(b.code, kExitOk) << b.err;
  const auto ra = csv_rows(a.out), rb = csv_rows(b.out);
  ASSERT_EQ(ra.size(), 3u);
  ASSERT_EQ(ra.size(), rb.size());
  EXPECT_EQ(ra[0], rb[0]);
  for (std::size_t i = 1; i < ra.size(); ++i) {
    ASSERT_EQ(ra[i].size(), 7u);
    for (std::size_t c : {0u, 1u, 2u, 3u, 6u}) EXPECT_EQ(ra[i][c], rb[i][c]) << "row " << i;
  }
}

TEST(Cli, HonestTraceStaysAboveThreshold) {
  const auto r = cli({"trace", "--config", desk(), "--seed", "3", "--truth", "honest"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto rows = csv_rows(r.out);
  ASSERT_GT(rows.size(), 1u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"batch_index", "is_fake", "s_value", "sg_value",
                                              "lof_score"}));
  std::size_t scored = 0, high = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i][3].empty()) continue;
    ++scored;
    high += std::stod(rows[i][3]) > 0.9;
  }
  ASSERT_GT(scored, 10u);
  EXPECT_GE(static_cast<double>(high), 0.9 * static_cast<double>(scored));
}

TEST(Cli, AttackDemoSamplesEveryN) {
  const auto r = cli({"attack-demo", "--set", "data.n=3000", "--every", "20"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto rows = csv_rows(r.out);
  ASSERT_GE(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"batch_index", "t", "reconstruction_mse",
                                              "baseline_mse"}));
  EXPECT_EQ(rows[1][0], "19");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    ASSERT_EQ(rows[i].size(), 4u);
    EXPECT_GT(std::stod(rows[i][2]), 0.0);
    EXPECT_EQ(rows[i][3], rows[1][3]);
  }
}

TEST(Cli, SelftestPasses) {
  const auto r = cli({"selftest"});
  EXPECT_EQ(r.code, kExitOk) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos) << r.out;
}
