#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "json.hpp"

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun pdom(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + PDOM_CLI + " " + args + " 2>&1";
  CliRun r;
  FILE* f = popen(cmd.c_str(), "r");
  if (f == nullptr) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, f)) > 0) r.out.append(buf, n);
  const int status = pclose(f);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string sample(const std::string& name) { return std::string(PDOM_SAMPLES) + "/" + name; }

std::string temp_file(const std::string& name, const std::string& content) {
  const std::string path = testing::TempDir() + name;
  std::ofstream(path) << content;
  return path;
}

bool has(const CliRun& r, const std::string& text) { return r.out.find(text) != std::string::npos; }

}  // namespace

TEST(Cli, AnalyzePass) {
  const CliRun r = pdom("analyze " + sample("msd4.json") + " --lambda 1.2679 --p 1");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(has(r, "PASS  certificate")) << r.out;
}

TEST(Cli, AnalyzeWrongDegreeFails) {
  const CliRun r = pdom("analyze " + sample("msd4.json") + " --lambda 1.2679 --p 0");
  EXPECT_EQ(r.code, 1) << r.out;
  EXPECT_TRUE(has(r, "FAIL  split")) << r.out;
}

TEST(Cli, AnalyzeNonHyperbolicRate) {
  const std::string sys = temp_file("cli_nonhyp.json", R"({"A": [[-1, 0], [0, -3]]})");
  const CliRun r = pdom("analyze " + sys + " --lambda 1 --p 1");
  EXPECT_EQ(r.code, 1) << r.out;
  EXPECT_TRUE(has(r, "WARN  split")) << r.out;
}

TEST(Cli, VerifyDominance) {
  const CliRun r = pdom("verify " + sample("msd8.json") + " " + sample("msd8_cert.json"));
  EXPECT_EQ(r.code, 0) << r.out;
  const std::string bad = temp_file("cli_bad_cert.json", R"({"P": [[1, 0], [0, 1]], "lambda": 1.2679, "p": 0})");
  EXPECT_EQ(pdom("verify " + sample("msd8.json") + " " + bad).code, 1);
}

TEST(Cli, CertifyWritesVerifiableCertificate) {
  const std::string out = testing::TempDir() + "cli_gain_cert.json";
  CliRun r = pdom("certify " + sample("msd8.json") + " --lambda 1.2679 --p 1 --supply " + sample("gain_031.json") +
               " --out " + out);
  ASSERT_EQ(r.code, 0) << r.out;
  r = pdom("verify " + sample("msd8.json") + " " + out);
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(has(r, "PASS  dissipativity")) << r.out;
}

TEST(Cli, CertifyGainBelowShiftedHinfFails) {
  const CliRun r = pdom("certify " + sample("msd8.json") + " --lambda 1.2679 --p 1 --supply-kind gain --gamma 0.1");
  EXPECT_EQ(r.code, 1) << r.out;
}

TEST(Cli, CertifyLure) {
  const CliRun r = pdom("certify " + sample("spring_cubic.json") + " --lambda 1.2679 --p 1 --supply-kind passivity");
  EXPECT_EQ(r.code, 0) << r.out;
}

TEST(Cli, InterconnectLureLoop) {
  const CliRun r = pdom("interconnect " + sample("spring_loop.json"));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(has(r, "2-dominance")) << r.out;
}

TEST(Cli, InterconnectGainLoop) {
  const CliRun r = pdom("interconnect " + sample("gain_loop.json"));
  EXPECT_EQ(r.code, 0) << r.out;
}

TEST(Cli, InterconnectGainProductTooLarge) {
  std::ifstream in(sample("gain_loop.json"));
  auto j = nlohmann::json::parse(in);
  j["supply2"]["gamma"] = 4.0;
  const CliRun r = pdom("interconnect " + temp_file("cli_gain_big.json", j.dump()));
  EXPECT_EQ(r.code, 1) << r.out;
  EXPECT_TRUE(has(r, "FAIL  coupling")) << r.out;
}

TEST(Cli, RateMismatchExitsTwo) {
  std::ifstream in(sample("spring_loop.json"));
  auto j = nlohmann::json::parse(in);
  j["lambda"] = {1.0, 1.5};
  const CliRun r = pdom("interconnect " + temp_file("cli_rates.json", j.dump()));
  EXPECT_EQ(r.code, 2) << r.out;
}

TEST(Cli, SimulateClassifies) {
  const std::string csv = testing::TempDir() + "cli_traj.csv";
  const CliRun r = pdom("simulate " + sample("spring_cubic.json") + " --x0 1,1 --out " + csv);
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(has(r, "fixed_point")) << r.out;
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header.rfind("t,", 0), 0u) << header;
}

TEST(Cli, SimulateLoopLimitCycle) {
  const CliRun r = pdom("simulate " + sample("spring_loop.json") + " --x0 1,1,0.5,0.5 --t 2000 --stride 10");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(has(r, "limit_cycle")) << r.out;
}

TEST(Cli, InputErrorsExitTwo) {
  EXPECT_EQ(pdom("analyze /nonexistent.json --lambda 1 --p 1").code, 2);
  EXPECT_EQ(pdom("simulate " + sample("msd4.json") + " --x0 1,0 --dt 0").code, 2);
  EXPECT_EQ(pdom("simulate " + sample("msd4.json") + " --x0 1,0,0").code, 2);
  EXPECT_EQ(pdom("simulate " + sample("msd4.json") + " --x0 1,abc").code, 2);
  EXPECT_EQ(pdom("analyze " + sample("msd4.json") + " --lambda 1 --p 3").code, 2);
  EXPECT_EQ(pdom("bogus").code, 2);
  const CliRun syntax = pdom("analyze " + temp_file("cli_syntax.json", "{\n\"A\": [1,\n}") + " --lambda 1 --p 0");
  EXPECT_EQ(syntax.code, 2);
  EXPECT_TRUE(has(syntax, "cli_syntax.json:3:")) << syntax.out;
}

TEST(Cli, HelpExitsZero) { EXPECT_EQ(pdom("--help").code, 0); }

TEST(Cli, PolicyFromEnvironment) {
  const std::string bad = temp_file("cli_policy_bad.json", R"({"no_such_field": 1})");
  EXPECT_EQ(pdom("analyze " + sample("msd4.json") + " --lambda 1.2679 --p 1", "PDOM_NUMERIC_POLICY=" + bad).code, 2);
  const std::string ok = temp_file("cli_policy_ok.json", R"({"lmi_tol": 1e-7})");
  EXPECT_EQ(pdom("analyze " + sample("msd4.json") + " --lambda 1.2679 --p 1", "PDOM_NUMERIC_POLICY=" + ok).code, 0);
}

TEST(Cli, JsonReportIsDeterministic) {
  const std::string a = testing::TempDir() + "cli_rep_a.json", b = testing::TempDir() + "cli_rep_b.json";
  const CliRun ra = pdom("--report " + a + " reproduce 1");
  const CliRun rb = pdom("--report " + b + " reproduce 1");
  ASSERT_EQ(ra.code, 0) << ra.out;
  ASSERT_EQ(rb.code, 0) << rb.out;
  std::ifstream ia(a), ib(b);
  const std::string sa((std::istreambuf_iterator<char>(ia)), {}), sb((std::istreambuf_iterator<char>(ib)), {});
  EXPECT_FALSE(sa.empty());
  EXPECT_EQ(sa, sb);
  const auto j = nlohmann::json::parse(sa);
  EXPECT_EQ(j["result"], "PASS");
  EXPECT_EQ(j["seed"], 42);
  EXPECT_FALSE(j.contains("wall_time_s"));
}

TEST(Cli, JsonStdout) {
  const CliRun r = pdom("--json analyze " + sample("msd4.json") + " --lambda 1.2679 --p 1");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["command"], "analyze");
  EXPECT_TRUE(j["certificates"].contains("storage"));
}

TEST(Cli, ReproduceAll) {
  const CliRun r = pdom("reproduce all");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_FALSE(has(r, "FAIL")) << r.out;
  EXPECT_TRUE(has(r, "WARN  ex3.monotone_spring_claim")) << r.out;
}
