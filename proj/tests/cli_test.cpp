#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "support/generators.hpp"
#include "xolap/cli.hpp"

namespace {

using namespace xolap;
using xolap::cli::CliConfig;
using xolap::cli::Command;
using xolap::cli::Format;
using xolap::testing::fixture;
using xolap::testing::read_file;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(const CliConfig& cfg) {
  std::ostringstream out, err;
  const int code = cli::run(cfg, out, err);
  return {code, out.str(), err.str()};
}

CliConfig match_cfg() {
  CliConfig cfg;
  cfg.command = Command::match;
  cfg.document_path = fixture("books.xml");
  cfg.pattern_path = fixture("books.pattern.json");
  return cfg;
}

CliConfig rollup_cfg(const std::string& agg = "sum") {
  CliConfig cfg;
  cfg.command = Command::rollup;
  cfg.document_path = fixture("sales.xml");
  cfg.fact = "book";
  cfg.hierarchy = "categories";
  cfg.measure = "price";
  cfg.value = "Software";
  cfg.agg = agg;
  return cfg;
}

class TempDir {
 public:
  TempDir() : path_(std::filesystem::temp_directory_path() / ("xolap_cli_test_" + std::to_string(::getpid()))) {
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }

  std::string write(const std::string& name, const std::string& content) const {
    const auto p = path_ / name;
    std::ofstream(p, std::ios::binary) << content;
    return p.string();
  }

 private:
  std::filesystem::path path_;
};

TEST(CliRun, MatchPrintsGoldenWitness) {
  const Outcome o = run(match_cfg());
  EXPECT_EQ(o.code, 0);
  EXPECT_EQ(o.out, read_file(fixture("books.witness.xml")));
}

TEST(CliRun, MatchWithOracleCheck) {
  CliConfig cfg = match_cfg();
  cfg.oracle_check = true;
  const Outcome o = run(cfg);
  EXPECT_EQ(o.code, 0);
  EXPECT_NE(o.err.find("oracle check passed"), std::string::npos);
}

TEST(CliRun, MatchJsonAndEmbed) {
  CliConfig cfg = match_cfg();
  cfg.output_format = Format::json;
  const auto j = nlohmann::json::parse(run(cfg).out);
  ASSERT_EQ(j.size(), 1u);
  EXPECT_EQ(j[0]["$1"], "/doc/book[1]");
  cfg.command = Command::embed;
  EXPECT_EQ(nlohmann::json::parse(run(cfg).out).size(), 2u);
}

TEST(CliRun, RollupWitnessAndFooter) {
  CliConfig cfg = rollup_cfg();
  cfg.oracle_check = true;
  const Outcome o = run(cfg);
  EXPECT_EQ(o.code, 0);
  EXPECT_NE(o.out.find("<Aggregate Count=\"2\">55</Aggregate>"), std::string::npos);
  EXPECT_NE(o.err.find("{\"value\":55,\"matched_facts\":2}"), std::string::npos);
  cfg.output_format = Format::json;
  EXPECT_EQ(run(cfg).out, "{\"value\":55,\"matched_facts\":2}\n");
  cfg = rollup_cfg("avg");
  cfg.output_format = Format::json;
  EXPECT_EQ(run(cfg).out, "{\"value\":27.5,\"matched_facts\":2}\n");
}

TEST(CliRun, RollupUsageAndDataErrors) {
  EXPECT_EQ(run(rollup_cfg("median")).code, 1);
  CliConfig cfg = rollup_cfg();
  cfg.measure.reset();
  const Outcome missing = run(cfg);
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.err.find("--measure"), std::string::npos);

  cfg = rollup_cfg("avg");
  cfg.value = "Nonexistent";
  const Outcome empty = run(cfg);
  EXPECT_EQ(empty.code, 2);
  EXPECT_NE(empty.err.find("avg over zero facts"), std::string::npos);
}

TEST(CliRun, OracleLimitIsDataError) {
  CliConfig cfg = match_cfg();
  cfg.oracle_check = true;
  cfg.oracle_node_limit = 5;
  const Outcome o = run(cfg);
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("oracle refuses"), std::string::npos);
  CliConfig r = rollup_cfg();
  r.oracle_check = true;
  r.oracle_node_limit = 5;
  EXPECT_EQ(run(r).code, 2);
}

TEST(CliRun, BadInputsNameTheFile) {
  TempDir dir;
  CliConfig cfg = match_cfg();
  cfg.document_path = dir.write("broken.xml", "<doc>\n<book>\n</doc>\n");
  Outcome o = run(cfg);
  EXPECT_EQ(o.code, 2);
  EXPECT_EQ(o.err.rfind(cfg.document_path + ": ", 0), 0u) << o.err;
  EXPECT_NE(o.err.find("line 3"), std::string::npos);

  cfg = match_cfg();
  cfg.document_path = dir.write("dtd.xml", "<!DOCTYPE doc><doc/>");
  o = run(cfg);
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("DTD"), std::string::npos);

  cfg = match_cfg();
  cfg.document_path = "/nonexistent/file.xml";
  EXPECT_EQ(run(cfg).code, 2);

  cfg = match_cfg();
  cfg.pattern_path = dir.write("bad.json", "{\"nodes\": 3}");
  o = run(cfg);
  EXPECT_EQ(o.code, 2);
  EXPECT_EQ(o.err.rfind(*cfg.pattern_path + ": ", 0), 0u) << o.err;
}

TEST(CliRun, ClassifyReportsPerDimension) {
  CliConfig cfg;
  cfg.command = Command::classify;
  cfg.document_path = fixture("sales.xml");
  cfg.schema_path = fixture("sales.schema.json");
  auto j = nlohmann::json::parse(run(cfg).out);
  EXPECT_EQ(j["categories"], (nlohmann::json{{"strict", false}, {"covering", false}, {"complex", true}}));
  cfg.document_path = fixture("sales_simple.xml");
  j = nlohmann::json::parse(run(cfg).out);
  EXPECT_EQ(j["categories"], (nlohmann::json{{"strict", true}, {"covering", true}, {"complex", false}}));
  cfg.dimension = "time";
  EXPECT_EQ(run(cfg).code, 2);
}

TEST(CliRun, ValidateReportsViolations) {
  CliConfig cfg;
  cfg.command = Command::validate;
  cfg.pattern_path = fixture("books.pattern.json");
  Outcome o = run(cfg);
  EXPECT_EQ(o.code, 0);
  EXPECT_EQ(nlohmann::json::parse(o.out)["valid"], true);

  TempDir dir;
  auto j = nlohmann::json::parse(read_file(fixture("books.pattern.json")));
  j["nodes"][2]["edge"]["card"] = "?";
  j["nodes"][2]["edge"]["mandatory"] = true;
  cfg.pattern_path = dir.write("invalid.json", j.dump());
  o = run(cfg);
  EXPECT_EQ(o.code, 2);
  const auto report = nlohmann::json::parse(o.out);
  EXPECT_EQ(report["valid"], false);
  ASSERT_EQ(report["violations"].size(), 1u);
}

TEST(CliEnv, OracleLimitVariable) {
  ::setenv("XOLAP_ORACLE_LIMIT", "12", 1);
  EXPECT_EQ(cli::oracle_limit_from_env(), 12u);
  ::setenv("XOLAP_ORACLE_LIMIT", "lots", 1);
  EXPECT_FALSE(cli::oracle_limit_from_env());
  ::unsetenv("XOLAP_ORACLE_LIMIT");
  EXPECT_FALSE(cli::oracle_limit_from_env());
}

// Runs the installed binary; stderr is discarded.
Outcome spawn(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + std::string(XOLAP_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return {-1, "", ""};
  std::string out;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out, ""};
}

std::string quoted(const std::string& s) { return "'" + s + "'"; }

TEST(CliBinary, ExitCodes) {
  EXPECT_EQ(spawn("").code, 1);
  EXPECT_EQ(spawn("frobnicate").code, 1);
  EXPECT_EQ(spawn("rollup -d " + quoted(fixture("sales.xml")) + " --fact book --hierarchy categories --value x --agg sum")
                .code,
            1);
  EXPECT_EQ(spawn("match -d /nonexistent.xml -p " + quoted(fixture("books.pattern.json"))).code, 2);
  EXPECT_EQ(spawn("match --oracle-check -d " + quoted(fixture("books.xml")) + " -p " +
                  quoted(fixture("books.pattern.json")),
                  "XOLAP_ORACLE_LIMIT=5")
                .code,
            2);
}

TEST(CliBinary, RepeatedRunsAreByteIdentical) {
  const std::string match_args =
      "match --oracle-check -d " + quoted(fixture("books.xml")) + " -p " + quoted(fixture("books.pattern.json"));
  const std::string rollup_args = "rollup --oracle-check -d " + quoted(fixture("sales.xml")) +
                                  " --fact book --hierarchy categories --measure price --value Software --agg sum";
  for (const std::string& args : {match_args, rollup_args, match_args + " --format json"}) {
    const Outcome first = spawn(args);
    ASSERT_EQ(first.code, 0) << args;
    for (int i = 0; i < 3; ++i) EXPECT_EQ(spawn(args).out, first.out) << args;
  }
  EXPECT_EQ(spawn(match_args).out, read_file(fixture("books.witness.xml")));
}

}  // namespace
