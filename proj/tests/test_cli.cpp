#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fbt/cli.hpp"

namespace {

const std::string kData = FBT_DATA_DIR;

struct RunResult {
  int code;
  std::string out;
  std::string err;
};

RunResult run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = fbt::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

nlohmann::json parse(const RunResult& r) { return nlohmann::json::parse(r.out); }

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("fbt_cli_test_" + name);
}

}  // namespace

TEST(Cli, UnknownFlagIsUsageError) {
  EXPECT_EQ(run({"spectrum", "--dist", kData + "/dist3.json", "--bogus"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
}

TEST(Cli, MissingFileIsValidationError) {
  EXPECT_EQ(run({"spectrum", "--dist", kData + "/missing.json"}).code, 2);
}

TEST(Cli, DomainViolationIsValidationError) {
  EXPECT_EQ(run({"spectrum", "--dist", kData + "/dist3.json", "--delta-n", "1.5"}).code, 2);
}

TEST(Cli, ImageSizeExact) {
  const RunResult r = run({"image-size", "--channel", kData + "/bsc01.json", "--set", kData + "/A.json", "--eta",
                           "0.5", "--exact"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = parse(r);
  EXPECT_TRUE(j["image"]["exact"].get<bool>());
  EXPECT_EQ(j["image"]["lower"], j["image"]["upper"]);
}

TEST(Cli, ImageSizeExactOverCapIsCapacityError) {
  const RunResult r = run({"image-size", "--channel", kData + "/bsc01.json", "--set", kData + "/A.json", "--eta",
                           "0.5", "--exact", "--max-classes", "1"});
  EXPECT_EQ(r.code, 3);
}

TEST(Cli, VerifyLemmas) {
  const RunResult r = run({"verify-lemmas", "--seed", "7", "--trials", "100", "--n", "6"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(parse(r)["pass"].get<bool>());
}

TEST(Cli, SpectrumReport) {
  const RunResult r = run({"spectrum", "--dist", kData + "/dist3.json", "--delta-n", "0.4"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = parse(r);
  EXPECT_TRUE(j.contains("bins"));
  EXPECT_FALSE(r.out.find("timestamp") != std::string::npos);
}

TEST(Cli, FanoOnIdentityCode) {
  const RunResult r =
      run({"fano-max", "--code", kData + "/identity2_code.json", "--channel", kData + "/identity2.json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(parse(r)["zeta"][0].get<double>(), 0.0, 1e-12);
}

TEST(Cli, FanoAvgOnBroadcastCode) {
  const RunResult r = run({"fano-avg", "--code", kData + "/broadcast2.json", "--channel", kData + "/identity2.json",
                           "--channel", kData + "/identity2.json"});
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST(Cli, WiretapBound) {
  const RunResult r = run({"wiretap-bound", "--main", kData + "/bsc01.json", "--eve", kData + "/bsc02.json", "--code",
                           kData + "/repetition2.json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(parse(r)["value"].get<double>(), 0.2529325, 1e-6);
}

TEST(Cli, ConfigFileSuppliesOptionsAndFlagsWin) {
  const RunResult a = run({"--config", kData + "/partition_params.json", "partition", "--dist",
                           kData + "/dist3.json", "--channel", kData + "/bsc01.json"});
  const RunResult b = run({"partition", "--dist", kData + "/dist3.json", "--channel", kData + "/bsc01.json", "--eta",
                           "0.5", "--delta-n", "0.5", "--rho", "1.0"});
  EXPECT_EQ(a.code, b.code);
  EXPECT_EQ(a.out, b.out);
}

TEST(Cli, OutputIndependentOfThreads) {
  const std::vector<std::string> base{"partition", "--dist", kData + "/dist3.json", "--channel",
                                      kData + "/bsc01.json", "--messages", kData + "/messages3.json"};
  auto one = base, four = base;
  one.insert(one.begin(), {"--threads", "1"});
  four.insert(four.begin(), {"--threads", "4"});
  const RunResult a = run(one), b = run(four);
  EXPECT_EQ(a.code, b.code);
  EXPECT_EQ(a.out, b.out);
}

TEST(Cli, RecordAndCsvFiles) {
  const auto rec = temp_path("record.json"), csv = temp_path("rows.csv"), out = temp_path("out.json");
  const RunResult r = run({"fano-max", "--code", kData + "/repetition2.json", "--channel", kData + "/bsc01.json",
                           "--record", rec.string(), "--csv", csv.string(), "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  std::ifstream rf(rec);
  const auto j = nlohmann::json::parse(rf);
  EXPECT_TRUE(j.contains("args"));
  EXPECT_TRUE(j.contains("report"));
  EXPECT_TRUE(std::filesystem::file_size(csv) > 0);
  std::ifstream of(out);
  EXPECT_EQ(nlohmann::json::parse(of), j["report"]);
  std::filesystem::remove(rec);
  std::filesystem::remove(csv);
  std::filesystem::remove(out);
}
