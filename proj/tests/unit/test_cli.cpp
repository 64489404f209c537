#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "ncsmpc/io.hpp"

namespace fs = std::filesystem;

namespace {

struct Result
{
  int status;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args)
{
  args.insert(args.begin(), "ncsmpc");
  std::ostringstream out, err;
  const int status = ncsmpc::cli::run(args, out, err);
  return {status, out.str(), err.str()};
}

std::string slurp(const fs::path & p)
{
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string & name)
{
  const fs::path p = fs::temp_directory_path() / ("ncsmpc_cli_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(CliAlpha, SingleValue)
{
  const Result r = run_cli({"alpha", "--C", "1", "--mu", "1", "--T", "1", "--delta", "0.5"});
  EXPECT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(r.out, "0.632121\n");
}

TEST(CliAlpha, SweepIsConstantForUnitOvershoot)
{
  const Result r = run_cli({"alpha", "--C", "1", "--mu", "1", "--T", "1", "--delta-sweep", "0.01:0.99:99"});
  ASSERT_EQ(r.status, 0) << r.err;
  std::istringstream is(r.out);
  const ncsmpc::CsvTable t = ncsmpc::read_csv(is);
  ASSERT_EQ(t.rows.size(), 99u);
  const std::size_t col = t.header.size() - 1;
  for (const auto & row : t.rows) { EXPECT_NEAR(row[col], t.rows.front()[col], 1e-12); }
}

TEST(CliAlpha, ControlHorizonBeyondPredictionFails)
{
  const Result r = run_cli({"alpha", "--C", "2", "--mu", "1", "--T", "1", "--delta", "1.5"});
  EXPECT_NE(r.status, 0);
  EXPECT_FALSE(r.err.empty());
}

TEST(CliAlpha, MissingRequiredFlagFails)
{
  EXPECT_NE(run_cli({"alpha", "--C", "2", "--T", "1", "--delta", "0.5"}).status, 0);
  EXPECT_NE(run_cli({"no-such-command"}).status, 0);
}

TEST(CliAlphaDiscrete, Table)
{
  const Result r = run_cli({"alpha-discrete", "--C", "2", "--mu", "1", "--tau", "0.1", "--N", "10",
                            "--m", "3", "--k-max", "4"});
  ASSERT_EQ(r.status, 0) << r.err;
  std::istringstream is(r.out);
  const ncsmpc::CsvTable t = ncsmpc::read_csv(is);
  ASSERT_EQ(t.rows.size(), 5u);
  for (std::size_t i = 1; i < t.rows.size(); ++i) { EXPECT_GE(t.rows[i][1], t.rows[i - 1][1]); }
}

TEST(CliRegion, GridCsv)
{
  const Result r = run_cli({"region", "--T", "1", "--delta", "0.5", "--grid", "5"});
  ASSERT_EQ(r.status, 0) << r.err;
  std::istringstream is(r.out);
  const ncsmpc::CsvTable t = ncsmpc::read_csv(is);
  EXPECT_EQ(t.rows.size(), 25u);
  EXPECT_EQ(t.header.back(), "stable");
}

TEST(CliMinHorizon, UnitOvershoot)
{
  const Result r = run_cli({"min-horizon", "--C", "1", "--mu", "1", "--target", "0.864664716763"});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(r.out, "2.000000\n");
}

TEST(CliCstr, ByteIdenticalOnRepeat)
{
  const fs::path a = scratch_dir("a");
  const fs::path b = scratch_dir("b");
  const std::vector<std::string> common{"cstr", "--delta", "0.1", "--duration", "0.3"};
  auto args_a = common;
  args_a.insert(args_a.end(), {"--out", a.string()});
  auto args_b = common;
  args_b.insert(args_b.end(), {"--out", b.string()});
  const Result ra = run_cli(args_a);
  const Result rb = run_cli(args_b);
  ASSERT_EQ(ra.status, 0) << ra.err;
  EXPECT_EQ(ra.out, rb.out);
  std::size_t files = 0;
  for (const auto & e : fs::directory_iterator(a)) {
    ++files;
    EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path();
  }
  EXPECT_GE(files, 4u);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(CliAnalyze, ReadsSavedRecords)
{
  const fs::path d = scratch_dir("analyze");
  ASSERT_EQ(run_cli({"cstr", "--delta", "0.1", "--duration", "0.3", "--out", d.string()}).status, 0);
  fs::path records;
  for (const auto & e : fs::directory_iterator(d)) {
    if (e.path().filename().string().ends_with("records.json")) { records = e.path(); }
  }
  ASSERT_FALSE(records.empty());
  const Result r = run_cli({"analyze", "--records", records.string(), "--alpha-bar", "0.1"});
  EXPECT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find("global_alpha"), std::string::npos);
  fs::remove_all(d);
}
