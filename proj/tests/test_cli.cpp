#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "gsmat_cli.hpp"
#include "test_util.hpp"

using namespace gsmat;
using gsmat::cli::run_cli;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out, err;
  json j() const { return json::parse(out); }
};

CliRun run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("gsmat_cli_" + std::to_string(::getpid()))) { fs::create_directories(path_); }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

void write_text(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

std::vector<std::string> csv_without_timing(const std::string& csv) {
  std::vector<std::string> lines;
  std::istringstream in(csv);
  for (std::string line; std::getline(in, line);) lines.push_back(line.substr(0, line.rfind(',')));
  return lines;
}

}  // namespace

TEST(Cli, DensityExamples) {
  CliRun r = run({"density", "--b", "32", "--r", "32", "--m", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.j()["dense"], true);
  EXPECT_EQ(r.j()["min_m"], 2);
  EXPECT_EQ(r.j()["butterfly_m"], 6);
  EXPECT_EQ(r.j()["zero_entries"], 0);

  r = run({"density", "--b", "2", "--r", "8", "--m", "3"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.j()["dense"], false);
  EXPECT_GT(r.j()["zero_entries"].get<int>(), 0);

  r = run({"density", "--b", "2", "--r", "1", "--m", "1"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.j()["dense"], true);

  r = run({"density", "--b", "2", "--r", "8", "--m", "4", "--perm", "random", "--seed", "5"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.j()["perm"], "random");
}

TEST(Cli, CountMatchesFormulas) {
  const CliRun r = run({"count", "--b", "32", "--r", "32", "--m", "6", "--batch", "3"});
  ASSERT_EQ(r.code, 0);
  const json j = r.j();
  EXPECT_EQ(j["params"], 196608);
  EXPECT_EQ(j["flops"], 3 * 196608);
  EXPECT_EQ(j["dense_params"], 1048576);
  EXPECT_EQ(j["butterfly_params"], 196608);
}

TEST(Cli, BenchColumns) {
  CliRun r = run({"bench", "--d", "1024", "--b", "32", "--reps", "2", "--warmup", "0", "--seed", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::vector<std::string> lines = csv_without_timing(r.out);
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_EQ(lines[0], "method,d,b,m,params,flops");
  EXPECT_EQ(lines[1], "dense,1024,32,1,1048576,1048576");
  EXPECT_EQ(lines[2], "blockdiag,1024,32,1,32768,32768");
  EXPECT_EQ(lines[3], "gs,1024,32,2,65536,65536");
  EXPECT_EQ(lines[4], "butterfly,1024,32,6,196608,196608");

  r = run({"bench", "--d", "1024", "--b", "32", "--m", "6", "--reps", "1", "--warmup", "0"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(csv_without_timing(r.out)[3], "gs,1024,32,6,196608,196608");

  EXPECT_EQ(run({"bench", "--d", "10", "--b", "3"}).code, 2);
}

TEST(Cli, ProjectInClassAndRandom) {
  TempDir tmp;
  Rng rng(11);
  const GSClassSpec spec = gsoft_spec(8, 2);
  write_text(tmp.file("spec.json"), io::to_json(spec).dump());

  const GSMatrix member(spec, random_blockdiag(rng, 4, 2, 2), random_blockdiag(rng, 4, 2, 2));
  const Matrix a = as_dense(member);
  io::save(tmp.file("a.gsm"), io::to_container(a));
  CliRun r = run({"project", "--input", tmp.file("a.gsm"), "--spec", tmp.file("spec.json"), "--output", tmp.file("out.gsm")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_LE(r.j()["error_norm"].get<double>(), 1e-10 * frobenius_norm(a));
  const GSMatrix back = io::gs_from(io::load(tmp.file("out.gsm")));
  EXPECT_EQ(back.spec(), spec);
  EXPECT_LE(gsmat::testing::max_abs_diff(as_dense(back), a), 1e-10);

  const Matrix noise = random_matrix(rng, 8, 8);
  io::save(tmp.file("n.gsm"), io::to_container(noise));
  r = run({"project", "--input", tmp.file("n.gsm"), "--spec", tmp.file("spec.json"), "--output", tmp.file("out2.gsm")});
  ASSERT_EQ(r.code, 0) << r.err;
  const double oracle = std::sqrt(gsmat::testing::projection_tail_oracle(noise, spec));
  EXPECT_NEAR(r.j()["error_norm"].get<double>(), oracle, 1e-9);
  EXPECT_NEAR(r.j()["tail_norm"].get<double>(), oracle, 1e-9);
}

TEST(Cli, ProjectErrorsNameTheProblem) {
  TempDir tmp;
  write_text(tmp.file("spec.json"), io::to_json(gsoft_spec(8, 2)).dump());
  write_text(tmp.file("bad.gsm"), "not a container");
  CliRun r = run({"project", "--input", tmp.file("bad.gsm"), "--spec", tmp.file("spec.json"), "--output", tmp.file("o.gsm")});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("header"), std::string::npos) << r.err;

  io::save(tmp.file("small.gsm"), io::to_container(Matrix::identity(4)));
  r = run({"project", "--input", tmp.file("small.gsm"), "--spec", tmp.file("spec.json"), "--output", tmp.file("o.gsm")});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("shape"), std::string::npos) << r.err;

  r = run({"project", "--input", tmp.file("missing.gsm"), "--spec", tmp.file("spec.json"), "--output", tmp.file("o.gsm")});
  EXPECT_EQ(r.code, 3);

  write_text(tmp.file("badspec.json"), R"({"k_L": 2})");
  io::save(tmp.file("a.gsm"), io::to_container(Matrix::identity(8)));
  r = run({"project", "--input", tmp.file("a.gsm"), "--spec", tmp.file("badspec.json"), "--output", tmp.file("o.gsm")});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("k_R"), std::string::npos) << r.err;
}

TEST(Cli, DemoGsoft) {
  const CliRun r = run({"demo-gsoft", "--seed", "1"});
  ASSERT_EQ(r.code, 0) << r.out << r.err;
  const json j = r.j();
  EXPECT_LE(j["final_loss"].get<double>(), 1e-4);
  EXPECT_EQ(j["params"], 128);
  EXPECT_EQ(j["blockdiag_block"], 8);
  EXPECT_GE(j["blockdiag_final_loss"].get<double>(), 10 * j["final_loss"].get<double>());
  EXPECT_EQ(j["status"], "ok");

  const CliRun few = run({"demo-gsoft", "--seed", "1", "--steps", "3"});
  EXPECT_EQ(few.code, 4);
  EXPECT_EQ(json::parse(few.out)["status"], "tolerance_failed");
}

TEST(Cli, DemoConv) {
  CliRun r = run({"demo-conv", "--terms", "20", "--seed", "3"});
  ASSERT_EQ(r.code, 0) << r.out << r.err;
  const double good = r.j()["residual"].get<double>();
  EXPECT_LE(good, 1e-7);
  EXPECT_LE(r.j()["norm_preservation_error"].get<double>(), 1e-7);

  r = run({"demo-conv", "--terms", "1", "--seed", "3"});
  EXPECT_EQ(r.code, 4);
  EXPECT_GT(json::parse(r.out)["residual"].get<double>(), good);

  r = run({"demo-conv", "--channels", "8", "--groups", "2", "--groups2", "4", "--seed", "3"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
}

TEST(Cli, SeedDeterminism) {
  const std::vector<std::string> gsoft{"demo-gsoft", "--steps", "50", "--tol", "1e9", "--seed", "9"};
  EXPECT_EQ(run(gsoft).out, run(gsoft).out);
  const std::vector<std::string> conv{"demo-conv", "--seed", "4"};
  EXPECT_EQ(run(conv).out, run(conv).out);

  ::setenv("GS_SEED", "9", 1);
  const CliRun env = run({"demo-gsoft", "--steps", "50", "--tol", "1e9"});
  ::unsetenv("GS_SEED");
  EXPECT_EQ(env.out, run(gsoft).out);
  EXPECT_NE(run({"demo-gsoft", "--steps", "50", "--tol", "1e9", "--seed", "10"}).out, env.out);

  const std::vector<std::string> bench{"bench", "--d", "64", "--b", "8", "--reps", "1", "--warmup", "0", "--seed", "2"};
  EXPECT_EQ(csv_without_timing(run(bench).out), csv_without_timing(run(bench).out));

  ::setenv("GS_SEED", "abc", 1);
  EXPECT_EQ(run({"demo-conv"}).code, 2);
  ::unsetenv("GS_SEED");
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"density", "--b", "2"}).code, 2);
  EXPECT_EQ(run({"density", "--b", "x", "--r", "2", "--m", "1"}).code, 2);
  EXPECT_EQ(run({"density", "--b", "1", "--r", "2", "--m", "1"}).code, 2);
  EXPECT_EQ(run({"density", "--b", "2", "--r", "2", "--m", "1", "--perm", "zigzag"}).code, 2);
}

TEST(Cli, HelpAndInfo) {
  CliRun r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("Exit codes"), std::string::npos);
  r = run({"--help-all"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("--kernel-norm"), std::string::npos);

  r = run({"info"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.j()["format"], "GSM1");

  TempDir tmp;
  io::save(tmp.file("p.gsm"), io::to_container(stride_perm(2, 6)));
  r = run({"info", "--input", tmp.file("p.gsm")});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.j()["header"]["kind"], "permutation");
  EXPECT_EQ(run({"info", "--input", tmp.file("none.gsm")}).code, 3);
}
