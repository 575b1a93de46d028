#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "brdsgd/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result call(std::vector<std::string> args) {
  args.insert(args.begin(), "brdsgd");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = brdsgd::cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

const char* kConfig =
    "seed = 2\nsteps = 40\nrecord_every = 10\nbatch_size = 4\n"
    "[topology]\nkind = \"complete\"\nagents = 6\nbyzantine = 1\n"
    "[aggregation]\nrule = \"ios\"\n[attack]\nkind = \"gaussian\"\n"
    "[loss]\nkind = \"softmax_l2\"\nlambda = 0.1\n[data]\ndim = 4\nZ = 20\ntest_count = 40\n";

fs::path only_dir(const fs::path& root) {
  for (const auto& e : fs::directory_iterator(root)) return e.path();
  return {};
}

}  // namespace

TEST_CASE("argument parsing") {
  auto cmd = brdsgd::cli::parse_args(4, std::vector<const char*>{"brdsgd", "bounds", "--theorem", "2"}.data());
  CHECK(cmd.kind == brdsgd::cli::CommandKind::Bounds);
  const std::vector<const char*> argv{"brdsgd", "bounds", "--theorem", "2", "--rho", "0", "--chi", "0",
                                      "--M", "1", "--Z", "10", "--R", "10", "--k0", "10", "--k", "100"};
  cmd = brdsgd::cli::parse_args(static_cast<int>(argv.size()), argv.data());
  CHECK(cmd.k == 100);
  CHECK(cmd.overrides.size() == 6);
}

TEST_CASE("usage errors exit 2") {
  CHECK(call({}).code == 2);
  CHECK(call({"frobnicate"}).code == 2);
  CHECK(call({"run"}).code == 2);
  CHECK(call({"run", "--config", "/nonexistent.toml"}).code == 2);
  CHECK(call({"bounds", "--theorem", "9"}).code == 2);
  const auto r = call({"run", "--bogus"});
  CHECK(r.code == 2);
  CHECK_FALSE(r.err.empty());
  CHECK(call({"--help"}).code == 0);
}

TEST_CASE("library errors exit 1") {
  TempDir tmp("brdsgd_unit_cli_err");
  std::ofstream(tmp.path / "bad.toml") << "[topology]\nkind = \"star\"\n";
  const auto r = call({"run", "--config", (tmp.path / "bad.toml").string(), "--out", tmp.path.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("ConfigError") != std::string::npos);
  CHECK(call({"bounds", "--theorem", "1", "--rho", "1", "--R", "10"}).code == 1);
}

TEST_CASE("bounds output") {
  const auto r = call({"bounds", "--theorem", "2", "--rho", "0", "--chi", "0", "--M", "1", "--Z", "10", "--R",
                       "10", "--k0", "10", "--k", "100"});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("k,bound\n100,", 0) == 0);
  const auto lemma = call({"bounds", "--theorem", "lemma3", "--c", "1", "--M", "1", "--k0", "5", "--k", "5"});
  CHECK(lemma.code == 0);
  CHECK(lemma.out.find("5,0.01") != std::string::npos);
}

TEST_CASE("check on the complete graph") {
  const auto r = call({"check", "--rule", "mean", "--byzantine", "0", "--trials", "200"});
  CHECK(r.code == 0);
  CHECK(r.out.find("rho_star=") != std::string::npos);
  CHECK(r.out.find("PASS") != std::string::npos);
  const auto ios = call({"check", "--rule", "ios", "--trials", "200"});
  CHECK(ios.code == 0);
  CHECK(ios.out.find("rho_ref=0.25") != std::string::npos);
}

TEST_CASE("run writes trace, config and manifest") {
  TempDir tmp("brdsgd_unit_cli_run");
  std::ofstream(tmp.path / "exp.toml") << kConfig;
  const auto out = tmp.path / "out";
  const auto r = call({"run", "--config", (tmp.path / "exp.toml").string(), "--out", out.string()});
  REQUIRE(r.code == 0);
  const auto dir = only_dir(out);
  CHECK(dir.filename().string().size() == 16 + 3);
  const auto trace = slurp(dir / "trace.csv");
  CHECK(trace.rfind("k,avg_loss_train,avg_loss_test,acc_test,H,delta,eta\n0,", 0) == 0);
  CHECK(std::count(trace.begin(), trace.end(), '\n') == 6);
  const auto manifest = slurp(dir / "manifest");
  CHECK(manifest.find("command = \"run\"") != std::string::npos);
  CHECK(manifest.find("seed = 2") != std::string::npos);
  CHECK(fs::exists(dir / "config.toml"));

  const auto again = tmp.path / "again";
  call({"run", "--config", (tmp.path / "exp.toml").string(), "--out", again.string()});
  CHECK(slurp(only_dir(again) / "trace.csv") == trace);
}

TEST_CASE("pair and sweep") {
  TempDir tmp("brdsgd_unit_cli_pair");
  std::ofstream(tmp.path / "exp.toml") << kConfig;
  const auto cfg = (tmp.path / "exp.toml").string();

  // agent 0 may be Byzantine, so try agents until one is honest
  int code = 1;
  for (int a = 0; a < 6 && code != 0; ++a) {
    code = call({"pair", "--config", cfg, "--agent", std::to_string(a), "--index", "1", "--out",
                 (tmp.path / "pair").string()}).code;
  }
  REQUIRE(code == 0);
  const auto dir = only_dir(tmp.path / "pair");
  CHECK(fs::exists(dir / "trace_perturbed.csv"));
  const auto trace = slurp(dir / "trace.csv");
  CHECK(trace.find(",,\n") == std::string::npos);

  const auto s = call({"sweep", "--config", cfg, "--axis", "rule", "--values", "tm,ios,scc:0.5", "--out",
                       (tmp.path / "sweep").string()});
  REQUIRE(s.code == 0);
  const auto sdir = only_dir(tmp.path / "sweep");
  CHECK(sdir.filename().string().find("-sweep-rule") != std::string::npos);
  const auto summary = slurp(sdir / "summary.csv");
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 4);
  CHECK(fs::exists(sdir / "rule_tm.csv"));

  const auto bad = call({"sweep", "--config", cfg, "--axis", "rule", "--values", "tm:9", "--out",
                         (tmp.path / "sweep_bad").string()});
  CHECK(bad.code == 1);
}
