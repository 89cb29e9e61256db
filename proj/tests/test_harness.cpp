#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "doctest.h"

#include "abflab/csv.hpp"
#include "abflab/errors.hpp"
#include "abflab/harness.hpp"

using namespace abflab;
using namespace abflab::harness;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("abflab_harness_" + std::to_string(std::rand()) + "_" +
                                        std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunOptions to(const fs::path& p) {
  RunOptions o;
  o.out = p.string();
  return o;
}

int cli(const std::string& args) {
  const char* exe = std::getenv("ABFLAB_CLI");
  REQUIRE(exe != nullptr);
  const int rc = std::system((std::string(exe) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = parse_config("# comment\nrun_kind = pde_frozen\n  n_x=64 # trailing\nbeta=2\ntrack_ito=yes\n\n");
  CHECK(c.run_kind == RunKind::pde_frozen);
  CHECK(c.n_x == 64);
  CHECK(c.beta == 2.0);
  CHECK(c.track_ito);
  CHECK(c.n_y == 128);

  CHECK_THROWS_AS(parse_config("run_kind=oracle_only\nbogus=1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("run_kind=oracle_only\nn_x=1\nn_x=2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("run_kind=oracle_only\nn_x=-3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("run_kind=oracle_only\nbeta=fast\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("run_kind=sideways\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("n_x=4\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("run_kind=oracle_only\nno equals sign\n"), ConfigError);
}

TEST_CASE("echo reproduces the configuration") {
  auto c = parse_config("run_kind=particles_metric\nseed=18446744073709551615\ninit_y_sd=0.35\ndt=1e-3\n");
  const auto again = parse_config(echo(c));
  CHECK(echo(again) == echo(c));
  CHECK(again.seed == c.seed);
  CHECK(again.init_y_sd == 0.35);
  CHECK(again.dt == 1e-3);
  CHECK(echo(c).find("init_y_sd=0.35\n") != std::string::npos);
}

TEST_CASE("validation") {
  auto p = parse_config("run_kind=particles_metric\n");
  CHECK_THROWS_AS(validate(p), ConfigError);
  p.seed = 1;
  CHECK_NOTHROW(validate(p));
  p.xi = "parabolic";
  CHECK_NOTHROW(validate(p));
  auto q = parse_config("run_kind=pde_abf_metric\nxi=parabolic\n");
  CHECK_THROWS_AS(validate(q), ConfigError);
  auto r = parse_config("run_kind=pde_abf_metric\nbeta=-1\n");
  CHECK_THROWS_AS(validate(r), ConfigError);
}

TEST_CASE("CFL violations fail before anything is written") {
  TempDir tmp;
  auto c = parse_config("run_kind=pde_abf_metric\nn_x=32\nn_y=32\ndt=0.1\n");
  const auto out = tmp.path / "run";
  CHECK_THROWS_AS(run(c, to(out)), ConfigError);
  CHECK(!fs::exists(out));
}

TEST_CASE("oracle run writes the profile") {
  TempDir tmp;
  const auto r = run(parse_config("run_kind=oracle_only\n"), to(tmp.path / "o"));
  CHECK(r.exit_code == 0);
  const auto t = csv::read((tmp.path / "o" / "profile.csv").string());
  const auto z = t.column("z");
  const auto ap = t.column("Aprime");
  CHECK(z.size() == 257);
  bool found = false;
  for (std::size_t i = 0; i < z.size(); ++i)
    if (z[i] == 0.25) {
      found = true;
      CHECK(std::abs(ap[i] + 2 * std::numbers::pi) < 1e-6);
    }
  CHECK(found);
  CHECK(std::abs(r.summary["oracle"]["Aprime_quarter"].get<double>() + 2 * std::numbers::pi) < 1e-6);
  CHECK(fs::exists(tmp.path / "o" / "config_echo.txt"));
  CHECK(fs::exists(tmp.path / "o" / "summary.json"));
}

TEST_CASE("frozen run from equilibrium stays at equilibrium") {
  TempDir tmp;
  const auto r = run(parse_config("run_kind=pde_frozen\nn_x=32\nn_y=32\npde_init=equilibrium\nt_end=0.2\noutput_stride=50\n"),
                     to(tmp.path / "f"));
  CHECK(r.exit_code == 0);
  const auto t = csv::read((tmp.path / "f" / "diagnostics.csv").string());
  for (const char* col : {"E_total", "E_macro", "E_micro", "fisher_macro", "tv_macro", "force_error_sq"})
    for (double v : t.column(col)) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("particle runs are reproducible and thread independent") {
  TempDir tmp;
  const auto c = parse_config("run_kind=particles_metric\nn_particles=2000\nt_end=0.05\nseed=5\noutput_stride=10\nsnapshot_stride=25\n");
  run(c, to(tmp.path / "a"));
  run(c, to(tmp.path / "b"));
  RunOptions o = to(tmp.path / "c");
  o.threads = 3;
  run(c, o);
  const auto da = slurp(tmp.path / "a" / "diagnostics.csv");
  CHECK(!da.empty());
  CHECK(da == slurp(tmp.path / "b" / "diagnostics.csv"));
  CHECK(da == slurp(tmp.path / "c" / "diagnostics.csv"));
  CHECK(slurp(tmp.path / "a" / "bias_final.csv") == slurp(tmp.path / "c" / "bias_final.csv"));
  CHECK(fs::exists(tmp.path / "a" / "snapshots" / "particles_00000025.csv"));

  // a different seed changes the trajectory
  RunOptions s = to(tmp.path / "d");
  s.seed = 6;
  run(c, s);
  CHECK(da != slurp(tmp.path / "d" / "diagnostics.csv"));
}

TEST_CASE("output directory rules") {
  TempDir tmp;
  const auto c = parse_config("run_kind=oracle_only\nn_z=16\n");
  run(c, to(tmp.path / "x"));
  CHECK_THROWS_AS(run(c, to(tmp.path / "x")), ConfigError);
  RunOptions o = to(tmp.path / "x");
  o.overwrite = true;
  CHECK_NOTHROW(run(c, o));

  setenv("ABFLAB_OUT", (tmp.path / "root").c_str(), 1);
  const auto r1 = run(c, {});
  const auto r2 = run(c, {});
  unsetenv("ABFLAB_OUT");
  CHECK(r1.out_dir != r2.out_dir);
  CHECK(fs::path(r1.out_dir).parent_path() == tmp.path / "root");
  CHECK(fs::path(r1.out_dir).filename().string().rfind("oracle_only_", 0) == 0);
}

TEST_CASE("compare") {
  TempDir tmp;
  const auto c = parse_config("run_kind=pde_abf_metric\nn_x=16\nn_y=16\nt_end=0.05\nn_bins=8\n");
  run(c, to(tmp.path / "a"));
  const auto self = compare_runs((tmp.path / "a").string(), (tmp.path / "a").string(), 0.0);
  CHECK(self.exit_code == 0);
  CHECK(self.max_abs_delta == 0.0);
  CHECK(self.bias_bins == 8);
  CHECK(self.bias_bins_within == 8);

  const auto missing = compare_runs((tmp.path / "a").string(), (tmp.path / "nope").string(), std::nullopt);
  CHECK(missing.exit_code == 2);
  CHECK(missing.problems.size() == 1);

  fs::create_directories(tmp.path / "bad");
  std::ofstream(tmp.path / "bad" / "summary.json") << "{ not json";
  CHECK(compare_runs((tmp.path / "a").string(), (tmp.path / "bad").string(), std::nullopt).exit_code == 2);
}

TEST_CASE("rates") {
  TempDir tmp;
  run(parse_config("run_kind=marginal_only\nn_x=64\nt_end=0.05\noutput_stride=5\ninit_amplitude=0.1\n"), to(tmp.path / "m"));
  const auto lines = rates((tmp.path / "m").string());
  CHECK(!lines.empty());
  const auto gp = slurp(tmp.path / "m" / "rates.gp");
  CHECK(gp.find("diagnostics.csv") != std::string::npos);
}

TEST_CASE("command line") {
  TempDir tmp;
  const auto cfg = tmp.path / "frozen.cfg";
  std::ofstream(cfg) << "run_kind=pde_frozen\nn_x=16\nn_y=16\nt_end=0.02\n";
  CHECK(cli("run --config " + cfg.string() + " --out " + (tmp.path / "r").string()) == 0);
  CHECK(fs::exists(tmp.path / "r" / "summary.json"));
  CHECK(cli("run --config " + cfg.string() + " --out " + (tmp.path / "r").string()) != 0);
  CHECK(cli("run --config " + cfg.string() + " --out " + (tmp.path / "r").string() + " --overwrite") == 0);
  CHECK(cli("oracle --out " + (tmp.path / "o").string()) == 0);
  CHECK(cli("compare " + (tmp.path / "r").string() + " " + (tmp.path / "r").string()) == 0);
  CHECK(cli("compare " + (tmp.path / "r").string() + " " + (tmp.path / "none").string()) == 2);
  CHECK(cli("rates " + (tmp.path / "r").string()) == 0);
  CHECK(cli("run --config " + (tmp.path / "missing.cfg").string()) != 0);
  CHECK(cli("launch") != 0);

  const auto bad = tmp.path / "bad.cfg";
  std::ofstream(bad) << "run_kind=particles_plain\n";
  CHECK(cli("run --config " + bad.string() + " --out " + (tmp.path / "p").string()) != 0);
  CHECK(!fs::exists(tmp.path / "p"));
  CHECK(cli("run --config " + bad.string() + " --seed 3 --out " + (tmp.path / "p").string()) == 0);
}

TEST_CASE("shipped example configs are valid") {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(fs::path(ABFLAB_SOURCE_DIR) / "configs")) {
    if (e.path().extension() != ".cfg") continue;
    INFO(e.path().string());
    CHECK_NOTHROW(validate(load_config(e.path().string())));
    ++n;
  }
  CHECK(n >= 5);
}
