#include <doctest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "mflab/config.hpp"
#include "mflab/experiments.hpp"
#include "mflab/fit.hpp"
#include "mflab/report.hpp"
#include "mflab/workers.hpp"

using namespace mflab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mflab_test_xlab_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

config::ExperimentConfig small_sweep() {
  config::ExperimentConfig c;
  c.grid.M = 4;
  c.sweep.N = {2, 3, 4, 5};
  c.sweep.t = {0.5};
  c.solver.dt = 1e-2;
  return c;
}

}  // namespace

TEST_CASE("fit_rate on exact power laws") {
  std::vector<std::pair<double, double>> inv, inv_sqrt;
  for (int n = 2; n <= 10; ++n) {
    inv.push_back({double(n), 0.3 / n});
    inv_sqrt.push_back({double(n), 0.3 / std::sqrt(double(n))});
  }
  const auto a = fit::fit_rate(inv);
  REQUIRE_FALSE(a.degenerate);
  CHECK(a.line.slope == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(a.line.intercept == doctest::Approx(std::log(0.3)).epsilon(1e-12));
  CHECK(a.line.r2 == doctest::Approx(1.0));
  CHECK(fit::fit_rate(inv_sqrt).line.slope == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("fit_rate with 1% multiplicative noise") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> noise(0.0, 0.01);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::pair<double, double>> pts;
    for (int n = 2; n <= 10; ++n) pts.push_back({double(n), 0.2 / n * (1.0 + noise(rng))});
    CHECK(std::abs(fit::fit_rate(pts).line.slope + 1.0) <= 0.05);
  }
}

TEST_CASE("fit_rate degenerate inputs") {
  CHECK(fit::fit_rate({{2, 0.1}, {3, 0.05}}).degenerate);
  const auto z = fit::fit_rate({{2, 0.1}, {3, 0.0}, {4, 0.02}});
  CHECK(z.degenerate);
  CHECK_FALSE(z.reason.empty());
  CHECK_THROWS(fit::fit_line({1.0, 1.0}, {2.0, 3.0}));
}

TEST_CASE("fit_growth envelope") {
  std::vector<double> t, grow, flat;
  for (int i = 0; i <= 100; ++i) {
    t.push_back(0.02 * i);
    grow.push_back(2.0 * std::exp(0.7 * t.back()));
    flat.push_back(1.0 + 1e-13 * std::sin(double(i)));
  }
  const auto g = fit::fit_growth(t, grow);
  CHECK(g.resolved);
  CHECK(g.k == doctest::Approx(0.7).epsilon(1e-10));
  CHECK(g.c == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(g.r2 > 0.999);
  const auto f = fit::fit_growth(t, flat);
  CHECK_FALSE(f.resolved);
  CHECK(f.max_excess < 1e-12);
}

TEST_CASE("number formatting and hashing") {
  CHECK(report::fmt(0.1) == "0.10000000000000001");
  CHECK(report::fmt(1.0) == "1");
  CHECK(std::stod(report::fmt(M_PI)) == M_PI);
  // Published FNV-1a 64 test vectors.
  CHECK(report::fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(report::fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(report::hex64(0xabcULL) == "0000000000000abc");

  report::CsvTable t({"x", "name"});
  t.row() << 0.1 << "a,b";
  t.row() << 3 << "plain";
  std::ostringstream os;
  t.write(os);
  CHECK(os.str() == "x,name\n0.10000000000000001,\"a,b\"\n3,plain\n");
}

TEST_CASE("check records carry the required fields") {
  report::CheckBundle b;
  report::CheckRecord r;
  r.name = "x";
  r.tolerance = 1e-8;
  r.pass = false;
  b.add(r);
  const auto j = b.to_json("00ff");
  CHECK(j["config_hash"] == "00ff");
  CHECK(j["pass"] == false);
  const auto& c = j["checks"][0];
  for (const char* key : {"name", "params", "values", "tolerance", "pass"}) CHECK(c.contains(key));
  CHECK(b.failures().size() == 1);
}

TEST_CASE("config parsing is strict") {
  using report::Json;
  const auto c = config::parse(Json::parse(R"({"grid": {"M": 5}, "sweep": {"N": [2, 3]}})"));
  CHECK(c.grid.M == 5);
  CHECK(c.grid.dx == 1.0);
  CHECK(c.sweep.N == std::vector<int>{2, 3});
  CHECK_THROWS_AS(config::parse(Json::parse(R"({"grid": {"m": 5}})")), config::ConfigError);
  CHECK_THROWS_AS(config::parse(Json::parse(R"({"gird": {}})")), config::ConfigError);
  CHECK_THROWS_AS(config::parse(Json::parse(R"({"grid": {"M": "six"}})")), config::ConfigError);
  CHECK_THROWS_AS(config::parse(Json::parse(R"({"regularization": {"rule": "sometimes"}})")), config::ConfigError);
  CHECK_THROWS_AS(config::parse(Json::parse(R"({"solver": {"scheme": "euler"}})")), config::ConfigError);

  auto bad = config::ExperimentConfig{};
  bad.regularization.r = 0;
  CHECK_THROWS_AS(config::validate(bad), config::ConfigError);
  bad = {};
  bad.sweep.N = {2, 12};  // M = 6, N = 12: 6188 states is fine, cap lowered below it
  bad.dimension_cap = 5000;
  CHECK_THROWS_AS(config::validate(bad), config::ConfigError);
  bad = {};
  bad.solver.dt = 1.0;
  CHECK_THROWS_AS(config::validate(bad), config::ConfigError);
  CHECK_NOTHROW(config::validate(config::ExperimentConfig{}));
}

TEST_CASE("config round trip and hash") {
  config::ExperimentConfig a;
  const auto b = config::parse(a.to_json());
  CHECK(report::dump(a.to_json()) == report::dump(b.to_json()));
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 16);
  auto c = a;
  c.workers = 4;
  c.output.dir = "elsewhere";
  CHECK(c.hash() == a.hash());
  c.potential.v0 = 1.5;
  CHECK(c.hash() != a.hash());
}

TEST_CASE("alpha rules") {
  config::ExperimentConfig c;
  c.regularization.rule = config::AlphaRule::Power;
  c.regularization.r = 3;
  CHECK(c.alpha_for(2) == doctest::Approx(0.125));
  c.regularization.rule = config::AlphaRule::Fixed;
  c.regularization.alpha = 0.3;
  CHECK(c.alpha_for(7) == 0.3);
  c.regularization.rule = config::AlphaRule::None;
  CHECK(c.alpha_for(7) == 0.0);
}

TEST_CASE("worker pool merges in index order") {
  for (int w : {1, 2, 5}) {
    const auto out = workers::run_indexed<int>(17, w, [](std::size_t i) { return int(i * i); });
    REQUIRE(out.size() == 17);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == int(i * i));
  }
  std::vector<std::size_t> order{4, 3, 2, 1, 0};
  const auto rev = workers::run_indexed<int>(5, 2, [](std::size_t i) { return int(i); }, order);
  CHECK(rev == std::vector<int>{0, 1, 2, 3, 4});
  // The lowest failing index wins regardless of scheduling.
  try {
    workers::run_indexed<int>(8, 3, [](std::size_t i) -> int {
      if (i == 2 || i == 6) throw std::runtime_error("task " + std::to_string(i));
      return 0;
    });
    FAIL("expected a throw");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "task 2");
  }
}

TEST_CASE("rate sweep reports are identical across worker counts") {
  auto c = small_sweep();
  const auto d1 = scratch("w1"), d2 = scratch("w3");
  const auto a = experiments::run_rate_sweep(c, d1);
  c.workers = 3;
  const auto b = experiments::run_rate_sweep(c, d2);
  CHECK(a.checks.records().size() == b.checks.records().size());
  for (const char* f : {"rate_sweep.csv", "rate_report.json"}) CHECK(slurp(d1 / f) == slurp(d2 / f));
  const auto csv = slurp(d1 / "rate_sweep.csv");
  CHECK(csv.rfind("config_hash,M,N,", 0) == 0);
  CHECK(csv.find(c.hash()) != std::string::npos);

  const auto refit = experiments::run_fit(c, d1 / "rate_sweep.csv", d1);
  CHECK(refit.pass());
  const auto j = report::Json::parse(slurp(d1 / "fit.json"));
  const auto orig = report::Json::parse(slurp(d1 / "rate_report.json"));
  CHECK(j["fits"][0]["fit"]["slope"] == orig["fits"][0]["slope"]);
}

TEST_CASE("noninteracting sweep is exact and skips the slope") {
  auto c = small_sweep();
  c.potential.family = "zero";
  const auto o = experiments::run_rate_sweep(c, scratch("free"));
  CHECK(o.pass());
  bool saw_exactness = false;
  for (const auto& r : o.checks.records()) {
    CHECK(r.name != "rate.slope");
    if (r.name == "rate.noninteracting_exactness") {
      saw_exactness = true;
      CHECK(r.values["max_distance"].get<double>() < 1e-9);
    }
  }
  CHECK(saw_exactness);
}

TEST_CASE("property battery raises on a truncation that is too small") {
  config::ExperimentConfig c;
  c.grid.M = 3;
  c.potential.v0 = 1.0;
  c.regularization.rule = config::AlphaRule::None;
  c.sweep.N = {10};
  c.sweep.t = {1.0};
  c.solver.dt = 1e-2;
  c.fock.n_max = 4;
  CHECK_THROWS_AS(experiments::run_property_battery(c, scratch("broken")), HeadroomError);
}

TEST_CASE("hartree-solve conserves and reverses") {
  config::ExperimentConfig c;
  c.sweep.N = {4};
  const auto d = scratch("hartree");
  const auto o = experiments::run_hartree_solve(c, d);
  CHECK(o.pass());
  CHECK(fs::exists(d / "trajectory.csv"));
  CHECK(fs::exists(d / "conserved.csv"));
}
