// Acceptance suite: one PASS/FAIL line per criterion.
//
// Criteria listed with --known-failure still print their real verdict but do
// not change the exit code; the line is tagged so the failure stays visible.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mflab/config.hpp"
#include "mflab/experiments.hpp"

using namespace mflab;
namespace fs = std::filesystem;

#ifndef MFLAB_CONFIG_DIR
#define MFLAB_CONFIG_DIR "configs"
#endif

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

// Pass when every check whose name starts with `prefix` passes (and at least one exists).
Verdict group(const experiments::Outcome& o, const std::string& prefix) {
  Verdict v;
  int n = 0;
  for (const auto& r : o.checks.records()) {
    if (r.name.rfind(prefix, 0) != 0) continue;
    ++n;
    if (!r.pass) {
      v.pass = false;
      v.detail += (v.detail.empty() ? "" : ", ") + r.name;
    }
  }
  if (n == 0) return {false, "no " + prefix + " checks ran"};
  if (v.pass) v.detail = std::to_string(n) + " checks";
  return v;
}

Verdict both(Verdict a, const Verdict& b) {
  a.pass = a.pass && b.pass;
  a.detail += "; " + b.detail;
  return a;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

const report::CheckRecord* find(const experiments::Outcome& o, const std::string& name, double t) {
  for (const auto& r : o.checks.records())
    if (r.name == name && r.params.contains("t") && r.params["t"].get<double>() == t) return &r;
  return nullptr;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  std::string config_dir = MFLAB_CONFIG_DIR, out_dir = "acceptance_out";
  std::vector<int> known;
  app.add_option("--configs", config_dir, "directory with the experiment configs");
  app.add_option("--out", out_dir, "scratch directory for reports");
  app.add_option("--known-failure", known, "criteria whose failure is documented and tolerated");
  CLI11_PARSE(app, argc, argv);
  const std::set<int> tolerated(known.begin(), known.end());

  const fs::path cfgs(config_dir), out(out_dir);
  auto load = [&](const char* name) { return config::load(cfgs / name); };
  auto timed = [](const std::function<experiments::Outcome()>& f, double& seconds) {
    const auto t0 = std::chrono::steady_clock::now();
    auto o = f();
    seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return o;
  };

  int failed = 0;
  auto report = [&](int id, const char* title, std::function<Verdict()> body) {
    Verdict v;
    try {
      v = body();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const bool excused = !v.pass && tolerated.count(id);
    if (!v.pass && !excused) ++failed;
    std::printf("%s criterion %d: %s (%s)%s\n", v.pass ? "PASS" : "FAIL", id, title, v.detail.c_str(),
                excused ? " [known failure]" : "");
    std::fflush(stdout);
  };

  const auto rate_cfg = load("rate_sweep.json");
  double rate_seconds = 0.0;
  experiments::Outcome rate;
  bool rate_ok = true;
  std::string rate_error;
  try {
    rate = timed([&] { return experiments::run_rate_sweep(rate_cfg, out / "rate_sweep"); }, rate_seconds);
  } catch (const std::exception& e) {
    rate_ok = false;
    rate_error = e.what();
  }

  report(1, "rate reproduction", [&]() -> Verdict {
    if (!rate_ok) return {false, "error: " + rate_error};
    const auto* slope = find(rate, "rate.slope", 1.0);
    const auto* env = find(rate, "rate.envelope_dominance", 1.0);
    if (!slope || !env) return {false, "t = 1 missing from the sweep"};
    const double s = slope->values["slope"].get<double>();
    const bool in_band = s >= -1.35 && s <= -0.65;
    std::ostringstream d;
    d << "slope " << s << ", envelope " << (env->pass ? "dominated" : "not dominated") << ", " << rate_seconds
      << " s";
    return {in_band && env->pass && rate_seconds <= 600.0, d.str()};
  });

  report(2, "noninteracting exactness", [&]() -> Verdict {
    double s = 0.0;
    const auto o = timed([&] { return experiments::run_rate_sweep(load("noninteracting.json"), out / "free"); }, s);
    auto v = group(o, "rate.");
    v.pass = v.pass && s <= 60.0;
    v.detail += ", " + std::to_string(s) + " s";
    return v;
  });

  experiments::Outcome props, props_free;
  std::string prop_error;
  try {
    props = experiments::run_property_battery(load("properties.json"), out / "properties");
    props_free = experiments::run_property_battery(load("properties_free.json"), out / "props_free");
  } catch (const std::exception& e) {
    prop_error = e.what();
  }
  auto prop_group = [&](const char* prefix) -> Verdict {
    if (!prop_error.empty()) return {false, "error: " + prop_error};
    return both(group(props, prefix), group(props_free, prefix));
  };
  report(3, "Fock algebra", [&] { return prop_group("fock."); });
  report(4, "coherent sector factor", [&] { return prop_group("sector_factor."); });

  report(5, "regularization gaps linear in alpha", [&] {
    return group(experiments::run_regularization_suite(load("regularization.json"), out / "regularization"), "regularization.");
  });

  report(6, "quadratic dynamics", [&] { return prop_group("quadratic."); });
  report(7, "operator bounds", [&]() -> Verdict {
    auto v = prop_group("operator.");
    // A truncation that is too small must raise, not pass silently.
    try {
      experiments::run_property_battery(load("broken_truncation.json"), out / "broken");
      return {false, "broken truncation did not raise"};
    } catch (const HeadroomError&) {
    }
    return v;
  });

  report(8, "second-marginal inequality", [&]() -> Verdict {
    if (!rate_ok) return {false, "error: " + rate_error};
    return group(rate, "rate.second_marginal_inequality");
  });

  report(9, "determinism and Hartree conservation", [&]() -> Verdict {
    Verdict v = group(experiments::run_hartree_solve(rate_cfg, out / "hartree"), "hartree.");
    // Rerun with a different worker count; data files must match byte for byte.
    auto again = rate_cfg;
    again.workers = rate_cfg.workers == 1 ? 2 : 1;
    experiments::run_rate_sweep(again, out / "rate_sweep_rerun");
    experiments::run_property_battery(load("properties.json"), out / "properties_rerun");
    std::vector<std::pair<fs::path, fs::path>> pairs{
        {out / "rate_sweep" / "rate_sweep.csv", out / "rate_sweep_rerun" / "rate_sweep.csv"},
        {out / "rate_sweep" / "rate_report.json", out / "rate_sweep_rerun" / "rate_report.json"},
        {out / "properties" / "properties.json", out / "properties_rerun" / "properties.json"},
        {out / "properties" / "property_curves.csv", out / "properties_rerun" / "property_curves.csv"}};
    for (const auto& [a, b] : pairs) {
      if (slurp(a).empty() || slurp(a) != slurp(b)) {
        v.pass = false;
        v.detail += "; " + a.filename().string() + " differs on rerun";
      }
    }
    if (v.pass) v.detail += "; reruns byte-identical";
    return v;
  });

  return failed == 0 ? 0 : 1;
}
