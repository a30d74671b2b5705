// mflab: command-line front end for the experiment drivers.
//
// Exit codes: 0 all checks pass, 1 a check failed, 2 bad config or usage,
// 3 truncation headroom exhausted, 4 any other error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mflab/config.hpp"
#include "mflab/experiments.hpp"

namespace fs = std::filesystem;
using namespace mflab;

namespace {

enum Exit { kPass = 0, kCheckFailed = 1, kConfig = 2, kHeadroom = 3, kError = 4 };

int finish(const experiments::Outcome& o) {
  for (const auto& r : o.checks.records())
    std::printf("%-4s %s\n", r.pass ? "ok" : "FAIL", r.name.c_str());
  for (const auto& f : o.files) std::printf("wrote %s\n", f.string().c_str());
  std::printf("%zu checks, %zu failed, %.2f s\n", o.checks.records().size(), o.checks.failures().size(),
              o.seconds);
  return o.pass() ? kPass : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field lattice experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir, input;
  int workers = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
    sub->add_option("--workers", workers, "worker threads (overrides workers)")->check(CLI::PositiveNumber);
  };
  auto* rate = app.add_subcommand("rate-sweep", "trace-distance rate over the N sweep");
  auto* reg = app.add_subcommand("section2", "raw vs regularized potential gaps over the alpha grid");
  auto* props = app.add_subcommand("lemmas", "Fock algebra and fluctuation-dynamics checks");
  auto* hs = app.add_subcommand("hartree-solve", "single Hartree trajectory with conservation checks");
  auto* fit = app.add_subcommand("fit", "refit slopes from a rate CSV");
  for (auto* sub : {rate, reg, props, hs, fit}) add_common(sub);
  fit->add_option("--input", input, "CSV with columns N, t, trace_distance")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kConfig;
  }

  try {
    auto cfg = config_path.empty() ? config::ExperimentConfig{} : config::load(config_path);
    if (workers > 0) cfg.workers = workers;
    const fs::path out = out_dir.empty() ? fs::path(cfg.output.dir) : fs::path(out_dir);
    fs::create_directories(out);

    if (rate->parsed()) return finish(experiments::run_rate_sweep(cfg, out));
    if (reg->parsed()) return finish(experiments::run_regularization_suite(cfg, out));
    if (props->parsed()) return finish(experiments::run_property_battery(cfg, out));
    if (hs->parsed()) return finish(experiments::run_hartree_solve(cfg, out));
    return finish(experiments::run_fit(cfg, input, out));
  } catch (const config::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const HeadroomError& e) {
    std::cerr << "headroom error: " << e.what() << '\n';
    return kHeadroom;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kError;
  }
}
