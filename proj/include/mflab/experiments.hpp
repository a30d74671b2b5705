#pragma once
// Experiment drivers behind the CLI.  Each writes its files under `out` and
// returns the check bundle; wall-clock data goes to separate timing files so
// the reports themselves are byte-reproducible.

#include <filesystem>
#include <string>
#include <vector>

#include "mflab/config.hpp"
#include "mflab/report.hpp"

namespace mflab::experiments {

struct Outcome {
  report::CheckBundle checks;
  std::vector<std::filesystem::path> files;  // data files written (timing excluded)
  double seconds = 0.0;

  bool pass() const { return checks.all_pass(); }
};

/// Distances of gamma1 of the exact N-body state from the Hartree projector,
/// slope fits per t, the 1/sqrt(N) envelope and the second-marginal inequality.
Outcome run_rate_sweep(const config::ExperimentConfig& cfg, const std::filesystem::path& out);

/// Raw-vs-regularized gaps over the alpha grid, many-body and Hartree.
Outcome run_regularization_suite(const config::ExperimentConfig& cfg, const std::filesystem::path& out);

/// Fock algebra, coherent sector factor and the quadratic-flow property checks.
Outcome run_property_battery(const config::ExperimentConfig& cfg, const std::filesystem::path& out);

/// One Hartree trajectory with conservation and reversal checks.
Outcome run_hartree_solve(const config::ExperimentConfig& cfg, const std::filesystem::path& out);

/// Refits a rate CSV (columns N, t, trace_distance).
Outcome run_fit(const config::ExperimentConfig& cfg, const std::filesystem::path& input,
                const std::filesystem::path& out);

}  // namespace mflab::experiments
