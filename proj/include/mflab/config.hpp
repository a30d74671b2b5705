#pragma once
// Experiment configuration: strict JSON parsing, validation and hashing.
//
// Every key is optional and falls back to the defaults below; unknown keys
// are rejected so a typo cannot silently select a default.

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "mflab/hartree.hpp"
#include "mflab/lattice.hpp"
#include "mflab/report.hpp"

namespace mflab::config {

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class AlphaRule { None, Fixed, Power };

struct ExperimentConfig {
  struct Grid {
    int M = 6;
    double dx = 1.0;
  } grid;
  struct Potential {
    std::string family = "soft-coulomb";  // soft-coulomb | gaussian | constant | zero
    double v0 = 1.0;
    double a = 1.0;      // soft-coulomb core
    double sigma = 1.0;  // gaussian width
  } potential;
  struct Regularization {
    AlphaRule rule = AlphaRule::Power;
    double alpha = 0.1;  // fixed rule
    int r = 3;           // power rule: alpha_N = N^{-r}
    std::vector<double> alpha_grid{0.2, 0.1, 0.05, 0.025};
  } regularization;
  struct Initial {
    std::string kind = "gaussian";  // gaussian | uniform
    double center = 0.0;
    double width = 1.0;
    double momentum = 0.5;
  } initial;
  struct Sweep {
    std::vector<int> N{2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::vector<double> t{0.5, 1.0};
  } sweep;
  struct Solver {
    double dt = 1e-3;
    hartree::Scheme scheme = hartree::Scheme::Yoshida4;
  } solver;
  struct Fock {
    int n_max = 16;
  } fock;
  struct Output {
    std::string dir = "out";
  } output;
  int workers = 1;
  std::size_t dimension_cap = 20000;

  lattice::LatticeGrid make_grid() const;
  lattice::PotentialSpec make_potential(const lattice::LatticeGrid& grid) const;
  CVec make_initial() const;
  /// Cutoff for N particles under the configured rule; 0 means no cutoff.
  double alpha_for(int n) const;
  /// Potential regularized for N particles.
  lattice::PotentialSpec regularized_potential(const lattice::LatticeGrid& grid, int n) const;
  double max_time() const;

  /// Canonical form: every key present, fixed order.
  report::Json to_json() const;
  /// to_json() without workers and output: the part that determines results.
  report::Json result_json() const;
  /// FNV-1a of the canonical result_json() dump, 16 hex digits.
  std::string hash() const;
};

/// Throws ConfigError on unknown keys, wrong types or invalid values.
ExperimentConfig parse(const report::Json& j);
ExperimentConfig load(const std::filesystem::path& path);

/// Range checks and the dimension cap against the largest sweep N.
void validate(const ExperimentConfig& cfg);

const char* to_string(AlphaRule r);

}  // namespace mflab::config
