#include "mflab/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "mflab/fock.hpp"

namespace mflab::config {

const char* to_string(AlphaRule r) {
  switch (r) {
    case AlphaRule::None: return "none";
    case AlphaRule::Fixed: return "fixed";
    case AlphaRule::Power: return "power";
  }
  return "none";
}

namespace {

using report::Json;

AlphaRule alpha_rule_from_string(const std::string& s) {
  if (s == "none") return AlphaRule::None;
  if (s == "fixed") return AlphaRule::Fixed;
  if (s == "power") return AlphaRule::Power;
  throw ConfigError("regularization.rule: unknown rule '" + s + "' (expected none, fixed or power)");
}

// Walks one object, rejecting keys that are never read.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + "must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown key '" + join(it.key()) + "'");
    }
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const Json::exception&) {
      throw ConfigError("'" + join(key) + "' has the wrong type");
    }
  }

  const Json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "config " : "'" + path_ + "' "; }
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

ExperimentConfig parse(const Json& j) {
  ExperimentConfig c;
  Section root(j, "");
  if (const Json* g = root.child("grid")) {
    Section s(*g, "grid");
    s.get("M", c.grid.M);
    s.get("dx", c.grid.dx);
  }
  if (const Json* p = root.child("potential")) {
    Section s(*p, "potential");
    s.get("family", c.potential.family);
    s.get("v0", c.potential.v0);
    s.get("a", c.potential.a);
    s.get("sigma", c.potential.sigma);
  }
  if (const Json* r = root.child("regularization")) {
    Section s(*r, "regularization");
    std::string rule = to_string(c.regularization.rule);
    s.get("rule", rule);
    c.regularization.rule = alpha_rule_from_string(rule);
    s.get("alpha", c.regularization.alpha);
    s.get("r", c.regularization.r);
    s.get("alpha_grid", c.regularization.alpha_grid);
  }
  if (const Json* i = root.child("initial")) {
    Section s(*i, "initial");
    s.get("kind", c.initial.kind);
    s.get("center", c.initial.center);
    s.get("width", c.initial.width);
    s.get("momentum", c.initial.momentum);
  }
  if (const Json* w = root.child("sweep")) {
    Section s(*w, "sweep");
    s.get("N", c.sweep.N);
    s.get("t", c.sweep.t);
  }
  if (const Json* v = root.child("solver")) {
    Section s(*v, "solver");
    s.get("dt", c.solver.dt);
    std::string scheme = hartree::to_string(c.solver.scheme);
    s.get("scheme", scheme);
    try {
      c.solver.scheme = hartree::scheme_from_string(scheme);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("solver.scheme: ") + e.what());
    }
  }
  if (const Json* f = root.child("fock")) {
    Section s(*f, "fock");
    s.get("n_max", c.fock.n_max);
  }
  if (const Json* o = root.child("output")) {
    Section s(*o, "output");
    s.get("dir", c.output.dir);
  }
  root.get("workers", c.workers);
  root.get("dimension_cap", c.dimension_cap);
  validate(c);
  return c;
}

ExperimentConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse(j);
}

void validate(const ExperimentConfig& c) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (c.grid.M < 2) fail("grid.M must be at least 2");
  if (!(c.grid.dx > 0.0)) fail("grid.dx must be positive");
  try {
    lattice::potential_family_from_string(c.potential.family);
  } catch (const std::exception& e) {
    fail(std::string("potential.family: ") + e.what());
  }
  if (c.potential.family == "soft-coulomb" && !(c.potential.a > 0.0)) fail("potential.a must be positive");
  if (c.potential.family == "gaussian" && !(c.potential.sigma > 0.0)) fail("potential.sigma must be positive");
  const auto& reg = c.regularization;
  if (reg.rule == AlphaRule::Fixed && !(reg.alpha > 0.0)) fail("regularization.alpha must be positive");
  if (reg.rule == AlphaRule::Power && reg.r < 1) fail("regularization.r must be an integer >= 1");
  for (double a : reg.alpha_grid)
    if (!(a > 0.0)) fail("regularization.alpha_grid entries must be positive");
  if (c.initial.kind != "gaussian" && c.initial.kind != "uniform")
    fail("initial.kind must be gaussian or uniform");
  if (c.initial.kind == "gaussian" && !(c.initial.width > 0.0)) fail("initial.width must be positive");
  if (c.sweep.N.empty()) fail("sweep.N must not be empty");
  for (int n : c.sweep.N)
    if (n < 1) fail("sweep.N entries must be positive");
  for (double t : c.sweep.t)
    if (!(t >= 0.0)) fail("sweep.t entries must be nonnegative");
  if (!(c.solver.dt > 0.0)) fail("solver.dt must be positive");
  const double budget = 0.5 / c.make_grid().laplacian_norm();
  if (c.solver.dt > budget) {
    std::ostringstream os;
    os << "solver.dt = " << c.solver.dt << " exceeds the stability budget " << budget;
    fail(os.str());
  }
  if (c.fock.n_max < 2) fail("fock.n_max must be at least 2");
  if (c.workers < 1) fail("workers must be at least 1");
  if (c.dimension_cap < 1) fail("dimension_cap must be positive");
  const int n_top = *std::max_element(c.sweep.N.begin(), c.sweep.N.end());
  const auto dim = fock::sector_dimension(c.grid.M, n_top);
  if (dim > c.dimension_cap) {
    std::ostringstream os;
    os << "sweep N = " << n_top << " on M = " << c.grid.M << " sites needs dimension " << dim
       << " > dimension_cap " << c.dimension_cap;
    fail(os.str());
  }
}

lattice::LatticeGrid ExperimentConfig::make_grid() const { return lattice::build_grid(grid.M, grid.dx); }

lattice::PotentialSpec ExperimentConfig::make_potential(const lattice::LatticeGrid& g) const {
  switch (lattice::potential_family_from_string(potential.family)) {
    case lattice::PotentialFamily::Zero: return lattice::PotentialSpec::zero(g);
    case lattice::PotentialFamily::Constant: return lattice::PotentialSpec::constant(g, potential.v0);
    case lattice::PotentialFamily::SoftCoulomb: return lattice::PotentialSpec::soft_coulomb(g, potential.v0, potential.a);
    case lattice::PotentialFamily::Gaussian: return lattice::PotentialSpec::gaussian(g, potential.v0, potential.sigma);
  }
  throw ConfigError("unreachable potential family");
}

CVec ExperimentConfig::make_initial() const {
  if (initial.kind == "uniform") return hartree::uniform_state(grid.M);
  return hartree::gaussian_packet(grid.M, initial.center, initial.width, initial.momentum);
}

double ExperimentConfig::alpha_for(int n) const {
  switch (regularization.rule) {
    case AlphaRule::None: return 0.0;
    case AlphaRule::Fixed: return regularization.alpha;
    case AlphaRule::Power: return std::pow(double(n), -double(regularization.r));
  }
  return 0.0;
}

lattice::PotentialSpec ExperimentConfig::regularized_potential(const lattice::LatticeGrid& g, int n) const {
  const auto v = make_potential(g);
  const double a = alpha_for(n);
  return a > 0.0 ? lattice::regularize(v, a) : v;
}

double ExperimentConfig::max_time() const {
  return sweep.t.empty() ? 0.0 : *std::max_element(sweep.t.begin(), sweep.t.end());
}

report::Json ExperimentConfig::to_json() const {
  Json j;
  j["grid"] = {{"M", grid.M}, {"dx", grid.dx}};
  j["potential"] = {{"family", potential.family}, {"v0", potential.v0}, {"a", potential.a}, {"sigma", potential.sigma}};
  j["regularization"] = {{"rule", to_string(regularization.rule)},
                         {"alpha", regularization.alpha},
                         {"r", regularization.r},
                         {"alpha_grid", regularization.alpha_grid}};
  j["initial"] = {{"kind", initial.kind},
                  {"center", initial.center},
                  {"width", initial.width},
                  {"momentum", initial.momentum}};
  j["sweep"] = {{"N", sweep.N}, {"t", sweep.t}};
  j["solver"] = {{"dt", solver.dt}, {"scheme", hartree::to_string(solver.scheme)}};
  j["fock"] = {{"n_max", fock.n_max}};
  j["output"] = {{"dir", output.dir}};
  j["workers"] = workers;
  j["dimension_cap"] = dimension_cap;
  return j;
}

report::Json ExperimentConfig::result_json() const {
  // Worker count and output location do not change any number in a report.
  Json j = to_json();
  j.erase("workers");
  j.erase("output");
  return j;
}

std::string ExperimentConfig::hash() const { return report::hex64(report::fnv1a(report::dump(result_json()))); }

}  // namespace mflab::config
