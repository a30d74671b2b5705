#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "mflab/fock.hpp"

namespace mflab::fock {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void save_state(std::ostream& os, const FockState& s) {
  const auto& b = s.basis();
  if (b.n_min() != 0) throw std::invalid_argument("save_state: only full Fock bases are supported");
  os << b.modes() << ' ' << b.n_max() << '\n';
  for (std::size_t i = 0; i < b.size(); ++i) {
    for (int n : b.occupation(i)) os << n << ' ';
    const cplx a = s.amplitudes()(Eigen::Index(i));
    os << fmt17(a.real()) << ' ' << fmt17(a.imag()) << '\n';
  }
}

FockState load_state(std::istream& is) {
  int modes = 0, n_max = -1;
  if (!(is >> modes >> n_max) || modes < 1 || n_max < 0) throw Error("load_state: bad header");
  auto basis = make_basis(modes, n_max);
  FockState s(basis);
  std::vector<int> occ(static_cast<std::size_t>(modes));
  std::string re, im;
  for (std::size_t row = 0; row < basis->size(); ++row) {
    for (auto& n : occ) {
      if (!(is >> n)) throw Error("load_state: truncated row " + std::to_string(row));
    }
    if (!(is >> re >> im)) throw Error("load_state: truncated row " + std::to_string(row));
    const std::size_t i = basis->index_of(occ);
    if (i == npos) throw Error("load_state: occupation outside basis in row " + std::to_string(row));
    s.amplitudes()(Eigen::Index(i)) = cplx(std::stod(re), std::stod(im));
  }
  return s;
}

}  // namespace mflab::fock
