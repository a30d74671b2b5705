#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace mflab {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

inline constexpr cplx kI{0.0, 1.0};

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A Fock-space operation needs a larger occupation cap than the basis has.
class HeadroomError : public Error {
 public:
  HeadroomError(const std::string& what, int required_n_max)
      : Error(what), required_n_max_(required_n_max) {}
  int required_n_max() const noexcept { return required_n_max_; }

 private:
  int required_n_max_;
};

}  // namespace mflab
