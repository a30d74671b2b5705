#pragma once
// Least-squares fits used by the rate sweep and the growth-envelope checks.

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mflab::fit {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares y = intercept + slope x.  Needs >= 2 distinct x.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct RateFit {
  bool degenerate = false;
  std::string reason;  // set when degenerate
  LineFit line;        // on (log N, log distance)
};

/// log(distance) against log(N).  Fewer than 3 points or a nonpositive
/// distance give a degenerate verdict instead of a fit.
RateFit fit_rate(const std::vector<std::pair<double, double>>& points);

struct GrowthFit {
  bool resolved = false;   // envelope rose above 10x the floor
  double max_excess = 0.0; // max(envelope / envelope(0)) - 1
  double c = 1.0;          // envelope ~ C e^{K t}
  double k = 0.0;
  double r2 = 1.0;
};

/// Running-max envelope of `values` (taken relative to values[0] when
/// positive), then log(envelope) = log C + K t.  Below the floor the fit
/// is skipped and only max_excess is meaningful.
GrowthFit fit_growth(const std::vector<double>& t, const std::vector<double>& values, double floor = 1e-10);

}  // namespace mflab::fit
