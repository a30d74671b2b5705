#include "mflab/fit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mflab::fit {

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("fit_line: size mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("fit_line: need at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_line: all x values coincide");
  LineFit f;
  f.points = n;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ssr += r * r;
  }
  f.r2 = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  return f;
}

RateFit fit_rate(const std::vector<std::pair<double, double>>& points) {
  RateFit out;
  if (points.size() < 3) {
    out.degenerate = true;
    out.reason = "fewer than 3 points";
    return out;
  }
  std::vector<double> lx, ly;
  for (const auto& [n, d] : points) {
    if (!(d > 0.0) || !(n > 0.0)) {
      out.degenerate = true;
      out.reason = "nonpositive distance";
      return out;
    }
    lx.push_back(std::log(n));
    ly.push_back(std::log(d));
  }
  out.line = fit_line(lx, ly);
  return out;
}

GrowthFit fit_growth(const std::vector<double>& t, const std::vector<double>& values, double floor) {
  if (t.size() != values.size() || t.empty()) throw std::invalid_argument("fit_growth: bad input");
  GrowthFit g;
  const double base = values.front() > 0.0 ? values.front() : 1.0;
  std::vector<double> env(values.size());
  double run = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    run = std::max(run, std::abs(values[i]) / base);
    env[i] = run;
  }
  g.max_excess = env.back() - env.front();
  g.resolved = g.max_excess > 10.0 * floor;
  if (!g.resolved || t.size() < 3) return g;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < env.size(); ++i) {
    if (env[i] > 0.0) {
      xs.push_back(t[i]);
      ys.push_back(std::log(env[i]));
    }
  }
  const auto line = fit_line(xs, ys);
  g.k = line.slope;
  g.c = std::exp(line.intercept) * base;
  g.r2 = line.r2;
  return g;
}

}  // namespace mflab::fit
