#include "xva/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace xva {

SpatialGrid make_grid(double x_min, double x_max, int n, double mu) {
  if (!std::isfinite(x_min) || !std::isfinite(x_max) || !(x_min < 0.0) || !(0.0 < x_max))
    throw std::invalid_argument("grid: must satisfy x_min < 0 < x_max");
  if (n < 3 || n % 2 == 0)
    throw std::invalid_argument("grid.n: must be odd and >= 3");
  if (!std::isfinite(mu) || !(mu > 2.0))
    throw std::invalid_argument("grid.mu: weight decay must be > 2");
  SpatialGrid g;
  g.x_min = x_min;
  g.x_max = x_max;
  g.n = n;
  g.h = (x_max - x_min) / static_cast<double>(n - 1);
  g.mu = mu;
  return g;
}

SampledPayoff sample_payoff(const Payoff& payoff, const SpatialGrid& grid) {
  payoff.validate();
  SampledPayoff out;
  out.field.grid = grid;
  out.field.values.resize(static_cast<std::size_t>(grid.n));
  out.field.time = 0.0;
  double c_h = 0.0;
  for (int i = 0; i < grid.n; ++i) {
    const double x = grid.node(i);
    const double v = payoff(std::exp(x));
    if (!std::isfinite(v))
      throw std::invalid_argument("payoff: non-finite value sampled on the grid");
    out.field.values[static_cast<std::size_t>(i)] = v;
    c_h = std::max(c_h, std::abs(v) * std::exp(-std::abs(x)));
  }
  out.c_h = c_h;
  return out;
}

double weighted_l2(const Field& f) {
  const SpatialGrid& g = f.grid;
  if (g.n < 3 || f.values.size() != static_cast<std::size_t>(g.n))
    throw std::invalid_argument("field: values do not match the grid");
  double acc = 0.0;
  for (int i = 0; i < g.n; ++i) {
    const double x = g.node(i);
    const double v = f.values[static_cast<std::size_t>(i)];
    double term = v * v * std::exp(-g.mu * std::abs(x));
    if (i == 0 || i == g.n - 1) term *= 0.5;
    acc += term;
  }
  return std::sqrt(acc * g.h);
}

double weighted_sup(const std::vector<Field>& series, double omega) {
  if (series.empty()) throw std::invalid_argument("weighted_sup: empty series");
  double m = 0.0;
  for (const Field& f : series)
    m = std::max(m, std::exp(-omega * f.time) * weighted_l2(f));
  return m;
}

}  // namespace xva
