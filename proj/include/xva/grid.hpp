#pragma once

#include <vector>

#include "xva/model.hpp"

namespace xva {

/// Uniform grid in log-spot, centered so the origin is a node, carrying the
/// exponential weight exp(-mu |x|) of the ambient weighted L2 space.
struct SpatialGrid {
  double x_min = 0.0;
  double x_max = 0.0;
  int n = 0;
  double h = 0.0;
  double mu = 0.0;

  double node(int i) const { return x_min + h * static_cast<double>(i); }
};

SpatialGrid make_grid(double x_min, double x_max, int n, double mu);

/// Nodal values of a function of x at one instant of the marching clock.
struct Field {
  SpatialGrid grid;
  std::vector<double> values;
  double time = 0.0;
};

struct SampledPayoff {
  Field field;
  double c_h = 0.0;  // empirical growth constant: max |v(x)| exp(-|x|) over nodes
};

/// Evaluates the payoff at spot exp(x_i) for every node.
SampledPayoff sample_payoff(const Payoff& payoff, const SpatialGrid& grid);

/// Trapezoid approximation of the weighted L2 norm
/// sqrt(integral of f(x)^2 exp(-mu |x|) dx) over the grid span.
double weighted_l2(const Field& f);

/// sup over the series of exp(-omega t) * weighted_l2(field at t); the norm
/// the contraction argument of the iteration is stated in.
double weighted_sup(const std::vector<Field>& series, double omega);

}  // namespace xva
