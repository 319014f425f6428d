#pragma once

#include <functional>
#include <vector>

#include "xva/continuation.hpp"
#include "xva/evolution.hpp"
#include "xva/grid.hpp"

namespace xva {

/// Tridiagonal operator stored by bands; sub[0] and super[n-1] are unused.
struct Tridiagonal {
  std::vector<double> sub, diag, super;
};

std::vector<double> tri_matvec(const Tridiagonal& op, const std::vector<double>& v);

/// Thomas sweep. Throws if a pivot collapses, which on these
/// diagonally dominant systems signals a broken assembly, not roundoff.
std::vector<double> thomas_solve(const Tridiagonal& op, std::vector<double> rhs);

struct FdConfig {
  double theta = 0.5;
  /// Optional Dirichlet overrides (functions of time). When absent the
  /// boundary rows follow the shared continuation rule: pinned values on
  /// zero / forward-asymptote sides, a zero-gradient row on clamped sides.
  std::function<double(double)> left_value, right_value;
};

/// Implicit and explicit halves of one theta step,
///   (I - theta dt L) v_new = (I + (1 - theta) dt L) v_old + dt f_mid,
/// with the spatial operator L frozen at the step midpoint. Boundary rows
/// are identity here; the marcher rewrites them.
struct StepOperators {
  Tridiagonal implicit_op, explicit_op;
  double diffusion = 0.0;  // sigma^2 / 2 at the midpoint
  double advection = 0.0;  // q - gamma - sigma^2 / 2 at the midpoint
};

StepOperators assemble_step(const CoefficientIntegrals& ci, double r_g, const SpatialGrid& g,
                            double t_mid, double dt, double theta);

/// Theta-scheme marcher with the same level layout and midpoint source
/// convention as the kernel marcher.
std::vector<Field> fd_solve(const CoefficientIntegrals& ci, double r_g,
                            const Continuation& cont, const Field& v0, const SourceFn& source,
                            int t_steps, double horizon, const FdConfig& cfg);

}  // namespace xva
