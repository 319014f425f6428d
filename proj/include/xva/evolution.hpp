#pragma once

#include <functional>
#include <vector>

#include "xva/continuation.hpp"
#include "xva/grid.hpp"
#include "xva/model.hpp"

namespace xva {

/// Exact integrals of the time-dependent coefficients: the accumulated half
/// variance S(s,t) = 1/2 int sigma^2 and the accumulated drift
/// R(s,t) = int (q - gamma - sigma^2/2). Curves are piecewise linear, so the
/// integrands are piecewise quadratic and Simpson's rule per segment is
/// exact; cumulative tables at the merged knots keep queries cheap.
class CoefficientIntegrals {
 public:
  CoefficientIntegrals(TimeCurve sigma, TimeCurve q, TimeCurve gamma);

  double half_variance(double s, double t) const;
  double drift_integral(double s, double t) const;
  /// int (q - gamma) = half_variance + drift_integral.
  double carry_integral(double s, double t) const;

  const TimeCurve& sigma() const { return sigma_; }
  const TimeCurve& q() const { return q_; }
  const TimeCurve& gamma() const { return gamma_; }

 private:
  double cum_to(const std::vector<double>& cum, bool variance, double x) const;
  double segment(bool variance, double a, double b) const;

  TimeCurve sigma_, q_, gamma_;
  std::vector<double> brk_;
  std::vector<double> cum_s_;
  std::vector<double> cum_r_;
};

/// Fundamental solution of the heat equation u_t = u_xx at elapsed "time" t:
/// (4 pi t)^(-1/2) exp(-x^2 / (4 t)). Unit mass for every t > 0.
double heat_kernel(double x, double t);

/// Kernel of the evolution operator between times s < t at signed node
/// offset dx: discounted, drift-shifted heat kernel.
double evolution_kernel(const CoefficientIntegrals& ci, double r_g, double s, double t,
                        double dx);

/// One application of the evolution operator over [s, t]: a discrete
/// convolution with a shared stencil of kernel weights. The stencil lattice
/// refines the grid spacing when the Gaussian would be under-resolved, the
/// weights are normalized so the discrete mass is exactly the discount, and
/// the field is read beyond the grid through the continuation rule at the
/// field's own time.
Field propagate(const CoefficientIntegrals& ci, double r_g, const Continuation& cont,
                const Field& v_s, double s, double t);

/// Same step restricted to output nodes [i0, i1); pure function of shared
/// inputs, safe to run concurrently on disjoint ranges.
void propagate_range(const CoefficientIntegrals& ci, double r_g, const Continuation& cont,
                     const Field& v_s, double s, double t, int i0, int i1, double* out);

/// Nodal values of the inhomogeneity at a requested time.
using SourceFn = std::function<std::vector<double>(double)>;

/// Variation-of-constants marcher. Each step applies the exact kernel to the
/// state and adds the midpoint source correction
///   v(t+dt) = T(t+dt, t) v(t) + dt * T(t+dt, t+dt/2) f(t+dt/2).
/// Returns every level including the initial one. The source field is read
/// beyond the grid through source_cont.
std::vector<Field> duhamel_solve(const CoefficientIntegrals& ci, double r_g,
                                 const Continuation& cont, const Continuation& source_cont,
                                 const Field& v0, const SourceFn& source, int t_steps,
                                 double horizon);

}  // namespace xva
