#pragma once

#include <cstdint>
#include <vector>

#include "xva/continuation.hpp"
#include "xva/evolution.hpp"
#include "xva/grid.hpp"

namespace xva {

struct McConfig {
  std::int64_t samples = 10000;  // draws per node per operator application
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = one worker per hardware thread
};

/// splitmix64 output function; the building block of stream derivation.
std::uint64_t mix64(std::uint64_t z);

/// Root state of the draw stream for one (step, node, term) estimate:
/// each index is folded in with mix64, so the stream depends only on the
/// indices and never on evaluation order or thread schedule. term 0 is the
/// state propagation, term 1 the source correction.
std::uint64_t derive_stream(std::uint64_t root, std::uint64_t step, std::uint64_t node,
                            std::uint64_t term);

/// Standard normal quantile, Acklam's rational approximation
/// (relative error below 1.2e-9 on (0, 1)). Throws outside (0, 1).
double inverse_normal_cdf(double u);

struct McEstimate {
  Field mean;
  Field se;  // per-node standard error of the mean
};

/// Sampling form of the one-step evolution operator: at each node the
/// Gaussian image point is drawn directly (mean shifted by the accumulated
/// drift) and the field is read by linear interpolation with the
/// continuation rule past the edges. The sampled variance is narrowed by
/// the interpolation kernel's own variance so the estimator's effective
/// kernel carries exactly twice the accumulated half variance.
/// Deterministic given (inputs, seed, step, term) at any thread count.
McEstimate mc_propagate(const CoefficientIntegrals& ci, double r_g, const Continuation& cont,
                        const Field& v_s, double s, double t, const McConfig& cfg,
                        std::uint64_t step = 0, std::uint64_t term = 0);

struct McSolveResult {
  std::vector<Field> levels;
  /// Sampling uncertainty accumulated up to each level: per-step standard
  /// errors pooled in quadrature, the carried-in part damped by the step
  /// discount, the source part weighted by the step width.
  std::vector<Field> pooled_se;
};

/// Sampling counterpart of the kernel marcher: identical level layout and
/// midpoint source convention, every operator application estimated by
/// mc_propagate on fresh per-step streams.
McSolveResult mc_solve(const CoefficientIntegrals& ci, double r_g, const Continuation& cont,
                       const Continuation& source_cont, const Field& v0, const SourceFn& source,
                       int t_steps, double horizon, const McConfig& cfg);

}  // namespace xva
