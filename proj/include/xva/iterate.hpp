#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "xva/continuation.hpp"
#include "xva/evolution.hpp"
#include "xva/fd.hpp"
#include "xva/grid.hpp"
#include "xva/mc.hpp"
#include "xva/model.hpp"

namespace xva {

/// Growth envelope 2 K e^{lambda t} cosh(x) dominating every iterate from
/// above (and, mirrored, from below).
struct SupersolutionParams {
  double kappa = 1.0;    // growth exponent of the cosh envelope
  double k_const = 1.0;  // K = max(1, empirical payoff growth constant)
  double lambda_rate = 0.0;
};

struct Supersolution {
  SupersolutionParams params;
  std::function<double(double, double)> value;  // (x, t)
  std::vector<Field> levels;                    // sampled at the marching levels
};

/// The envelope rate collects the diffusion, the worst carry, and the
/// reaction constants, so that one backend step applied to the envelope
/// stays below the envelope. Validates the t = 0 dominance over the payoff.
Supersolution build_supersolution(const ReactionSpec& spec, const CoefficientIntegrals& ci,
                                  const SpatialGrid& grid, const Payoff& payoff_unit,
                                  int t_steps, double horizon);

enum class BackendKind { kernel, fd, mc };

struct IterationConfig {
  double tol = 1e-6;
  int max_iter = 40;
  enum class Direction { decreasing, increasing, both };
  Direction direction = Direction::both;
  BackendKind backend = BackendKind::kernel;
  std::optional<double> omega;  // weighting rate; default r_g + l_g
  int t_steps = 200;
  double theta = 0.5;  // fd backend
  McConfig mc;         // mc backend
};

struct LinearSolveOutput {
  std::vector<Field> levels;
  double max_pooled_se = 0.0;    // zero for the deterministic backends
  std::vector<Field> pooled_se;  // per node, mc backend only
};

/// One monotone sweep: solves the linear problem whose inhomogeneity is the
/// reaction evaluated on the previous iterate (read at step midpoints by
/// linear interpolation between levels). The source field is continued past
/// the grid by the state rule scaled with the deep-in-the-money reaction
/// slope; custom reactions fall back to edge clamping.
LinearSolveOutput iterate_once(const std::vector<Field>& u_prev, const ReactionSpec& spec,
                               const CoefficientIntegrals& ci, const Continuation& cont,
                               const Field& v0, const IterationConfig& cfg, double horizon);

struct ChainRecord {
  std::vector<double> gaps;    // weighted sup norm of successive differences
  std::vector<double> ratios;  // gaps[m] / gaps[m-1]
  std::vector<int> sandwich_violations;
  bool converged = false;
  int iterations = 0;
  std::vector<Field> levels;  // final iterate, dense in time
};

struct IterationReport {
  ChainRecord decreasing, increasing;
  bool converged = false;
  double two_sided_gap = 0.0;  // populated when both chains ran
  double max_ratio = 0.0;      // largest gap ratio across chains
  double omega_used = 0.0;
  double slack = 0.0;  // monotonicity tolerance actually applied
  SupersolutionParams supersolution;
  std::vector<Field> price_levels;  // reported solution, dense in time
};

/// Monotone iteration driver. The decreasing chain starts at the envelope,
/// the increasing chain at its negative; each sweep must not cross the
/// previous one (beyond slack: quadrature noise, plus sampling noise for the
/// mc backend) or the run aborts. Sandwich violations against the envelope
/// are counted per sweep. Non-convergence at max_iter is reported, not
/// thrown. With both directions the price is the nodewise chain average and
/// lies between the chains.
IterationReport run_monotone(const ReactionSpec& spec, const CoefficientIntegrals& ci,
                             const SpatialGrid& grid, const Payoff& payoff, double horizon,
                             const IterationConfig& cfg);

/// Solution surface mapped back to market coordinates: spot = strike e^x,
/// calendar time t = horizon - tau, values rescaled from strike units.
struct PriceSurface {
  double strike = 1.0;
  double horizon = 0.0;
  std::vector<double> x;
  std::vector<double> spot;
  std::vector<double> tau;
  std::vector<std::vector<double>> values;  // [level][node], price units
};

PriceSurface back_transform(const std::vector<Field>& levels, const Payoff& payoff,
                            double horizon);

/// Bilinear probe of the surface at (spot, calendar time). Throws outside
/// the grid or the time span.
double surface_price(const PriceSurface& surface, double spot, double t);

}  // namespace xva
