#include "xva/fd.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace xva {

std::vector<double> tri_matvec(const Tridiagonal& op, const std::vector<double>& v) {
  const int n = static_cast<int>(v.size());
  if (static_cast<int>(op.diag.size()) != n || static_cast<int>(op.sub.size()) != n ||
      static_cast<int>(op.super.size()) != n) {
    throw std::invalid_argument("tri_matvec: band sizes do not match the vector");
  }
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) {
    double acc = op.diag[i] * v[i];
    if (i > 0) acc += op.sub[i] * v[i - 1];
    if (i + 1 < n) acc += op.super[i] * v[i + 1];
    y[i] = acc;
  }
  return y;
}

std::vector<double> thomas_solve(const Tridiagonal& op, std::vector<double> rhs) {
  const int n = static_cast<int>(rhs.size());
  if (n == 0) throw std::invalid_argument("thomas_solve: empty system");
  if (static_cast<int>(op.diag.size()) != n || static_cast<int>(op.sub.size()) != n ||
      static_cast<int>(op.super.size()) != n) {
    throw std::invalid_argument("thomas_solve: band sizes do not match rhs");
  }
  std::vector<double> c_star(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const double sub = i > 0 ? op.sub[i] : 0.0;
    const double den = op.diag[i] - sub * (i > 0 ? c_star[i - 1] : 0.0);
    const double scale = std::abs(op.diag[i]) + std::abs(sub) + std::abs(op.super[i]);
    if (!(std::abs(den) > 1e-14 * (scale + 1.0))) {
      throw std::runtime_error("thomas_solve: pivot vanished at row " + std::to_string(i) +
                               "; the step operator lost diagonal dominance");
    }
    if (i + 1 < n) c_star[i] = op.super[i] / den;
    rhs[i] = (rhs[i] - sub * (i > 0 ? rhs[i - 1] : 0.0)) / den;
  }
  for (int i = n - 2; i >= 0; --i) rhs[i] -= c_star[i] * rhs[i + 1];
  return rhs;
}

StepOperators assemble_step(const CoefficientIntegrals& ci, double r_g, const SpatialGrid& g,
                            double t_mid, double dt, double theta) {
  if (!(dt > 0.0)) throw std::invalid_argument("assemble_step: dt must be positive");
  if (!(theta >= 0.0 && theta <= 1.0)) {
    throw std::invalid_argument("assemble_step: theta must lie in [0, 1]");
  }
  const double sig = ci.sigma()(t_mid);
  if (!(sig > 0.0)) throw std::invalid_argument("assemble_step: sigma(t_mid) must be positive");

  StepOperators ops;
  ops.diffusion = 0.5 * sig * sig;
  ops.advection = ci.q()(t_mid) - ci.gamma()(t_mid) - ops.diffusion;

  const int n = g.n;
  const double h = g.h;
  const double lo = ops.diffusion / (h * h) - ops.advection / (2.0 * h);
  const double mid = -2.0 * ops.diffusion / (h * h) - r_g;
  const double hi = ops.diffusion / (h * h) + ops.advection / (2.0 * h);

  auto& im = ops.implicit_op;
  im.sub.assign(n, 0.0);
  im.diag.assign(n, 1.0);
  im.super.assign(n, 0.0);
  ops.explicit_op = im;
  auto& ex = ops.explicit_op;
  for (int i = 1; i + 1 < n; ++i) {
    im.sub[i] = -theta * dt * lo;
    im.diag[i] = 1.0 - theta * dt * mid;
    im.super[i] = -theta * dt * hi;
    ex.sub[i] = (1.0 - theta) * dt * lo;
    ex.diag[i] = 1.0 + (1.0 - theta) * dt * mid;
    ex.super[i] = (1.0 - theta) * dt * hi;
  }
  return ops;
}

namespace {

void pin_dirichlet(Tridiagonal& op, std::vector<double>& rhs, int i, double value) {
  op.sub[i] = 0.0;
  op.diag[i] = 1.0;
  op.super[i] = 0.0;
  rhs[i] = value;
}

// Clamped tails have no asymptote to pin to; a zero-gradient row is the
// discrete form of the same constant extrapolation the other backends use.
void pin_zero_gradient(Tridiagonal& op, std::vector<double>& rhs, int i, int neighbor) {
  op.diag[i] = 1.0;
  op.sub[i] = neighbor < i ? -1.0 : 0.0;
  op.super[i] = neighbor > i ? -1.0 : 0.0;
  rhs[i] = 0.0;
}

void pin_boundary(Tridiagonal& op, std::vector<double>& rhs, int i, int neighbor,
                  const std::function<double(double)>& override_value,
                  const Continuation::Side& side, double x, double t) {
  if (override_value) {
    pin_dirichlet(op, rhs, i, override_value(t));
    return;
  }
  switch (side.tail) {
    case Continuation::Tail::zero:
      pin_dirichlet(op, rhs, i, 0.0);
      break;
    case Continuation::Tail::forward_asymptote:
      pin_dirichlet(op, rhs, i, side.a(t) + side.b(t) * std::exp(x));
      break;
    case Continuation::Tail::clamp:
      pin_zero_gradient(op, rhs, i, neighbor);
      break;
  }
}

}  // namespace

std::vector<Field> fd_solve(const CoefficientIntegrals& ci, double r_g,
                            const Continuation& cont, const Field& v0, const SourceFn& source,
                            int t_steps, double horizon, const FdConfig& cfg) {
  if (t_steps < 1) throw std::invalid_argument("fd_solve: t_steps must be >= 1");
  if (!(horizon > 0.0)) throw std::invalid_argument("fd_solve: horizon must be positive");
  const SpatialGrid& g = v0.grid;
  const int n = g.n;
  if (n < 3) throw std::invalid_argument("fd_solve: need at least 3 nodes");
  if (static_cast<int>(v0.values.size()) != n) {
    throw std::invalid_argument("fd_solve: field size does not match its grid");
  }

  const double dt = horizon / t_steps;
  std::vector<Field> levels;
  levels.reserve(static_cast<std::size_t>(t_steps) + 1);
  Field cur = v0;
  cur.time = 0.0;
  levels.push_back(cur);

  for (int k = 0; k < t_steps; ++k) {
    const double t0 = dt * k;
    const double t1 = k + 1 == t_steps ? horizon : dt * (k + 1);
    const double tm = t0 + 0.5 * dt;
    StepOperators ops = assemble_step(ci, r_g, g, tm, dt, cfg.theta);

    std::vector<double> rhs = tri_matvec(ops.explicit_op, cur.values);
    if (source) {
      const std::vector<double> f = source(tm);
      if (static_cast<int>(f.size()) != n) {
        throw std::invalid_argument("fd_solve: source field size does not match the grid");
      }
      for (int i = 1; i + 1 < n; ++i) rhs[i] += dt * f[i];
    }
    pin_boundary(ops.implicit_op, rhs, 0, 1, cfg.left_value, cont.left, g.x_min, t1);
    pin_boundary(ops.implicit_op, rhs, n - 1, n - 2, cfg.right_value, cont.right, g.x_max, t1);

    cur.values = thomas_solve(ops.implicit_op, std::move(rhs));
    cur.time = t1;
    levels.push_back(cur);
  }
  return levels;
}

}  // namespace xva
