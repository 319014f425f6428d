#include "xva/iterate.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace xva {

namespace {

// sup of |q(t) - gamma(t)| over [a, b]; the difference of two piecewise
// linear curves is piecewise linear, so the sup sits at a knot or endpoint.
double max_abs_carry(const TimeCurve& q, const TimeCurve& gamma, double a, double b) {
  std::vector<double> probes{a, b};
  for (const auto& curve : {q, gamma}) {
    for (double t : curve.knot_times()) {
      if (t > a && t < b) probes.push_back(t);
    }
  }
  double best = 0.0;
  for (double t : probes) best = std::max(best, std::abs(q(t) - gamma(t)));
  return best;
}

std::vector<Field> negated(const std::vector<Field>& levels) {
  std::vector<Field> out = levels;
  for (auto& f : out)
    for (auto& v : f.values) v = -v;
  return out;
}

double sup_abs(const std::vector<Field>& levels) {
  double best = 0.0;
  for (const auto& f : levels)
    for (double v : f.values) best = std::max(best, std::abs(v));
  return best;
}

double weighted_gap(const std::vector<Field>& a, const std::vector<Field>& b, double omega) {
  std::vector<Field> diffs;
  diffs.reserve(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    Field d = a[k];
    for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] -= b[k].values[i];
    diffs.push_back(std::move(d));
  }
  return weighted_sup(diffs, omega);
}

}  // namespace

Supersolution build_supersolution(const ReactionSpec& spec, const CoefficientIntegrals& ci,
                                  const SpatialGrid& grid, const Payoff& payoff_unit,
                                  int t_steps, double horizon) {
  if (t_steps < 1) throw std::invalid_argument("build_supersolution: t_steps must be >= 1");
  if (!(horizon > 0.0)) throw std::invalid_argument("build_supersolution: horizon must be positive");

  const SampledPayoff sampled = sample_payoff(payoff_unit, grid);
  const double k_const = std::max(1.0, sampled.c_h);
  const double c0_prime = spec.c0 / k_const + spec.l_g;
  const double sig2 = ci.sigma().max_abs(0.0, horizon) * ci.sigma().max_abs(0.0, horizon);
  const double carry = max_abs_carry(ci.q(), ci.gamma(), 0.0, horizon);
  const double lambda = 0.5 * sig2 + (carry + 0.5 * sig2) + c0_prime;

  Supersolution sup;
  sup.params = SupersolutionParams{1.0, k_const, lambda};
  sup.value = [k_const, lambda](double x, double t) {
    return 2.0 * k_const * std::exp(lambda * t) * std::cosh(x);
  };

  const double dt = horizon / t_steps;
  sup.levels.reserve(static_cast<std::size_t>(t_steps) + 1);
  for (int k = 0; k <= t_steps; ++k) {
    const double t = k == t_steps ? horizon : dt * k;
    Field f{grid, std::vector<double>(static_cast<std::size_t>(grid.n)), t};
    for (int i = 0; i < grid.n; ++i) f.values[i] = sup.value(grid.node(i), t);
    sup.levels.push_back(std::move(f));
  }

  for (int i = 0; i < grid.n; ++i) {
    if (!(sup.levels.front().values[i] >= std::abs(sampled.field.values[i]))) {
      throw std::invalid_argument(
          "build_supersolution: envelope fails to dominate the payoff at node " +
          std::to_string(i));
    }
  }
  return sup;
}

LinearSolveOutput iterate_once(const std::vector<Field>& u_prev, const ReactionSpec& spec,
                               const CoefficientIntegrals& ci, const Continuation& cont,
                               const Field& v0, const IterationConfig& cfg, double horizon) {
  if (static_cast<int>(u_prev.size()) != cfg.t_steps + 1) {
    throw std::invalid_argument("iterate_once: previous iterate must cover every time level");
  }
  const int n = v0.grid.n;
  const double dt = horizon / cfg.t_steps;

  const bool trivial = !spec.custom && spec.g_neg == 0.0 && spec.g_pos == 0.0;
  SourceFn source;
  if (!trivial) {
    source = [&u_prev, &spec, dt, n](double tm) {
      const int last = static_cast<int>(u_prev.size()) - 2;
      const int k = std::clamp(static_cast<int>(std::lround(tm / dt - 0.5)), 0, last);
      std::vector<double> f(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        const double mid = 0.5 * (u_prev[k].values[i] + u_prev[k + 1].values[i]);
        f[static_cast<std::size_t>(i)] = eval_G(mid, spec);
      }
      return f;
    };
  }
  const Continuation source_cont =
      spec.custom ? clamp_continuation() : cont.scaled(spec.g_pos);

  LinearSolveOutput out;
  switch (cfg.backend) {
    case BackendKind::kernel:
      out.levels =
          duhamel_solve(ci, spec.r_g, cont, source_cont, v0, source, cfg.t_steps, horizon);
      break;
    case BackendKind::fd: {
      FdConfig fc;
      fc.theta = cfg.theta;
      out.levels = fd_solve(ci, spec.r_g, cont, v0, source, cfg.t_steps, horizon, fc);
      break;
    }
    case BackendKind::mc: {
      McSolveResult run =
          mc_solve(ci, spec.r_g, cont, source_cont, v0, source, cfg.t_steps, horizon, cfg.mc);
      out.levels = std::move(run.levels);
      out.max_pooled_se = sup_abs(run.pooled_se);
      out.pooled_se = std::move(run.pooled_se);
      break;
    }
  }
  return out;
}

IterationReport run_monotone(const ReactionSpec& spec, const CoefficientIntegrals& ci,
                             const SpatialGrid& grid, const Payoff& payoff, double horizon,
                             const IterationConfig& cfg) {
  if (!(cfg.tol > 0.0)) throw std::invalid_argument("run_monotone: tol must be positive");
  if (cfg.max_iter < 1) throw std::invalid_argument("run_monotone: max_iter must be >= 1");
  if (cfg.t_steps < 1) throw std::invalid_argument("run_monotone: t_steps must be >= 1");
  if (!(horizon > 0.0)) throw std::invalid_argument("run_monotone: horizon must be positive");

  const Payoff unit = payoff.normalized();
  const Field v0 = sample_payoff(unit, grid).field;
  const Continuation cont = make_continuation(unit, spec, ci);
  const Supersolution sup =
      build_supersolution(spec, ci, grid, unit, cfg.t_steps, horizon);
  const double omega = cfg.omega.value_or(spec.r_g + spec.l_g);
  const double base_slack = 1e-9 * sup_abs(sup.levels);

  IterationReport report;
  report.omega_used = omega;
  report.supersolution = sup.params;
  report.slack = base_slack;

  const bool run_dec = cfg.direction != IterationConfig::Direction::increasing;
  const bool run_inc = cfg.direction != IterationConfig::Direction::decreasing;

  struct ChainState {
    std::vector<Field> prev;
    ChainRecord rec;
    bool decreasing = true;
    bool done = false;
  };
  ChainState dec, inc;
  if (run_dec) dec.prev = sup.levels;
  if (run_inc) {
    inc.prev = negated(sup.levels);
    inc.decreasing = false;
  }

  auto sweep = [&](ChainState& ch) {
    LinearSolveOutput out = iterate_once(ch.prev, spec, ci, cont, v0, cfg, horizon);
    double slack = base_slack;
    if (cfg.backend == BackendKind::mc) slack += 6.0 * out.max_pooled_se;
    report.slack = std::max(report.slack, slack);

    int violations = 0;
    for (std::size_t k = 0; k < out.levels.size(); ++k) {
      for (std::size_t i = 0; i < out.levels[k].values.size(); ++i) {
        const double next = out.levels[k].values[i];
        const double prev = ch.prev[k].values[i];
        const double step = ch.decreasing ? next - prev : prev - next;
        if (step > slack) {
          throw std::runtime_error(
              "run_monotone: " + std::string(ch.decreasing ? "decreasing" : "increasing") +
              " chain crossed its previous sweep at level " + std::to_string(k) + ", node " +
              std::to_string(i) + " by " + std::to_string(step) +
              "; this signals a backend defect");
        }
        const double env = sup.levels[k].values[i];
        if (next > env + slack || next < -env - slack) ++violations;
      }
    }
    const double gap = weighted_gap(out.levels, ch.prev, omega);
    if (!ch.rec.gaps.empty() && ch.rec.gaps.back() > 0.0) {
      ch.rec.ratios.push_back(gap / ch.rec.gaps.back());
    }
    ch.rec.gaps.push_back(gap);
    ch.rec.sandwich_violations.push_back(violations);
    ch.prev = std::move(out.levels);
    ch.rec.iterations += 1;
    if (gap <= cfg.tol) {
      ch.rec.converged = true;
      ch.done = true;
    }
  };

  int cross_violations = 0;
  for (int m = 1; m <= cfg.max_iter; ++m) {
    if (run_dec && !dec.done) sweep(dec);
    if (run_inc && !inc.done) sweep(inc);
    if (run_dec && run_inc) {
      for (std::size_t k = 0; k < dec.prev.size(); ++k) {
        for (std::size_t i = 0; i < dec.prev[k].values.size(); ++i) {
          if (inc.prev[k].values[i] > dec.prev[k].values[i] + report.slack) ++cross_violations;
        }
      }
    }
    const bool dec_ok = !run_dec || dec.done;
    const bool inc_ok = !run_inc || inc.done;
    if (dec_ok && inc_ok) break;
  }

  if (run_dec) report.decreasing = std::move(dec.rec);
  if (run_inc) report.increasing = std::move(inc.rec);
  if (run_dec && run_inc && !report.increasing.sandwich_violations.empty()) {
    report.increasing.sandwich_violations.back() += cross_violations;
  }
  report.converged = (!run_dec || report.decreasing.converged) &&
                     (!run_inc || report.increasing.converged);
  for (const ChainRecord* rec : {&report.decreasing, &report.increasing}) {
    for (double r : rec->ratios) report.max_ratio = std::max(report.max_ratio, r);
  }

  if (run_dec && run_inc) {
    report.two_sided_gap = weighted_gap(dec.prev, inc.prev, omega);
    report.price_levels = dec.prev;
    for (std::size_t k = 0; k < report.price_levels.size(); ++k) {
      for (std::size_t i = 0; i < report.price_levels[k].values.size(); ++i) {
        report.price_levels[k].values[i] =
            0.5 * (dec.prev[k].values[i] + inc.prev[k].values[i]);
      }
    }
    report.decreasing.levels = std::move(dec.prev);
    report.increasing.levels = std::move(inc.prev);
  } else if (run_dec) {
    report.price_levels = dec.prev;
    report.decreasing.levels = std::move(dec.prev);
  } else {
    report.price_levels = inc.prev;
    report.increasing.levels = std::move(inc.prev);
  }
  return report;
}

PriceSurface back_transform(const std::vector<Field>& levels, const Payoff& payoff,
                            double horizon) {
  if (levels.empty()) throw std::invalid_argument("back_transform: no levels");
  const SpatialGrid& g = levels.front().grid;
  PriceSurface s;
  s.strike = payoff.strike;
  s.horizon = horizon;
  s.x.resize(static_cast<std::size_t>(g.n));
  s.spot.resize(static_cast<std::size_t>(g.n));
  for (int i = 0; i < g.n; ++i) {
    s.x[static_cast<std::size_t>(i)] = g.node(i);
    s.spot[static_cast<std::size_t>(i)] = payoff.strike * std::exp(g.node(i));
  }
  s.tau.reserve(levels.size());
  s.values.reserve(levels.size());
  for (const auto& f : levels) {
    s.tau.push_back(f.time);
    std::vector<double> row(f.values);
    for (double& v : row) v *= payoff.strike;
    s.values.push_back(std::move(row));
  }
  return s;
}

double surface_price(const PriceSurface& surface, double spot, double t) {
  if (!(spot > 0.0)) throw std::invalid_argument("surface_price: spot must be positive");
  const double x = std::log(spot / surface.strike);
  const double tau = surface.horizon - t;
  if (x < surface.x.front() - 1e-12 || x > surface.x.back() + 1e-12) {
    throw std::invalid_argument("surface_price: spot outside the grid span");
  }
  if (tau < surface.tau.front() - 1e-12 || tau > surface.tau.back() + 1e-12) {
    throw std::invalid_argument("surface_price: time outside the solved span");
  }

  const auto locate = [](const std::vector<double>& axis, double v, double& frac) {
    const auto it = std::upper_bound(axis.begin(), axis.end(), v);
    std::size_t i = it == axis.begin() ? 0 : static_cast<std::size_t>(it - axis.begin()) - 1;
    if (i + 1 >= axis.size()) i = axis.size() - 2;
    const double width = axis[i + 1] - axis[i];
    frac = width > 0.0 ? std::clamp((v - axis[i]) / width, 0.0, 1.0) : 0.0;
    return i;
  };
  double fx = 0.0, ft = 0.0;
  const std::size_t i = locate(surface.x, x, fx);
  const std::size_t k = locate(surface.tau, tau, ft);
  const double lo = (1.0 - fx) * surface.values[k][i] + fx * surface.values[k][i + 1];
  const double hi = (1.0 - fx) * surface.values[k + 1][i] + fx * surface.values[k + 1][i + 1];
  return (1.0 - ft) * lo + ft * hi;
}

}  // namespace xva
