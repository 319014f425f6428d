#include "xva/mc.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <thread>
#include <utility>

namespace xva {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

struct SplitMix {
  std::uint64_t state;
  std::uint64_t next() {
    state += kGolden;
    return finalize(state);
  }
};

// Uniform in the open interval (0, 1): top 53 bits, centered.
double to_unit(std::uint64_t x) { return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53; }

double field_read(const Field& v, const Continuation& cont, double y, double inv_h) {
  const SpatialGrid& g = v.grid;
  if (y < g.x_min) return cont.value_left(y, v.time, v.values.front());
  if (y > g.x_max) return cont.value_right(y, v.time, v.values.back());
  const double u = (y - g.x_min) * inv_h;
  int i = static_cast<int>(u);
  if (i >= g.n - 1) return v.values.back();
  const double w = u - i;
  return v.values[i] + w * (v.values[i + 1] - v.values[i]);
}

}  // namespace

std::uint64_t mix64(std::uint64_t z) { return finalize(z + kGolden); }

std::uint64_t derive_stream(std::uint64_t root, std::uint64_t step, std::uint64_t node,
                            std::uint64_t term) {
  std::uint64_t s = mix64(root);
  s = mix64(s ^ step);
  s = mix64(s ^ node);
  return mix64(s ^ term);
}

double inverse_normal_cdf(double u) {
  if (!(u > 0.0 && u < 1.0)) {
    throw std::invalid_argument("inverse_normal_cdf: argument must lie strictly in (0, 1)");
  }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double plow = 0.02425;
  if (u < plow) {
    const double q = std::sqrt(-2.0 * std::log(u));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (u > 1.0 - plow) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - u));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = u - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

McEstimate mc_propagate(const CoefficientIntegrals& ci, double r_g, const Continuation& cont,
                        const Field& v_s, double s, double t, const McConfig& cfg,
                        std::uint64_t step, std::uint64_t term) {
  if (!(s < t)) throw std::invalid_argument("mc_propagate: need s < t");
  if (cfg.samples < 1) throw std::invalid_argument("mc_propagate: samples must be >= 1");
  if (cfg.threads < 0) throw std::invalid_argument("mc_propagate: threads must be >= 0");
  const SpatialGrid& g = v_s.grid;
  const int n = g.n;
  if (static_cast<int>(v_s.values.size()) != n) {
    throw std::invalid_argument("mc_propagate: field size does not match its grid");
  }

  const double shift = ci.drift_integral(s, t);
  // Linear interpolation smears each draw by a triangular kernel of
  // variance h^2/6, so the Gaussian is drawn that much narrower and the
  // read restores the exact step variance 2 S(s,t). Without this the march
  // accumulates O(h^2/dt) artificial diffusion. Floored at half the true
  // variance so degenerate short steps stay well posed.
  const double var = 2.0 * ci.half_variance(s, t);
  const double h2 = v_s.grid.h * v_s.grid.h;
  const double sd = std::sqrt(std::max(var - h2 / 6.0, 0.5 * var));
  const double disc = std::exp(-r_g * (t - s));
  const double inv_h = 1.0 / g.h;
  const std::int64_t N = cfg.samples;

  McEstimate out{Field{g, std::vector<double>(static_cast<std::size_t>(n)), t},
                 Field{g, std::vector<double>(static_cast<std::size_t>(n)), t}};

  auto worker = [&](int i0, int i1) {
    for (int i = i0; i < i1; ++i) {
      SplitMix gen{derive_stream(cfg.seed, step, static_cast<std::uint64_t>(i), term)};
      const double x = g.node(i);
      // Accumulate deviations from the node's own value: constants then sum
      // to exact zero, and the variance never loses digits to cancellation.
      const double center = v_s.values[static_cast<std::size_t>(i)];
      double acc = 0.0, acc2 = 0.0;
      for (std::int64_t j = 0; j < N; ++j) {
        const double z = inverse_normal_cdf(to_unit(gen.next()));
        const double w = field_read(v_s, cont, x + shift + sd * z, inv_h) - center;
        acc += w;
        acc2 += w * w;
      }
      const double mean = acc / static_cast<double>(N);
      out.mean.values[static_cast<std::size_t>(i)] = disc * (center + mean);
      double var = 0.0;
      if (N > 1) {
        var = std::max(0.0, acc2 - static_cast<double>(N) * mean * mean) /
              static_cast<double>(N - 1);
      }
      out.se.values[static_cast<std::size_t>(i)] =
          disc * std::sqrt(var / static_cast<double>(N));
    }
  };

  int workers = cfg.threads > 0 ? cfg.threads
                                : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    worker(0, n);
    return out;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    const int i0 = static_cast<int>(static_cast<std::int64_t>(n) * w / workers);
    const int i1 = static_cast<int>(static_cast<std::int64_t>(n) * (w + 1) / workers);
    pool.emplace_back(worker, i0, i1);
  }
  for (auto& th : pool) th.join();
  return out;
}

McSolveResult mc_solve(const CoefficientIntegrals& ci, double r_g, const Continuation& cont,
                       const Continuation& source_cont, const Field& v0, const SourceFn& source,
                       int t_steps, double horizon, const McConfig& cfg) {
  if (t_steps < 1) throw std::invalid_argument("mc_solve: t_steps must be >= 1");
  if (!(horizon > 0.0)) throw std::invalid_argument("mc_solve: horizon must be positive");
  const SpatialGrid& g = v0.grid;
  const int n = g.n;
  if (static_cast<int>(v0.values.size()) != n) {
    throw std::invalid_argument("mc_solve: field size does not match its grid");
  }

  const double dt = horizon / t_steps;
  McSolveResult res;
  res.levels.reserve(static_cast<std::size_t>(t_steps) + 1);
  res.pooled_se.reserve(static_cast<std::size_t>(t_steps) + 1);
  res.levels.push_back(v0);
  res.levels.back().time = 0.0;
  res.pooled_se.push_back(Field{g, std::vector<double>(static_cast<std::size_t>(n), 0.0), 0.0});

  // Same anchoring as the kernel march: when a single step's variance falls
  // below the h^2/6 interpolation smear the per-step correction bottoms out,
  // so the state is sampled across the span back to the newest anchor level
  // wide enough to read without bias, and the source pushes since that
  // anchor are sampled individually. Each (level, push) pair gets its own
  // stream so the pooled variances add. At ordinary resolutions every level
  // is an anchor and this is the plain per-step march, stream for stream.
  const double wide = 0.64 * g.h * g.h;
  struct Push {
    int step;
    Field field;
  };
  std::vector<int> anchors{0};
  std::vector<Push> pending;

  for (int k = 0; k < t_steps; ++k) {
    const double t1 = k + 1 == t_steps ? horizon : dt * (k + 1);
    const double tm = dt * k + 0.5 * dt;

    if (source) {
      std::vector<double> f = source(tm);
      if (static_cast<int>(f.size()) != n) {
        throw std::invalid_argument("mc_solve: source field size does not match the grid");
      }
      const bool live = std::any_of(f.begin(), f.end(), [](double v) { return v != 0.0; });
      if (live) pending.push_back({k, Field{g, std::move(f), tm}});
    }

    int a = anchors.front();
    for (int c : anchors) {
      if (2.0 * ci.half_variance(res.levels[static_cast<std::size_t>(c)].time, t1) >= wide)
        a = c;
    }
    const Field& base = res.levels[static_cast<std::size_t>(a)];
    const double disc = std::exp(-r_g * (t1 - base.time));

    McEstimate st = mc_propagate(ci, r_g, cont, base, base.time, t1, cfg,
                                 static_cast<std::uint64_t>(k), 0);
    Field next = std::move(st.mean);
    std::vector<double> var(static_cast<std::size_t>(n));
    const auto& carried = res.pooled_se[static_cast<std::size_t>(a)].values;
    for (int i = 0; i < n; ++i) {
      const double prev = disc * carried[static_cast<std::size_t>(i)];
      const double se = st.se.values[static_cast<std::size_t>(i)];
      var[static_cast<std::size_t>(i)] = prev * prev + se * se;
    }

    for (const Push& p : pending) {
      if (p.step < a) continue;  // already inside the anchor state
      McEstimate sc =
          mc_propagate(ci, r_g, source_cont, p.field, p.field.time, t1, cfg,
                       static_cast<std::uint64_t>(k),
                       1 + static_cast<std::uint64_t>(k - p.step));
      for (int i = 0; i < n; ++i) {
        next.values[static_cast<std::size_t>(i)] +=
            dt * sc.mean.values[static_cast<std::size_t>(i)];
        const double se = dt * sc.se.values[static_cast<std::size_t>(i)];
        var[static_cast<std::size_t>(i)] += se * se;
      }
    }

    next.time = t1;
    Field pooled{g, std::vector<double>(static_cast<std::size_t>(n)), t1};
    for (int i = 0; i < n; ++i) {
      pooled.values[static_cast<std::size_t>(i)] = std::sqrt(var[static_cast<std::size_t>(i)]);
    }
    res.levels.push_back(std::move(next));
    res.pooled_se.push_back(std::move(pooled));

    const double from_back =
        2.0 * ci.half_variance(
                  res.levels[static_cast<std::size_t>(anchors.back())].time, t1);
    if (from_back >= wide) {
      anchors.push_back(k + 1);
      if (anchors.size() > 2) anchors.erase(anchors.begin());
      std::erase_if(pending, [&](const Push& p) { return p.step < anchors.front(); });
    }
  }
  return res;
}

}  // namespace xva
