// End-to-end acceptance checks for the pricing engine. Each check prints one
// PASS/FAIL line with the measured numbers; the exit code is the number of
// failures. Reference problem throughout: call, strike 100, T = 1, sigma 0.2,
// q 0.02, gamma 0, r 0.02, lambda_B 0.03, lambda_C 0.05, recoveries 0.4,
// funding spread 0.01, grid [-6, 6] with 801 nodes, 200 time steps.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "oracles.hpp"
#include "xva/cli.hpp"

using namespace xva;
namespace fs = std::filesystem;

namespace {

std::string fmt(const char* f, ...) {
  va_list ap;
  va_start(ap, f);
  char buf[512];
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

RunConfig default_problem() {
  RunConfig cfg;
  cfg.risk.r = 0.02;
  cfg.risk.lambda_b = 0.03;
  cfg.risk.lambda_c = 0.05;
  cfg.risk.recovery_b = 0.4;
  cfg.risk.recovery_c = 0.4;
  cfg.risk.s_f = 0.01;
  cfg.sigma = TimeCurve(0.2);
  cfg.q = TimeCurve(0.02);
  cfg.gamma = TimeCurve(0.0);
  cfg.payoff.kind = Payoff::Kind::call;
  cfg.payoff.strike = 100.0;
  return cfg;  // grid, horizon, steps, tolerance: library defaults
}

RunConfig credit_free() {
  RunConfig cfg = default_problem();
  cfg.risk.lambda_b = 0.0;
  cfg.risk.lambda_c = 0.0;
  cfg.risk.s_f = 0.0;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

double envelope_at(const SupersolutionParams& sp, double x, double t) {
  return 2.0 * sp.k_const * std::exp(sp.lambda_rate * t) * std::cosh(sp.kappa * x);
}

const double kBs = oracles::bs_price(true, 100.0, 100.0, 0.2, 1.0, 0.02, 0.02);

// --- the checks ------------------------------------------------------------

bool check_linear_degeneracy(std::string& note) {
  RunConfig cfg = credit_free();
  cfg.solver.backend = BackendKind::kernel;
  const double pk = run_price(cfg).headline;
  cfg.solver.backend = BackendKind::fd;
  const double pf = run_price(cfg).headline;
  note = fmt("kernel %.4f, fd %.4f vs closed form %.4f", pk, pf, kBs);
  return std::abs(pk - kBs) / kBs < 1e-3 && std::abs(pf - kBs) / kBs < 1e-3;
}

bool check_one_signed_reduction(const PriceArtifacts& art, std::string& note) {
  // Nonnegative call solution: the reaction reduces to a constant rate shift,
  // so the price is the discounted credit-free value.
  const double ref = std::exp(-((1.0 - 0.4) * 0.05 + 0.01) * 1.0) * kBs;
  note = fmt("price %.4f vs discounted closed form %.4f", art.headline, ref);
  return std::abs(art.headline - ref) / ref < 2e-3;
}

bool check_monotone_chains(const PriceArtifacts& art, std::string& note) {
  const IterationReport& rep = art.report;
  int violations = 0;
  for (int v : rep.decreasing.sandwich_violations) violations += v;
  for (int v : rep.increasing.sandwich_violations) violations += v;

  // The driver re-checks one-way movement nodewise every sweep and aborts on
  // a crossing, so a completed run certifies the chains; the envelope bound
  // on the final iterates is re-verified here from the reported parameters.
  int outside = 0;
  const auto& sp = rep.supersolution;
  for (std::size_t k = 0; k < rep.decreasing.levels.size(); ++k) {
    const Field& u = rep.decreasing.levels[k];
    const Field& w = rep.increasing.levels[k];
    for (int i = 0; i < u.grid.n; ++i) {
      const double env = envelope_at(sp, u.grid.node(i), u.time);
      const double ui = u.values[static_cast<std::size_t>(i)];
      const double wi = w.values[static_cast<std::size_t>(i)];
      if (ui > env + rep.slack || wi < -env - rep.slack || wi > ui + rep.slack) ++outside;
    }
  }
  note = fmt("sandwich violations %d, final levels outside envelope %d, slack %.2e",
             violations, outside, rep.slack);
  return violations == 0 && outside == 0;
}

bool check_two_sided_certificate(const PriceArtifacts& art, std::string& note) {
  const IterationReport& rep = art.report;
  int outside = 0;
  for (std::size_t k = 0; k < rep.price_levels.size(); ++k) {
    const Field& p = rep.price_levels[k];
    const Field& u = rep.decreasing.levels[k];
    const Field& w = rep.increasing.levels[k];
    for (std::size_t i = 0; i < p.values.size(); ++i)
      if (p.values[i] > u.values[i] || p.values[i] < w.values[i]) ++outside;
  }
  note = fmt("two-sided gap %.2e (tol 1e-5), price outside the bracket at %d nodes",
             rep.two_sided_gap, outside);
  return rep.converged && rep.two_sided_gap <= 1e-5 && outside == 0;
}

bool check_contraction(const PriceArtifacts& art, const fs::path& dir, std::string& note) {
  double worst = 0.0;
  for (double r : art.report.decreasing.ratios) worst = std::max(worst, r);
  for (double r : art.report.increasing.ratios) worst = std::max(worst, r);

  const auto doc = nlohmann::json::parse(slurp(dir / "summary.json"));
  const bool reported = doc.contains("max_ratio") &&
                        doc["max_ratio"].get<double>() == art.report.max_ratio;
  note = fmt("largest gap ratio %.4f, reported in summary.json: %s", worst,
             reported ? "yes" : "no");
  return worst < 1.0 && reported;
}

bool check_kernel_identities(std::string& note) {
  const SpatialGrid g = make_grid(-6.0, 6.0, 801, 4.0);
  const CoefficientIntegrals ci(TimeCurve(0.2), TimeCurve(0.02), TimeCurve(0.0));
  const ReactionSpec spec = build_reaction(default_problem().risk);
  const Continuation flat = clamp_continuation();

  // Discounted mass: a constant field one step forward.
  const double dt = 1.0 / 200.0;
  Field ones{g, std::vector<double>(static_cast<std::size_t>(g.n), 1.0), 0.0};
  const Field stepped = propagate(ci, spec.r_g, flat, ones, 0.0, dt);
  const double want = std::exp(-spec.r_g * dt);
  const double margin = 6.0 * std::sqrt(2.0 * ci.half_variance(0.0, dt));
  double mass_err = 0.0;
  for (int i = 0; i < g.n; ++i) {
    const double x = g.node(i);
    if (x - g.x_min < margin || g.x_max - x < margin) continue;
    mass_err = std::max(mass_err, std::abs(stepped.values[static_cast<std::size_t>(i)] - want));
  }

  // Composition over three random spans on a smooth field.
  Field bump{g, std::vector<double>(static_cast<std::size_t>(g.n)), 0.0};
  for (int i = 0; i < g.n; ++i)
    bump.values[static_cast<std::size_t>(i)] = std::exp(-0.5 * g.node(i) * g.node(i));
  std::mt19937 rng(12345);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double comp_err = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    double a = unit(rng), b = unit(rng), c = unit(rng);
    if (a > b) std::swap(a, b);
    if (b > c) std::swap(b, c);
    if (a > b) std::swap(a, b);
    const Field two = propagate(ci, spec.r_g, flat, propagate(ci, spec.r_g, flat, bump, a, b),
                                b, c);
    const Field one = propagate(ci, spec.r_g, flat, bump, a, c);
    for (std::size_t i = 0; i < two.values.size(); ++i)
      comp_err = std::max(comp_err, std::abs(two.values[i] - one.values[i]));
  }
  note = fmt("mass error %.1e (tol 1e-8), composition error %.1e (tol 1e-6)", mass_err,
             comp_err);
  return mass_err <= 1e-8 && comp_err <= 1e-6;
}

bool check_backend_agreement(const PriceArtifacts& kernel_art, std::string& note) {
  RunConfig cfg = default_problem();
  cfg.solver.backend = BackendKind::fd;
  const PriceArtifacts fd_art = run_price(cfg);
  const auto& kv = kernel_art.surface.values.back();  // t = 0 level, price units
  const auto& fv = fd_art.surface.values.back();
  double gap = 0.0;
  for (std::size_t i = 1; i + 1 < kv.size(); ++i)
    gap = std::max(gap, std::abs(kv[i] - fv[i]) / std::max(1.0, std::abs(kv[i])));

  // The sampling backend at this depth is priced on the shared credit-free
  // run: 2e5 draws per node and level keep it inside the minute budget.
  RunConfig mc_cfg = credit_free();
  mc_cfg.n = 401;
  mc_cfg.solver.t_steps = 50;
  mc_cfg.solver.mc.samples = 200000;
  mc_cfg.solver.mc.seed = 42;
  mc_cfg.solver.mc.threads = 1;
  const CompareArtifacts cmp = run_compare(mc_cfg);
  note = fmt("kernel vs fd max interior gap %.2e (tol 1e-3); mc z at the money %+.2f "
             "(pooled se %.4f)",
             gap, cmp.atm_z, cmp.atm_pooled_se);
  return gap <= 1e-3 && std::abs(cmp.atm_z) <= 3.0 && cmp.atm_pooled_se > 0.0;
}

bool check_order(std::string& note) {
  RunConfig coarse = credit_free();
  coarse.n = 201;
  coarse.solver.t_steps = 50;
  coarse.solver.backend = BackendKind::fd;
  RunConfig fine = coarse;
  fine.n = 401;
  fine.solver.t_steps = 100;
  const double e1 = std::abs(run_price(coarse).headline - kBs);
  const double e2 = std::abs(run_price(fine).headline - kBs);
  const double ratio = e1 / e2;

  const SpatialGrid g = make_grid(-6.0, 6.0, 401, 4.0);
  const CoefficientIntegrals ci(TimeCurve(0.2), TimeCurve(0.02), TimeCurve(0.0));
  Payoff call;
  call.kind = Payoff::Kind::call;
  call.strike = 100.0;
  const Field v0 = sample_payoff(call.normalized(), g).field;
  const Continuation cont =
      make_continuation(call.normalized(), build_reaction(credit_free().risk), ci);
  McConfig small, big;
  small.samples = 5000;
  big.samples = 20000;
  small.seed = big.seed = 2024;
  small.threads = big.threads = 1;
  const int atm = (g.n - 1) / 2;
  const double se1 =
      mc_propagate(ci, 0.02, cont, v0, 0.0, 0.02, small, 0, 0).se.values[atm];
  const double se2 = mc_propagate(ci, 0.02, cont, v0, 0.0, 0.02, big, 0, 0).se.values[atm];
  const double se_ratio = se1 / se2;
  note = fmt("fd error ratio %.2f (want 3..5); mc se ratio %.2f at 4x draws (want 1.6..2.4)",
             ratio, se_ratio);
  return ratio >= 3.0 && ratio <= 5.0 && se_ratio >= 1.6 && se_ratio <= 2.4;
}

bool check_duhamel_ode(std::string& note) {
  const SpatialGrid g = make_grid(-6.0, 6.0, 801, 4.0);
  const CoefficientIntegrals ci(TimeCurve(0.2), TimeCurve(0.02), TimeCurve(0.0));
  const Continuation flat = clamp_continuation();
  Field zero{g, std::vector<double>(static_cast<std::size_t>(g.n), 0.0), 0.0};
  const SourceFn one = [&g](double) {
    return std::vector<double>(static_cast<std::size_t>(g.n), 1.0);
  };
  const auto levels = duhamel_solve(ci, 0.06, flat, flat, zero, one, 200, 1.0);
  const double ref = (1.0 - std::exp(-0.06)) / 0.06;
  double err = 0.0;
  for (int i = 1; i + 1 < g.n; ++i)
    err = std::max(err, std::abs(levels.back().values[static_cast<std::size_t>(i)] - ref));
  note = fmt("max interior error %.1e vs (1-e^{-0.06})/0.06 (tol 1e-5)", err);
  return err <= 1e-5;
}

bool check_determinism(std::string& note) {
  const fs::path root = fs::temp_directory_path() / "xva_acceptance";
  fs::remove_all(root);

  RunConfig cfg = default_problem();
  cfg.n = 201;
  cfg.solver.t_steps = 20;
  RunConfig mc_cfg = cfg;
  mc_cfg.solver.t_steps = 10;
  mc_cfg.solver.backend = BackendKind::mc;
  mc_cfg.solver.tol = 1e-5;
  mc_cfg.solver.mc.samples = 2000;
  mc_cfg.solver.mc.seed = 9001;
  mc_cfg.solver.mc.threads = 1;

  bool same = true;
  for (const RunConfig& rc : {cfg, mc_cfg}) {
    const fs::path a = root / (rc.solver.backend == BackendKind::mc ? "mc_a" : "k_a");
    const fs::path b = root / (rc.solver.backend == BackendKind::mc ? "mc_b" : "k_b");
    write_price_artifacts(run_price(rc), rc, {}, a);
    write_price_artifacts(run_price(rc), rc, {}, b);
    for (const char* f : {"surface.csv", "iterations.csv", "summary.json"})
      same = same && !slurp(a / f).empty() && slurp(a / f) == slurp(b / f);
  }
  fs::remove_all(root);
  note = fmt("kernel and mc reruns byte-identical: %s", same ? "yes" : "no");
  return same;
}

}  // namespace

int main() {
  int failures = 0;
  int index = 0;
  const auto run = [&](const char* what, const std::function<bool(std::string&)>& check) {
    ++index;
    std::string note;
    bool ok = false;
    const auto start = std::chrono::steady_clock::now();
    try {
      ok = check(note);
    } catch (const std::exception& e) {
      note = fmt("exception: %s", e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > 60.0) {
      ok = false;
      note += " [over the 60 s budget]";
    }
    std::printf("%s %2d  %-58s  %s  [%.1fs]\n", ok ? "PASS" : "FAIL", index, what,
                note.c_str(), secs);
    std::fflush(stdout);
    if (!ok) ++failures;
  };

  // The bilateral default run feeds four checks; artifacts go with it.
  PriceArtifacts def;
  const fs::path def_dir = fs::temp_directory_path() / "xva_acceptance_default";
  std::string prep_error;
  try {
    fs::remove_all(def_dir);
    def = run_price(default_problem());
    write_price_artifacts(def, default_problem(), {}, def_dir);
  } catch (const std::exception& e) {
    prep_error = e.what();
  }
  const auto need_default = [&](std::string& note,
                                const std::function<bool(std::string&)>& check) {
    if (!prep_error.empty()) {
      note = "default run failed: " + prep_error;
      return false;
    }
    return check(note);
  };

  run("credit-free price matches the closed form (kernel and fd)", check_linear_degeneracy);
  run("one-signed default run matches the discounted closed form",
      [&](std::string& n) { return need_default(n, [&](std::string& m) { return check_one_signed_reduction(def, m); }); });
  run("chains move one way and stay inside the growth envelope",
      [&](std::string& n) { return need_default(n, [&](std::string& m) { return check_monotone_chains(def, m); }); });
  run("decreasing and increasing limits agree; price sits between",
      [&](std::string& n) { return need_default(n, [&](std::string& m) { return check_two_sided_certificate(def, m); }); });
  run("successive gaps contract; largest ratio lands in the summary",
      [&](std::string& n) { return need_default(n, [&](std::string& m) { return check_contraction(def, def_dir, m); }); });
  run("kernel mass discounts exactly; steps compose across spans", check_kernel_identities);
  run("kernel, fd and mc backends agree where they overlap",
      [&](std::string& n) { return need_default(n, [&](std::string& m) { return check_backend_agreement(def, m); }); });
  run("fd converges at second order; mc error scales as 1/sqrt(N)", check_order);
  run("constant-source march integrates the scalar decay equation", check_duhamel_ode);
  run("identical config and seed reproduce artifacts byte for byte", check_determinism);

  fs::remove_all(def_dir);
  std::printf("%d of %d checks passed\n", index - failures, index);
  return failures;
}
