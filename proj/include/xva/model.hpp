#pragma once

#include <functional>
#include <vector>

namespace xva {

/// Counterparty-risk inputs: short rate, default intensities of the two
/// parties, their recoveries, and the funding spread.
struct RiskParams {
  double r = 0.0;
  double lambda_b = 0.0;
  double lambda_c = 0.0;
  double recovery_b = 1.0;
  double recovery_c = 1.0;
  double s_f = 0.0;

  void validate() const;
};

/// Bilateral value-adjustment term of the semilinear pricing equation,
/// evaluated at mark-to-market m.
double eval_F(double m, const RiskParams& rp);

/// The same nonlinearity after the intensity terms are absorbed into the
/// linear part: eval_F_tilde(v) = -eval_F(v) - (lambda_b + lambda_c) * v.
double eval_F_tilde(double v, const RiskParams& rp);

/// Reaction term of the transformed problem, shifted so it is nondecreasing:
/// G(v) = F_tilde(v) + l_shift * v. The slopes on the two half-lines are
/// g_neg (v < 0) and g_pos (v > 0); both lie in [0, l_shift].
struct ReactionSpec {
  RiskParams risk;
  double l_shift = 0.0;  // Lipschitz bound of F_tilde, size of the shift
  double r_g = 0.0;      // reaction rate of the shifted linear operator, r + l_shift
  double l_g = 0.0;      // Lipschitz constant of G
  double c0 = 0.0;       // bound on |G(0)|
  double g_neg = 0.0;
  double g_pos = 0.0;
  // Optional user reaction; replaces the built-in piecewise-linear G.
  std::function<double(double)> custom;
};

ReactionSpec build_reaction(const RiskParams& rp);

/// Extension point: caller supplies a nondecreasing Lipschitz reaction g
/// together with declared constants. Both claims are spot-checked on a
/// sample of points; violations throw.
ReactionSpec build_custom_reaction(const RiskParams& rp, std::function<double(double)> g,
                                   double l_g, double c0);

double eval_G(double v, const ReactionSpec& spec);

/// Piecewise-linear curve of time with constant extrapolation outside the
/// knot range. Knot times must be strictly increasing.
class TimeCurve {
 public:
  TimeCurve() = default;
  explicit TimeCurve(double constant) : t_{0.0}, v_{constant} {}
  TimeCurve(std::vector<double> times, std::vector<double> values);

  double operator()(double t) const;

  /// sup of |value| over [a, b]; attained at a knot or an endpoint.
  double max_abs(double a, double b) const;
  double min_value(double a, double b) const;

  const std::vector<double>& knot_times() const { return t_; }
  const std::vector<double>& knot_values() const { return v_; }

 private:
  std::vector<double> t_;
  std::vector<double> v_;
};

/// Terminal payoff. Vanilla kinds evaluate in closed form; tabulated payoffs
/// interpolate linearly in spot and refuse queries outside the table range.
struct Payoff {
  enum class Kind { call, put, table };
  Kind kind = Kind::call;
  double strike = 1.0;
  std::vector<double> table_s;
  std::vector<double> table_v;

  void validate() const;
  double operator()(double s) const;

  /// Same contract in strike units: spot and value both divided by strike.
  /// Pricing is positively homogeneous, so solving the normalized problem
  /// and scaling back is exact.
  Payoff normalized() const;
};

}  // namespace xva
