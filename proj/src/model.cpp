#include "xva/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace xva {

namespace {

double pos(double x) { return x > 0.0 ? x : 0.0; }
double neg(double x) { return x < 0.0 ? -x : 0.0; }

bool finite(double x) { return std::isfinite(x); }

}  // namespace

void RiskParams::validate() const {
  if (!finite(r)) throw std::invalid_argument("risk.r: must be finite");
  if (!finite(lambda_b) || lambda_b < 0.0)
    throw std::invalid_argument("risk.lambda_b: must be >= 0");
  if (!finite(lambda_c) || lambda_c < 0.0)
    throw std::invalid_argument("risk.lambda_c: must be >= 0");
  if (!finite(recovery_b) || recovery_b < 0.0 || recovery_b > 1.0)
    throw std::invalid_argument("risk.recovery_b: must lie in [0, 1]");
  if (!finite(recovery_c) || recovery_c < 0.0 || recovery_c > 1.0)
    throw std::invalid_argument("risk.recovery_c: must lie in [0, 1]");
  if (!finite(s_f) || s_f < 0.0)
    throw std::invalid_argument("risk.s_f: must be >= 0");
}

double eval_F(double m, const RiskParams& rp) {
  return (rp.recovery_b * rp.lambda_b + rp.lambda_c) * neg(m) -
         (rp.lambda_b + rp.recovery_c * rp.lambda_c) * pos(m) + rp.s_f * pos(m);
}

double eval_F_tilde(double v, const RiskParams& rp) {
  return (1.0 - rp.recovery_b) * rp.lambda_b * neg(v) -
         ((1.0 - rp.recovery_c) * rp.lambda_c + rp.s_f) * pos(v);
}

ReactionSpec build_reaction(const RiskParams& rp) {
  rp.validate();
  ReactionSpec spec;
  spec.risk = rp;
  const double loss_b = (1.0 - rp.recovery_b) * rp.lambda_b;
  const double loss_c = (1.0 - rp.recovery_c) * rp.lambda_c + rp.s_f;
  spec.l_shift = std::max(loss_b, loss_c);
  spec.r_g = rp.r + spec.l_shift;
  spec.g_neg = spec.l_shift - loss_b;
  spec.g_pos = spec.l_shift - loss_c;
  spec.l_g = std::max(spec.g_neg, spec.g_pos);
  spec.c0 = 0.0;
  return spec;
}

ReactionSpec build_custom_reaction(const RiskParams& rp, std::function<double(double)> g,
                                   double l_g, double c0) {
  if (!g) throw std::invalid_argument("reaction: custom function must be callable");
  if (!finite(l_g) || l_g < 0.0) throw std::invalid_argument("reaction: l_g must be >= 0");
  if (!finite(c0) || c0 < 0.0) throw std::invalid_argument("reaction: c0 must be >= 0");

  // Spot checks on a logarithmic ladder of sample points around zero.
  const double tol = 1e-12;
  if (std::abs(g(0.0)) > c0 + tol)
    throw std::invalid_argument("reaction: |g(0)| exceeds declared c0");
  std::vector<double> pts{0.0};
  for (double v = 1e-6; v <= 1e6; v *= 4.0) {
    pts.push_back(v);
    pts.push_back(-v);
  }
  std::sort(pts.begin(), pts.end());
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double dv = pts[i + 1] - pts[i];
    const double dg = g(pts[i + 1]) - g(pts[i]);
    if (dg < -tol * (1.0 + std::abs(dv)))
      throw std::invalid_argument("reaction: custom g is not nondecreasing");
    if (dg > (l_g + tol) * dv + tol)
      throw std::invalid_argument("reaction: custom g violates declared Lipschitz bound");
  }

  ReactionSpec spec = build_reaction(rp);
  spec.custom = std::move(g);
  spec.l_g = l_g;
  spec.c0 = c0;
  return spec;
}

double eval_G(double v, const ReactionSpec& spec) {
  if (spec.custom) return spec.custom(v);
  return v > 0.0 ? spec.g_pos * v : spec.g_neg * v;
}

TimeCurve::TimeCurve(std::vector<double> times, std::vector<double> values)
    : t_(std::move(times)), v_(std::move(values)) {
  if (t_.empty() || t_.size() != v_.size())
    throw std::invalid_argument("curve: need one value per knot, at least one knot");
  for (std::size_t i = 0; i < t_.size(); ++i) {
    if (!finite(t_[i]) || !finite(v_[i]))
      throw std::invalid_argument("curve: knots must be finite");
    if (i > 0 && !(t_[i - 1] < t_[i]))
      throw std::invalid_argument("curve: knot times must be strictly increasing");
  }
}

double TimeCurve::operator()(double t) const {
  if (t_.empty()) throw std::logic_error("curve: empty");
  if (t <= t_.front()) return v_.front();
  if (t >= t_.back()) return v_.back();
  const auto it = std::upper_bound(t_.begin(), t_.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - t_.begin()) - 1;
  const double w = (t - t_[i]) / (t_[i + 1] - t_[i]);
  return v_[i] + w * (v_[i + 1] - v_[i]);
}

double TimeCurve::max_abs(double a, double b) const {
  double m = std::max(std::abs((*this)(a)), std::abs((*this)(b)));
  for (std::size_t i = 0; i < t_.size(); ++i)
    if (t_[i] > a && t_[i] < b) m = std::max(m, std::abs(v_[i]));
  return m;
}

double TimeCurve::min_value(double a, double b) const {
  double m = std::min((*this)(a), (*this)(b));
  for (std::size_t i = 0; i < t_.size(); ++i)
    if (t_[i] > a && t_[i] < b) m = std::min(m, v_[i]);
  return m;
}

void Payoff::validate() const {
  if (!finite(strike) || strike <= 0.0)
    throw std::invalid_argument("payoff.strike: must be > 0");
  if (kind == Kind::table) {
    if (table_s.size() < 2 || table_s.size() != table_v.size())
      throw std::invalid_argument("payoff.table: need at least two (spot, value) rows");
    for (std::size_t i = 0; i < table_s.size(); ++i) {
      if (!finite(table_s[i]) || !finite(table_v[i]) || table_s[i] <= 0.0)
        throw std::invalid_argument("payoff.table: entries must be finite, spots > 0");
      if (i > 0 && !(table_s[i - 1] < table_s[i]))
        throw std::invalid_argument("payoff.table: spots must be strictly increasing");
    }
  } else if (!table_s.empty() || !table_v.empty()) {
    throw std::invalid_argument("payoff.table: only tabulated payoffs carry a table");
  }
}

double Payoff::operator()(double s) const {
  switch (kind) {
    case Kind::call:
      return pos(s - strike);
    case Kind::put:
      return pos(strike - s);
    case Kind::table: {
      const double slack = 1e-12 * table_s.back();
      if (s < table_s.front() - slack || s > table_s.back() + slack)
        throw std::invalid_argument("payoff.table: queried spot outside tabulated range");
      const double sc = std::clamp(s, table_s.front(), table_s.back());
      const auto it = std::upper_bound(table_s.begin(), table_s.end(), sc);
      std::size_t i = static_cast<std::size_t>(it - table_s.begin());
      if (i == 0) i = 1;
      if (i == table_s.size()) i = table_s.size() - 1;
      const double w = (sc - table_s[i - 1]) / (table_s[i] - table_s[i - 1]);
      return table_v[i - 1] + w * (table_v[i] - table_v[i - 1]);
    }
  }
  throw std::logic_error("payoff: unknown kind");
}

Payoff Payoff::normalized() const {
  validate();
  Payoff out = *this;
  out.strike = 1.0;
  for (auto& s : out.table_s) s /= strike;
  for (auto& v : out.table_v) v /= strike;
  return out;
}

}  // namespace xva
