#include "xva/continuation.hpp"

#include <cmath>
#include <stdexcept>

#include "xva/evolution.hpp"

namespace xva {

double Continuation::eval(const Side& s, double y, double t, double edge) {
  switch (s.tail) {
    case Tail::zero:
      return 0.0;
    case Tail::clamp:
      return edge;
    case Tail::forward_asymptote:
      return s.a(t) + s.b(t) * std::exp(y);
  }
  throw std::logic_error("continuation: unknown tail kind");
}

Continuation Continuation::scaled(double factor) const {
  Continuation out = *this;
  for (Side* side : {&out.left, &out.right}) {
    if (side->tail == Tail::forward_asymptote) {
      auto a = side->a;
      auto b = side->b;
      side->a = [a, factor](double t) { return factor * a(t); };
      side->b = [b, factor](double t) { return factor * b(t); };
    }
  }
  return out;
}

Continuation zero_continuation() {
  Continuation c;
  c.left.tail = Continuation::Tail::zero;
  c.right.tail = Continuation::Tail::zero;
  return c;
}

Continuation clamp_continuation() {
  Continuation c;
  c.left.tail = Continuation::Tail::clamp;
  c.right.tail = Continuation::Tail::clamp;
  return c;
}

Continuation make_continuation(const Payoff& payoff, const ReactionSpec& spec,
                               const CoefficientIntegrals& ci) {
  payoff.validate();
  if (payoff.kind == Payoff::Kind::table) return clamp_continuation();

  // Deep in the money the solution keeps one sign, the reaction degenerates
  // to its linear branch g_pos * v, and the effective discount rate becomes
  // rho. The asymptote fwd(t) e^y - strike disc(t) solves the equation there.
  const double rho = spec.r_g - spec.g_pos;
  const double strike = payoff.strike;
  const CoefficientIntegrals coeffs = ci;
  auto fwd = [coeffs, rho](double t) {
    return std::exp(coeffs.carry_integral(0.0, t) - rho * t);
  };
  auto disc = [rho](double t) { return std::exp(-rho * t); };

  Continuation c;
  if (payoff.kind == Payoff::Kind::call) {
    c.left.tail = Continuation::Tail::zero;
    c.right.tail = Continuation::Tail::forward_asymptote;
    c.right.a = [disc, strike](double t) { return -strike * disc(t); };
    c.right.b = fwd;
  } else {
    c.right.tail = Continuation::Tail::zero;
    c.left.tail = Continuation::Tail::forward_asymptote;
    c.left.a = [disc, strike](double t) { return strike * disc(t); };
    c.left.b = [fwd](double t) { return -fwd(t); };
  }
  return c;
}

}  // namespace xva
