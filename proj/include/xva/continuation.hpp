#pragma once

#include <functional>

#include "xva/model.hpp"

namespace xva {

class CoefficientIntegrals;

/// Rule for reading a nodal field beyond the grid edge. All backends share
/// it: the kernel convolution and the sampler evaluate it directly, the
/// finite-difference scheme pins its boundary rows to it.
///
/// Vanilla payoffs decay to zero on the out-of-the-money side and approach
/// a discounted forward asymptote a(t) + b(t) exp(y) in the money; tabulated
/// payoffs extend by the edge value of the field itself.
class Continuation {
 public:
  enum class Tail { zero, forward_asymptote, clamp };

  struct Side {
    Tail tail = Tail::clamp;
    std::function<double(double)> a;  // constant coefficient, function of time
    std::function<double(double)> b;  // coefficient of exp(y)
  };

  Side left, right;

  double value_left(double y, double t, double edge) const { return eval(left, y, t, edge); }
  double value_right(double y, double t, double edge) const { return eval(right, y, t, edge); }

  /// Continuation of the reaction term applied to this field: forward-side
  /// coefficients scale by the reaction slope, zero and clamp pass through.
  Continuation scaled(double factor) const;

 private:
  static double eval(const Side& s, double y, double t, double edge);
};

Continuation zero_continuation();
Continuation clamp_continuation();

/// Tail rule matching the payoff's deep in/out-of-the-money behaviour under
/// the one-signed reaction regime, so the boundary data stays consistent
/// with the interior solution it brackets.
Continuation make_continuation(const Payoff& payoff, const ReactionSpec& spec,
                               const CoefficientIntegrals& ci);

}  // namespace xva
