// Purpose: shared scalar math for the kernel backends. The scalar backend is
// the reference semantics; the public single-value surrogate functions reuse
// these helpers so there is exactly one definition of each branch.
#pragma once

#include <cmath>

#include "roadmap/kernels.hpp"

namespace roadmap::kernels::detail {

// Numerically stable logistic together with its derivative in u. Evaluates
// exp(-|u|) once; works for any u without overflow.
inline void sigmoid_pair(double u, double& s, double& ds) {
  const double e = std::exp(-std::fabs(u));
  const double hi = 1.0 / (1.0 + e);  // sigmoid(|u|)
  const double lo = e * hi;           // sigmoid(-|u|)
  s = (u >= 0.0) ? hi : lo;
  ds = hi * lo;  // sigmoid(u) * (1 - sigmoid(u)), same for either sign
}

// Piecewise negative-rank surrogate and its derivative at difference t.
// t == 0 takes the shifted middle branch (value exactly 1); t == delta also
// takes the middle branch, so the derivative there is the sigmoid one.
inline void hminus_pair(double t, const HminusParams& p, double& h,
                        double& dh) {
  if (t > p.delta) {
    h = p.rho * (t - p.delta) + p.plateau;
    dh = p.rho;
    return;
  }
  double s, ds;
  sigmoid_pair(t * p.inv_tau, s, ds);
  h = (t >= 0.0) ? s + 0.5 : s;
  dh = ds * p.inv_tau;
}

}  // namespace roadmap::kernels::detail
