#ifndef QWLOC_ALTMETRICS_HPP
#define QWLOC_ALTMETRICS_HPP

#include "qwloc/trace.hpp"
#include "qwloc/w2_types.hpp"

namespace qwloc {

/// Dual certificate for the KR norm: phi in [-1,1]^n with |phi_{i+1}-phi_i| <= dt.
struct KrnDualSolution {
    std::vector<double> phi_values;
    double objective = 0.0;
};

/// Relative L2 distance: <|d-s|^2> / <|d|^2>.
double rld(const Trace& d, const Trace& s);

/// W2^2 of the shift-normalized signals (d+c)/<d+c> vs (s+c)/<s+c>.
/// Requires d+c > 0 and s+c > 0 at every node.
double qwn_c(const Trace& d, const Trace& s, double c);

/// Kantorovich-Rubinstein norm: maximize the trapezoid-weighted sum of
/// phi_i (d_i - s_i) over bounded 1-Lipschitz phi. Solved exactly by a
/// dynamic program over the chain of difference constraints.
KrnDualSolution krn(const Trace& d, const Trace& s);

} // namespace qwloc

#endif
