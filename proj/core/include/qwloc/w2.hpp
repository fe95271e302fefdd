#ifndef QWLOC_W2_HPP
#define QWLOC_W2_HPP

#include "qwloc/signal.hpp"
#include "qwloc/trace.hpp"
#include "qwloc/w2_types.hpp"

namespace qwloc {

/// Cumulative trapezoid integral of the density, renormalized so the final
/// value is exactly 1.
Cdf cdf(const Density& rho);

/// Generalized inverse F^{-1}(p) = inf{t : F(t) >= p}, linear interpolation
/// inside the bracketing cell, left endpoint on flat plateaus.
double inv_cdf(const Cdf& f, double p);

TransportMap transport_map(const Cdf& f, const Cdf& g);

/// W2^2 = integral over [0,1] of |F^{-1}(p) - G^{-1}(p)|^2, evaluated exactly
/// for the atomic measures carried by the trapezoid node weights (merged
/// cumulative-mass partition). Symmetric in (f, g).
double w2_squared(const Density& f, const Density& g);

/// d(f,g) = W2^2(f^2/<f^2>, g^2/<g^2>).
double misfit_distance(const Trace& f, const Trace& g);

/// d_lambda(fN,g) = W2^2(fN^2/<fN^2>, (g^2+lambda)/<g^2+lambda>).
double misfit_distance_reg(const Trace& f_noisy, const Trace& g, const Lambda& lambda);

/// Which side of the pair carries the regularizer when differentiating.
/// `target`: gradient of W2^2(S(f), S_lambda(g)) with respect to f.
/// `self`:   gradient of W2^2(S_lambda(f), S(g)) with respect to f; this is
///           the form the adjoint source needs when lambda sits on the
///           synthetic signal.
enum class RegSide { target, self };

/// Frechet gradient 4 (A(t) - B) f(t). A(t_i) is the cumulative integral of
/// (tau - T(tau)) divided by the mass of the f-side profile, B its
/// profile-weighted mean; T maps the f-side density onto the g-side density.
W2Gradient frechet_gradient(const Trace& f, const Trace& g,
                            const Lambda& lambda = Lambda(),
                            RegSide side = RegSide::target);

} // namespace qwloc

#endif
