#ifndef QWLOC_SIGNAL_HPP
#define QWLOC_SIGNAL_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "qwloc/trace.hpp"
#include "qwloc/w2_types.hpp"

namespace qwloc {

/// Ricker wavelet R(t) = amp * (1 - 2 pi^2 f0^2 t^2) exp(-pi^2 f0^2 t^2).
struct RickerParams {
    double amp = 1.0;  ///< amplitude A, > 0
    double f0 = 1.0;   ///< dominant frequency in Hz, > 0
};

double ricker_eval(const RickerParams& p, double t);
/// Analytic derivative R'(t).
double ricker_deriv(const RickerParams& p, double t);

/// samples[i] = R(i*dt - delay).
Trace make_ricker_trace(const RickerParams& p, double delay, double dt, std::size_t n);

/// Piecewise-constant segment noise added to a trace.
struct NoiseSpec {
    enum class Kind { uniform, normal };
    Kind kind = Kind::normal;
    double a = 0.0, b = 0.0;        ///< uniform bounds, requires a < b
    double mean = 0.0, stddev = 0.0; ///< normal parameters, stddev >= 0
    std::size_t segments = 1;        ///< N >= 1
    std::uint64_t seed = 0;

    static NoiseSpec uniform(double a, double b, std::size_t segments, std::uint64_t seed);
    static NoiseSpec normal(double mean, double stddev, std::size_t segments, std::uint64_t seed);

    double noise_mean() const;      ///< mu of one draw
    double noise_variance() const;  ///< sigma^2 of one draw
};

/// One i.i.d. draw per segment j = ceil(N t / t_f); segment 1 is [0, t_f/N],
/// the others are half-open (.,.]. Boundary samples go to the left segment.
/// Deterministic for a fixed seed. Requires spec.segments <= n.
Trace inject_noise(const Trace& g, const NoiseSpec& spec);

/// Regularizer lambda(t): either a constant or a per-sample trace. A constant
/// is broadcast to the sample grid when applied.
class Lambda {
public:
    Lambda() : constant_(0.0) {}
    Lambda(double c) : constant_(c) {}
    Lambda(Trace t) : trace_(std::move(t)) {}

    bool is_constant() const { return !trace_.has_value(); }
    double constant() const { return constant_; }
    bool is_zero() const { return is_constant() && constant_ == 0.0; }

    /// Per-sample values on a grid of n samples with spacing dt.
    std::vector<double> values_on(std::size_t n, double dt) const;

private:
    double constant_ = 0.0;
    std::optional<Trace> trace_;
};

/// lambda*(t) = 2 mu g(t) + mu^2 + sigma^2; a constant when mu = 0.
Lambda lambda_star(const NoiseSpec& spec, const Trace& g);

/// S(f) = f^2 / <f^2> under trapezoid quadrature. Throws "degenerate signal"
/// when <f^2> < 1e-300.
Density normalize_square(const Trace& f);

/// (g^2 + lambda) / <g^2 + lambda>; requires g^2 + lambda > 0 at every node,
/// otherwise throws "invalid regularizer".
Density normalize_square_reg(const Trace& g, const Lambda& lambda);

} // namespace qwloc

#endif
