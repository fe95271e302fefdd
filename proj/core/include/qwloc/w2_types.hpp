#ifndef QWLOC_W2_TYPES_HPP
#define QWLOC_W2_TYPES_HPP

#include <cstddef>
#include <vector>

namespace qwloc {

/// Normalized nonnegative signal on the sample grid; mass is the cached
/// trapezoid integral and equals 1 within 1e-12.
struct Density {
    double dt = 0.0;
    std::vector<double> values;
    double mass = 0.0;

    std::size_t size() const { return values.size(); }
};

/// Validates nonnegativity and unit mass; throws std::invalid_argument.
void validate(const Density& d);

/// Normalizes a nonnegative profile to unit trapezoid mass.
/// Throws "degenerate signal" when the mass is below 1e-300.
Density make_density(std::vector<double> values, double dt);

/// Cumulative distribution: nondecreasing, values[0] >= 0, final value 1.
struct Cdf {
    double dt = 0.0;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
};

void validate(const Cdf& f);

/// Monotone map T(t_i) = G^{-1}(F(t_i)), each value in [0, t_f].
struct TransportMap {
    double dt = 0.0;
    std::vector<double> t_values;

    std::size_t size() const { return t_values.size(); }
};

/// A(t), B and the gradient 4 (A(t_i) - B) f(t_i) of the reformulated distance.
struct W2Gradient {
    double dt = 0.0;
    std::vector<double> a_values;
    double b = 0.0;
    std::vector<double> grad;
};

} // namespace qwloc

#endif
