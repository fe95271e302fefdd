#ifndef QWLOC_TRACE_HPP
#define QWLOC_TRACE_HPP

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace qwloc {

/// Uniformly sampled time series on [0, t_f], samples[i] at t_i = i*dt.
struct Trace {
    double dt = 0.0;
    std::vector<double> samples;

    Trace() = default;
    Trace(double dt_, std::vector<double> samples_);

    std::size_t size() const { return samples.size(); }
    double t_final() const { return dt * static_cast<double>(samples.size() - 1); }
    double time(std::size_t i) const { return dt * static_cast<double>(i); }

    double& operator[](std::size_t i) { return samples[i]; }
    double operator[](std::size_t i) const { return samples[i]; }
};

/// n >= 2, dt > 0, all samples finite; throws std::invalid_argument otherwise.
void validate(const Trace& t);

/// Traces are combinable only when n matches exactly and dt agrees to 1e-9 relative.
bool same_grid(const Trace& a, const Trace& b);
void require_same_grid(const Trace& a, const Trace& b);

/// Trapezoid quadrature of the samples over [0, t_f].
double trapezoid(const std::vector<double>& v, double dt);

/// Cumulative trapezoid integral; out[0] = 0, out[i] = integral over [0, t_i].
std::vector<double> cumulative_trapezoid(const std::vector<double>& v, double dt);

/// Two-column CSV `t,value` with header. dt is inferred from the time column
/// and must be uniform within 1e-9 relative.
void write_csv(const Trace& t, std::ostream& os);
void write_csv(const Trace& t, const std::string& path);
Trace read_trace_csv(std::istream& is);
Trace read_trace_csv(const std::string& path);

} // namespace qwloc

#endif
