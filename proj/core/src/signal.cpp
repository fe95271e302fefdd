#include "qwloc/signal.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace qwloc {

namespace {
constexpr double kPi = std::numbers::pi;
}

double ricker_eval(const RickerParams& p, double t) {
    const double b = kPi * kPi * p.f0 * p.f0 * t * t;
    return p.amp * (1.0 - 2.0 * b) * std::exp(-b);
}

double ricker_deriv(const RickerParams& p, double t) {
    const double b = kPi * kPi * p.f0 * p.f0;
    return -2.0 * b * p.amp * t * (3.0 - 2.0 * b * t * t) * std::exp(-b * t * t);
}

Trace make_ricker_trace(const RickerParams& p, double delay, double dt, std::size_t n) {
    if (n < 2) throw std::invalid_argument("ricker trace needs n >= 2");
    if (!(dt > 0.0)) throw std::invalid_argument("ricker trace needs dt > 0");
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i)
        s[i] = ricker_eval(p, static_cast<double>(i) * dt - delay);
    return Trace(dt, std::move(s));
}

NoiseSpec NoiseSpec::uniform(double a, double b, std::size_t segments, std::uint64_t seed) {
    if (!(a < b)) throw std::invalid_argument("uniform noise requires a < b");
    if (segments < 1) throw std::invalid_argument("noise segments must be >= 1");
    NoiseSpec s;
    s.kind = Kind::uniform;
    s.a = a;
    s.b = b;
    s.segments = segments;
    s.seed = seed;
    return s;
}

NoiseSpec NoiseSpec::normal(double mean, double stddev, std::size_t segments, std::uint64_t seed) {
    if (stddev < 0.0) throw std::invalid_argument("normal noise requires stddev >= 0");
    if (segments < 1) throw std::invalid_argument("noise segments must be >= 1");
    NoiseSpec s;
    s.kind = Kind::normal;
    s.mean = mean;
    s.stddev = stddev;
    s.segments = segments;
    s.seed = seed;
    return s;
}

double NoiseSpec::noise_mean() const {
    return kind == Kind::uniform ? 0.5 * (a + b) : mean;
}

double NoiseSpec::noise_variance() const {
    if (kind == Kind::uniform) {
        const double w = b - a;
        return w * w / 12.0;
    }
    return stddev * stddev;
}

Trace inject_noise(const Trace& g, const NoiseSpec& spec) {
    validate(g);
    const std::size_t n = g.size();
    const std::size_t N = spec.segments;
    if (N > n) throw std::invalid_argument("noise segments exceed sample count");

    std::mt19937_64 rng(spec.seed);
    std::vector<double> draws(N);
    if (spec.kind == NoiseSpec::Kind::uniform) {
        std::uniform_real_distribution<double> dist(spec.a, spec.b);
        for (auto& d : draws) d = dist(rng);
    } else if (spec.stddev == 0.0) {
        for (auto& d : draws) d = spec.mean;
    } else {
        std::normal_distribution<double> dist(spec.mean, spec.stddev);
        for (auto& d : draws) d = dist(rng);
    }

    Trace out = g;
    // segment of sample i: ceil(N*i/(n-1)) in exact integer arithmetic,
    // sample 0 goes to segment 1; this realizes the half-open intervals
    // with boundary samples assigned left.
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t seg = i == 0 ? 1 : (N * i + n - 2) / (n - 1);
        out.samples[i] += draws[seg - 1];
    }
    return out;
}

std::vector<double> Lambda::values_on(std::size_t n, double dt) const {
    if (is_constant()) return std::vector<double>(n, constant_);
    if (trace_->size() != n || std::abs(trace_->dt - dt) > 1e-9 * std::max(trace_->dt, dt))
        throw std::invalid_argument("lambda trace grid does not match signal grid");
    return trace_->samples;
}

Lambda lambda_star(const NoiseSpec& spec, const Trace& g) {
    const double mu = spec.noise_mean();
    const double var = spec.noise_variance();
    if (mu == 0.0) return Lambda(var);
    std::vector<double> v(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        v[i] = 2.0 * mu * g.samples[i] + mu * mu + var;
    return Lambda(Trace(g.dt, std::move(v)));
}

Density make_density(std::vector<double> values, double dt) {
    const double mass = trapezoid(values, dt);
    if (mass < 1e-300) throw std::runtime_error("degenerate signal");
    for (auto& v : values) v /= mass;
    Density d;
    d.dt = dt;
    d.values = std::move(values);
    d.mass = trapezoid(d.values, dt);
    return d;
}

Density normalize_square(const Trace& f) {
    validate(f);
    std::vector<double> sq(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) sq[i] = f.samples[i] * f.samples[i];
    return make_density(std::move(sq), f.dt);
}

Density normalize_square_reg(const Trace& g, const Lambda& lambda) {
    validate(g);
    const auto lam = lambda.values_on(g.size(), g.dt);
    std::vector<double> prof(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        prof[i] = g.samples[i] * g.samples[i] + lam[i];
        if (!(prof[i] > 0.0) && !lambda.is_zero())
            throw std::runtime_error("invalid regularizer: g^2+lambda not positive at node " +
                                     std::to_string(i));
    }
    return make_density(std::move(prof), g.dt);
}

} // namespace qwloc
