#include "qwloc/w2.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qwloc {

void validate(const Density& d) {
    if (d.values.size() < 2 || !(d.dt > 0.0))
        throw std::invalid_argument("density needs n >= 2 and dt > 0");
    for (double v : d.values)
        if (!(v >= 0.0)) throw std::invalid_argument("density value negative");
    if (std::abs(d.mass - 1.0) > 1e-12)
        throw std::invalid_argument("density mass not 1 within 1e-12");
}

void validate(const Cdf& f) {
    if (f.values.size() < 2 || !(f.dt > 0.0))
        throw std::invalid_argument("cdf needs n >= 2 and dt > 0");
    if (f.values.front() < 0.0)
        throw std::invalid_argument("cdf must start nonnegative");
    for (std::size_t i = 1; i < f.values.size(); ++i)
        if (f.values[i] < f.values[i - 1])
            throw std::invalid_argument("cdf not nondecreasing");
    if (std::abs(f.values.back() - 1.0) > 1e-12)
        throw std::invalid_argument("cdf must end at 1");
}

Cdf cdf(const Density& rho) {
    Cdf out;
    out.dt = rho.dt;
    out.values = cumulative_trapezoid(rho.values, rho.dt);
    const double total = out.values.back();
    if (!(total > 0.0)) throw std::runtime_error("degenerate signal");
    for (auto& v : out.values) v /= total;
    out.values.back() = 1.0;
    return out;
}

double inv_cdf(const Cdf& f, double p) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("inv_cdf needs p in [0,1]");
    const auto& F = f.values;
    auto it = std::lower_bound(F.begin(), F.end(), p);
    const std::size_t i = static_cast<std::size_t>(it - F.begin());
    if (i == 0) return 0.0;
    const double f0 = F[i - 1], f1 = F[i];
    // i is the smallest index with F[i] >= p, so f1 > f0 here
    return (static_cast<double>(i - 1) + (p - f0) / (f1 - f0)) * f.dt;
}

TransportMap transport_map(const Cdf& f, const Cdf& g) {
    if (f.size() != g.size() || std::abs(f.dt - g.dt) > 1e-9 * std::max(f.dt, g.dt))
        throw std::invalid_argument("cdf grids do not match");
    TransportMap t;
    t.dt = f.dt;
    t.t_values.resize(f.size());
    for (std::size_t i = 0; i < f.size(); ++i)
        t.t_values[i] = inv_cdf(g, f.values[i]);
    return t;
}

namespace {

// Atom masses: trapezoid node weights times the density, normalized to sum 1.
std::vector<double> atom_masses(const std::vector<double>& rho, double dt) {
    const std::size_t n = rho.size();
    std::vector<double> a(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = (i == 0 || i == n - 1) ? 0.5 * dt : dt;
        a[i] = w * rho[i];
        total += a[i];
    }
    if (!(total > 0.0)) throw std::runtime_error("degenerate signal");
    for (auto& v : a) v /= total;
    return a;
}

// Exact 1D transport between atoms at t_i = i*dt: the quantile-domain
// integral evaluated exactly on the merged cumulative-mass partition.
// phi is the dual potential (dW/da_i), midpoint subgradient at clean cuts.
struct AtomicTransport {
    double cost = 0.0;
    std::vector<double> phi;
};

AtomicTransport atomic_transport(const std::vector<double>& a,
                                 const std::vector<double>& b, double dt) {
    const std::size_t n = a.size();
    AtomicTransport out;
    out.phi.assign(n, 0.0);
    auto t = [dt](std::size_t k) { return static_cast<double>(k) * dt; };
    auto c = [&](std::size_t i, std::size_t j) {
        const double d = t(i) - t(j);
        return d * d;
    };
    std::size_t i = 0, j = 0;
    double rem_a = a[0], rem_b = b[0];
    while (true) {
        const double flow = std::min(rem_a, rem_b);
        if (flow > 0.0) out.cost += flow * c(i, j);
        if (rem_a == rem_b) {
            if (i + 1 < n) {
                const std::size_t jn = std::min(j + 1, n - 1);
                out.phi[i + 1] = out.phi[i] + 0.5 * (c(i + 1, j) - c(i, j) +
                                                     c(i + 1, jn) - c(i, jn));
            }
            ++i; ++j;
            if (i >= n || j >= n) break;
            rem_a = a[i];
            rem_b = b[j];
        } else if (rem_a < rem_b) {
            rem_b -= rem_a;
            if (i + 1 < n) out.phi[i + 1] = out.phi[i] + c(i + 1, j) - c(i, j);
            ++i;
            if (i >= n) break;
            rem_a = a[i];
        } else {
            rem_a -= rem_b;
            ++j;
            if (j >= n) break;
            rem_b = b[j];
        }
    }
    // roundoff can leave a residue on one side; continue the chain at the rim
    for (++i; i < n; ++i)
        out.phi[i] = out.phi[i - 1] + c(i, n - 1) - c(i - 1, n - 1);
    return out;
}

} // namespace

double w2_squared(const Density& f, const Density& g) {
    if (f.size() != g.size() || std::abs(f.dt - g.dt) > 1e-9 * std::max(f.dt, g.dt))
        throw std::invalid_argument("density grids do not match");
    return atomic_transport(atom_masses(f.values, f.dt),
                            atom_masses(g.values, g.dt), f.dt).cost;
}

double misfit_distance(const Trace& f, const Trace& g) {
    require_same_grid(f, g);
    return w2_squared(normalize_square(f), normalize_square(g));
}

double misfit_distance_reg(const Trace& f_noisy, const Trace& g, const Lambda& lambda) {
    require_same_grid(f_noisy, g);
    return w2_squared(normalize_square(f_noisy), normalize_square_reg(g, lambda));
}

W2Gradient frechet_gradient(const Trace& f, const Trace& g, const Lambda& lambda,
                            RegSide side) {
    require_same_grid(f, g);
    const std::size_t n = f.size();
    const double dt = f.dt;

    // f-side profile m(t); lambda joins the f side only in RegSide::self
    // (the adjoint-source convention with lambda on the synthetic signal).
    std::vector<double> m(n);
    for (std::size_t i = 0; i < n; ++i) m[i] = f.samples[i] * f.samples[i];
    Density rho_g;
    if (side == RegSide::self) {
        const auto lam = lambda.values_on(n, dt);
        for (std::size_t i = 0; i < n; ++i) {
            m[i] += lam[i];
            if (!(m[i] > 0.0) && !lambda.is_zero())
                throw std::runtime_error("invalid regularizer: f^2+lambda not positive at node " +
                                         std::to_string(i));
        }
        rho_g = normalize_square(g);
    } else {
        rho_g = normalize_square_reg(g, lambda);
    }
    const double mass = trapezoid(m, dt);
    if (mass < 1e-300) throw std::runtime_error("degenerate signal");

    const auto a = atom_masses(m, dt);
    const auto b = atom_masses(rho_g.values, dt);
    const auto tr = atomic_transport(a, b, dt);

    // dW/da_i = phi_i; through the normalization, grad = 4 (A - B) f with
    // A = phi/(2 mass) and B the a-weighted mean of A.
    double phi_bar = 0.0;
    for (std::size_t i = 0; i < n; ++i) phi_bar += tr.phi[i] * a[i];

    W2Gradient out;
    out.dt = dt;
    out.a_values.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.a_values[i] = tr.phi[i] / (2.0 * mass);
    out.b = phi_bar / (2.0 * mass);
    out.grad.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        out.grad[i] = 4.0 * (out.a_values[i] - out.b) * f.samples[i];
    return out;
}

} // namespace qwloc
