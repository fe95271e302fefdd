#include "qwloc/altmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qwloc/w2.hpp"

namespace qwloc {

double rld(const Trace& d, const Trace& s) {
    require_same_grid(d, s);
    std::vector<double> num(d.size()), den(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double r = d.samples[i] - s.samples[i];
        num[i] = r * r;
        den[i] = d.samples[i] * d.samples[i];
    }
    const double mass = trapezoid(den, d.dt);
    if (mass < 1e-300) throw std::runtime_error("rld: zero-denominator <d^2>");
    return trapezoid(num, d.dt) / mass;
}

double qwn_c(const Trace& d, const Trace& s, double c) {
    require_same_grid(d, s);
    std::vector<double> pd(d.size()), ps(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        pd[i] = d.samples[i] + c;
        ps[i] = s.samples[i] + c;
        if (!(pd[i] > 0.0) || !(ps[i] > 0.0))
            throw std::runtime_error("qwn_c: shifted signal not positive at node " +
                                     std::to_string(i));
    }
    return w2_squared(make_density(std::move(pd), d.dt),
                      make_density(std::move(ps), d.dt));
}

namespace {

// Concave piecewise-linear function given by breakpoints (x ascending).
struct PiecewiseLinear {
    std::vector<double> x, y;

    // argmax interval [lo, hi] (a plateau when several breakpoints tie)
    void argmax(double& lo, double& hi, double& ymax) const {
        std::size_t best = 0;
        for (std::size_t i = 1; i < y.size(); ++i)
            if (y[i] > y[best]) best = i;
        ymax = y[best];
        std::size_t l = best, r = best;
        while (l > 0 && y[l - 1] == ymax) --l;
        while (r + 1 < y.size() && y[r + 1] == ymax) ++r;
        lo = x[l];
        hi = x[r];
    }

    double eval(double q) const {
        if (q <= x.front()) return y.front();
        if (q >= x.back()) return y.back();
        auto it = std::upper_bound(x.begin(), x.end(), q);
        const std::size_t i = static_cast<std::size_t>(it - x.begin());
        const double t = (q - x[i - 1]) / (x[i] - x[i - 1]);
        return y[i - 1] + t * (y[i] - y[i - 1]);
    }
};

// W(phi) = max over [phi-dt, phi+dt] of V, restricted to [-1, 1].
PiecewiseLinear window_max(const PiecewiseLinear& v, double dt) {
    double lo, hi, ymax;
    v.argmax(lo, hi, ymax);
    PiecewiseLinear w;
    auto push = [&w](double px, double py) {
        if (!w.x.empty() && px <= w.x.back() + 1e-15) return;
        w.x.push_back(px);
        w.y.push_back(py);
    };
    // rising part shifted left, plateau, falling part shifted right
    for (std::size_t i = 0; i < v.x.size() && v.x[i] < lo; ++i) push(v.x[i] - dt, v.y[i]);
    push(lo - dt, ymax);
    push(hi + dt, ymax);
    for (std::size_t i = 0; i < v.x.size(); ++i)
        if (v.x[i] > hi) push(v.x[i] + dt, v.y[i]);
    // clip domain to [-1, 1]
    PiecewiseLinear out;
    out.x.push_back(-1.0);
    out.y.push_back(w.eval(-1.0));
    for (std::size_t i = 0; i < w.x.size(); ++i)
        if (w.x[i] > -1.0 + 1e-15 && w.x[i] < 1.0 - 1e-15) {
            out.x.push_back(w.x[i]);
            out.y.push_back(w.y[i]);
        }
    out.x.push_back(1.0);
    out.y.push_back(w.eval(1.0));
    return out;
}

} // namespace

KrnDualSolution krn(const Trace& d, const Trace& s) {
    require_same_grid(d, s);
    const std::size_t n = d.size();
    const double dt = d.dt;
    std::vector<double> c(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
        c[i] = w * dt * (d.samples[i] - s.samples[i]);
    }

    // backward value functions V_i(phi) = c_i phi + max_{|psi-phi|<=dt} V_{i+1}(psi);
    // each is concave piecewise-linear, so only argmax intervals are kept for
    // the forward pass.
    std::vector<std::pair<double, double>> arg(n);
    PiecewiseLinear v;
    v.x = {-1.0, 1.0};
    v.y = {-c[n - 1], c[n - 1]};
    {
        double lo, hi, ym;
        v.argmax(lo, hi, ym);
        arg[n - 1] = {lo, hi};
    }
    for (std::size_t ii = n - 1; ii-- > 0;) {
        v = window_max(v, dt);
        for (std::size_t j = 0; j < v.x.size(); ++j) v.y[j] += c[ii] * v.x[j];
        double lo, hi, ym;
        v.argmax(lo, hi, ym);
        arg[ii] = {lo, hi};
    }

    KrnDualSolution sol;
    sol.phi_values.resize(n);
    double phi = 0.5 * (arg[0].first + arg[0].second);
    sol.phi_values[0] = phi;
    for (std::size_t i = 1; i < n; ++i) {
        double target = std::clamp(phi, arg[i].first, arg[i].second);
        phi = std::clamp(target, phi - dt, phi + dt);
        phi = std::clamp(phi, -1.0, 1.0);
        sol.phi_values[i] = phi;
    }
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) obj += c[i] * sol.phi_values[i];
    sol.objective = obj;
    return sol;
}

} // namespace qwloc
