#include "qwloc/adjoint.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "qwloc/parallel.hpp"
#include "sim_engine.hpp"

namespace qwloc {

AdjointSource build_adjoint_source(const Trace& s_trace, const Trace& d_trace,
                                   const Lambda& lambda, std::size_t receiver) {
    auto g = frechet_gradient(s_trace, d_trace, lambda, RegSide::self);
    AdjointSource out;
    out.receiver = receiver;
    out.trace = Trace(s_trace.dt, std::move(g.grad));
    return out;
}

namespace {

// reversed-time source at half steps; the first half step is zero so the
// reversed run starts from the two-level zero terminal state exactly
std::vector<double> reversed_half_series(const Trace& adj, std::size_t nt) {
    std::vector<double> s(nt, 0.0);
    for (std::size_t m = 1; m < nt; ++m) {
        const double r0 = adj.samples[nt - m];
        const double r1 = adj.samples[nt - m - 1];
        s[m] = 0.5 * (r0 + r1);
    }
    return s;
}

AdjointProbe flip_probe(const detail::SimSetup& setup, const WavefieldRecord& rec,
                        std::size_t nt) {
    auto series = detail::probe_series(setup, rec);
    AdjointProbe out;
    out.w.resize(nt + 1);
    out.wx.resize(nt + 1);
    out.wz.resize(nt + 1);
    for (std::size_t i = 0; i <= nt; ++i) {
        out.w[i] = series.u[nt - i];
        out.wx[i] = series.ux[nt - i];
        out.wz[i] = series.uz[nt - i];
    }
    return out;
}

} // namespace

std::vector<AdjointProbe> adjoint_solve(const VelocityModel& vm, const SolverConfig& cfg,
                                        const ReceiverArray& rec,
                                        const std::vector<AdjointSource>& sources,
                                        std::array<double, 2> xi_probe,
                                        unsigned threads) {
    validate(vm);
    validate(cfg, vm);
    const detail::SimSetup setup(vm, cfg);
    std::vector<AdjointProbe> out(sources.size());
    parallel_for(sources.size(), threads, [&](std::size_t k) {
        const auto& src = sources[k];
        if (src.trace.size() != cfg.nt + 1)
            throw std::invalid_argument("adjoint source not on the solver time grid");
        const double x_rec = rec.x_positions.at(src.receiver);
        auto ps = detail::make_point_source(setup, x_rec, 0.0,
                                            reversed_half_series(src.trace, cfg.nt));
        auto run = detail::run_simulation(setup, {ps}, {}, xi_probe);
        out[k] = flip_probe(setup, *run.record, cfg.nt);
        out[k].receiver = src.receiver;
    });
    return out;
}

AdjointProbe adjoint_solve_superposed(const VelocityModel& vm, const SolverConfig& cfg,
                                      const ReceiverArray& rec,
                                      const std::vector<AdjointSource>& sources,
                                      std::array<double, 2> xi_probe) {
    validate(vm);
    validate(cfg, vm);
    const detail::SimSetup setup(vm, cfg);
    std::vector<detail::PointSource> ps;
    ps.reserve(sources.size());
    for (const auto& src : sources) {
        if (src.trace.size() != cfg.nt + 1)
            throw std::invalid_argument("adjoint source not on the solver time grid");
        ps.push_back(detail::make_point_source(setup, rec.x_positions.at(src.receiver), 0.0,
                                               reversed_half_series(src.trace, cfg.nt)));
    }
    auto run = detail::run_simulation(setup, ps, {}, xi_probe);
    return flip_probe(setup, *run.record, cfg.nt);
}

KernelResult kernels(const SourceParams& src, const AdjointProbe& probe,
                     const SolverConfig& cfg, double chi_r) {
    const std::size_t n = cfg.nt + 1;
    if (probe.w.size() != n)
        throw std::invalid_argument("probe series not on the solver time grid");
    std::vector<double> ix(n), iz(n), it(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * cfg.dt - src.tau;
        const double r = ricker_eval(src.wavelet, t);
        const double rd = ricker_deriv(src.wavelet, t);
        ix[i] = r * probe.wx[i];
        iz[i] = r * probe.wz[i];
        it[i] = rd * probe.w[i];
    }
    KernelResult out;
    out.receiver = probe.receiver;
    out.chi = chi_r;
    out.k_xi = {trapezoid(ix, cfg.dt), trapezoid(iz, cfg.dt)};
    out.k_tau = -trapezoid(it, cfg.dt);
    return out;
}

namespace {

struct Cropped {
    Trace d, s;
    std::size_t begin = 0;  // node offset of the crop in the full grid
};

Cropped crop_pair(const Trace& d, const Trace& s, const TimeWindow& win) {
    if (!win.active()) return {d, s, 0};
    const double dt = d.dt;
    const auto n = d.size();
    std::size_t ia = static_cast<std::size_t>(std::max(0.0, std::ceil(win.t_begin / dt - 1e-9)));
    std::size_t ib = static_cast<std::size_t>(std::min(static_cast<double>(n - 1),
                                                       std::floor(win.t_end / dt + 1e-9)));
    if (ib <= ia + 1) throw std::invalid_argument("time window too narrow");
    Cropped out;
    out.begin = ia;
    out.d = Trace(dt, std::vector<double>(d.samples.begin() + static_cast<long>(ia),
                                          d.samples.begin() + static_cast<long>(ib) + 1));
    out.s = Trace(dt, std::vector<double>(s.samples.begin() + static_cast<long>(ia),
                                          s.samples.begin() + static_cast<long>(ib) + 1));
    return out;
}

double chi_windowed(const Trace& d, const Trace& s, const Lambda& lam,
                    const TimeWindow& win) {
    const auto c = crop_pair(d, s, win);
    return misfit_distance_reg(c.d, c.s, lam);
}

// empty: no regularizer; one entry: broadcast; otherwise one per receiver
Lambda lambda_for(const std::vector<Lambda>& lambda, std::size_t r, std::size_t R) {
    if (lambda.empty()) return Lambda();
    if (lambda.size() == 1) return lambda.front();
    if (lambda.size() != R)
        throw std::invalid_argument("lambda list must have 1 or R entries");
    return lambda[r];
}

} // namespace

MisfitOnly misfit_only(const VelocityModel& vm, const SourceParams& src,
                       const SolverConfig& cfg, const ReceiverArray& rec,
                       const TraceSet& observed, const std::vector<Lambda>& lambda,
                       const TimeWindow& window) {
    if (observed.size() != rec.size())
        throw std::invalid_argument("observed traces do not match receiver count");
    MisfitOnly out;
    out.synthetic = forward_solve(vm, src, cfg, rec);
    out.chi.resize(rec.size());
    for (std::size_t r = 0; r < rec.size(); ++r) {
        const Lambda lam = lambda_for(lambda, r, rec.size());
        out.chi[r] = chi_windowed(observed.traces[r], out.synthetic.traces[r], lam, window);
        out.chi_total += out.chi[r];
    }
    return out;
}

MisfitOnly misfit_only(const VelocityModel& vm, const SourceParams& src,
                       const SolverConfig& cfg, const ReceiverArray& rec,
                       const TraceSet& observed, const std::vector<Lambda>& lambda) {
    return misfit_only(vm, src, cfg, rec, observed, lambda, TimeWindow{});
}

MisfitGradient assemble_gradient(const VelocityModel& vm, const SourceParams& src,
                                 const SolverConfig& cfg, const ReceiverArray& rec,
                                 const TraceSet& observed, const TraceSet& synthetic,
                                 const std::vector<Lambda>& lambda,
                                 const TimeWindow& window, unsigned threads) {
    if (observed.size() != rec.size())
        throw std::invalid_argument("observed traces do not match receiver count");
    MisfitGradient out;
    out.synthetic = synthetic;

    const std::size_t R = rec.size();
    std::vector<double> chi(R);
    std::vector<AdjointSource> sources(R);
    for (std::size_t r = 0; r < R; ++r) {
        const Lambda lam = lambda_for(lambda, r, R);
        const auto c = crop_pair(observed.traces[r], out.synthetic.traces[r], window);
        chi[r] = misfit_distance_reg(c.d, c.s, lam);
        auto adj = build_adjoint_source(c.s, c.d, lam, r);
        // embed the windowed gradient into the full time grid
        std::vector<double> full(cfg.nt + 1, 0.0);
        std::copy(adj.trace.samples.begin(), adj.trace.samples.end(),
                  full.begin() + static_cast<long>(c.begin));
        sources[r].receiver = r;
        sources[r].trace = Trace(cfg.dt, std::move(full));
    }

    auto probes = adjoint_solve(vm, cfg, rec, sources, {src.xi_x, src.xi_z}, threads);

    out.kernels.resize(R);
    out.residuals.resize(R);
    out.jacobian.resize(R);
    for (std::size_t r = 0; r < R; ++r) {
        out.kernels[r] = kernels(src, probes[r], cfg, chi[r]);
        out.chi_total += chi[r];
        if (chi[r] < 1e-14) {
            out.residuals[r] = 0.0;
            out.jacobian[r] = {0.0, 0.0, 0.0};
        } else {
            const double rr = std::sqrt(chi[r]);
            out.residuals[r] = rr;
            out.jacobian[r] = {out.kernels[r].k_xi[0] / (2.0 * rr),
                               out.kernels[r].k_xi[1] / (2.0 * rr),
                               out.kernels[r].k_tau / (2.0 * rr)};
        }
    }
    return out;
}

MisfitGradient misfit_and_gradient(const VelocityModel& vm, const SourceParams& src,
                                   const SolverConfig& cfg, const ReceiverArray& rec,
                                   const TraceSet& observed,
                                   const std::vector<Lambda>& lambda,
                                   const TimeWindow& window, unsigned threads) {
    return assemble_gradient(vm, src, cfg, rec, observed, forward_solve(vm, src, cfg, rec),
                             lambda, window, threads);
}

MisfitGradient misfit_and_gradient(const VelocityModel& vm, const SourceParams& src,
                                   const SolverConfig& cfg, const ReceiverArray& rec,
                                   const TraceSet& observed,
                                   const std::vector<Lambda>& lambda, unsigned threads) {
    return misfit_and_gradient(vm, src, cfg, rec, observed, lambda, TimeWindow{}, threads);
}

void write_kernel_csv(const std::vector<KernelResult>& ks, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "r,chi,Kx,Kz,Ktau\n";
    auto fmt = [](double x) {
        char buf[40];
        auto res = std::to_chars(buf, buf + sizeof(buf), x);
        return std::string(buf, res.ptr);
    };
    for (const auto& k : ks)
        os << k.receiver << ',' << fmt(k.chi) << ',' << fmt(k.k_xi[0]) << ','
           << fmt(k.k_xi[1]) << ',' << fmt(k.k_tau) << '\n';
}

} // namespace qwloc
