#ifndef QWLOC_ADJOINT_HPP
#define QWLOC_ADJOINT_HPP

#include <array>
#include <cstddef>
#include <vector>

#include "qwloc/w2.hpp"
#include "qwloc/wavesim.hpp"

namespace qwloc {

/// Right-hand side of the adjoint wave equation for one receiver:
/// 4 (A(t) - B) s(eta_r, t) at the receiver node.
struct AdjointSource {
    std::size_t receiver = 0;
    Trace trace;
};

/// Per-receiver sensitivity kernels and misfit value.
struct KernelResult {
    std::size_t receiver = 0;
    std::array<double, 2> k_xi{0.0, 0.0};  ///< d chi_r / d (xi_x, xi_z), s^2/km
    double k_tau = 0.0;                    ///< d chi_r / d tau, s^2/s
    double chi = 0.0;
};

/// Adjoint field sampled at the probe point on the forward time grid.
struct AdjointProbe {
    std::size_t receiver = 0;
    std::vector<double> w, wx, wz;  ///< nt+1 samples each
};

/// Gradient of chi_r = d_lambda(d_r, s) with respect to the synthetic s;
/// lambda regularizes the synthetic side per the noisy-misfit definition.
AdjointSource build_adjoint_source(const Trace& s_trace, const Trace& d_trace,
                                   const Lambda& lambda, std::size_t receiver = 0);

/// Solves the adjoint equation backward in time (time-reversed forward solve)
/// with every source injected at its receiver node, recording the field and
/// its spatial gradient at the probe point. One entry per adjoint source.
std::vector<AdjointProbe> adjoint_solve(const VelocityModel& vm, const SolverConfig& cfg,
                                        const ReceiverArray& rec,
                                        const std::vector<AdjointSource>& sources,
                                        std::array<double, 2> xi_probe,
                                        unsigned threads = 0);

/// Single adjoint solve with all sources superposed; test oracle for the
/// per-receiver linearity.
AdjointProbe adjoint_solve_superposed(const VelocityModel& vm, const SolverConfig& cfg,
                                      const ReceiverArray& rec,
                                      const std::vector<AdjointSource>& sources,
                                      std::array<double, 2> xi_probe);

/// K_r^xi = int R(t-tau) grad w_r(xi,t) dt, K_r^tau = -int R'(t-tau) w_r(xi,t) dt.
KernelResult kernels(const SourceParams& src, const AdjointProbe& probe,
                     const SolverConfig& cfg, double chi_r);

/// Everything the optimizer needs at one (xi, tau): total misfit, kernels,
/// residuals r_r = sqrt(chi_r) and Jacobian rows K_r / (2 sqrt(chi_r)) with a
/// zero floor at chi_r < 1e-14.
struct MisfitGradient {
    double chi_total = 0.0;
    std::vector<KernelResult> kernels;
    std::vector<double> residuals;
    std::vector<std::array<double, 3>> jacobian;
    TraceSet synthetic;
};

/// Per-receiver misfit only (one forward solve, no adjoint runs).
struct MisfitOnly {
    double chi_total = 0.0;
    std::vector<double> chi;
    TraceSet synthetic;
};

MisfitOnly misfit_only(const VelocityModel& vm, const SourceParams& src,
                       const SolverConfig& cfg, const ReceiverArray& rec,
                       const TraceSet& observed, const std::vector<Lambda>& lambda);

MisfitGradient misfit_and_gradient(const VelocityModel& vm, const SourceParams& src,
                                   const SolverConfig& cfg, const ReceiverArray& rec,
                                   const TraceSet& observed,
                                   const std::vector<Lambda>& lambda,
                                   unsigned threads = 0);

/// Optional identical crop applied to observed and synthetic traces before
/// the misfit; the gradient is embedded back into the full time grid.
struct TimeWindow {
    double t_begin = 0.0;
    double t_end = 0.0;  ///< 0 means no crop
    bool active() const { return t_end > t_begin; }
};

MisfitOnly misfit_only(const VelocityModel& vm, const SourceParams& src,
                       const SolverConfig& cfg, const ReceiverArray& rec,
                       const TraceSet& observed, const std::vector<Lambda>& lambda,
                       const TimeWindow& window);

MisfitGradient misfit_and_gradient(const VelocityModel& vm, const SourceParams& src,
                                   const SolverConfig& cfg, const ReceiverArray& rec,
                                   const TraceSet& observed,
                                   const std::vector<Lambda>& lambda,
                                   const TimeWindow& window, unsigned threads = 0);

/// misfit_and_gradient on an already-computed synthetic trace set (skips the
/// forward solve).
MisfitGradient assemble_gradient(const VelocityModel& vm, const SourceParams& src,
                                 const SolverConfig& cfg, const ReceiverArray& rec,
                                 const TraceSet& observed, const TraceSet& synthetic,
                                 const std::vector<Lambda>& lambda,
                                 const TimeWindow& window, unsigned threads = 0);

/// Kernel dump per receiver: columns r, chi, Kx, Kz, Ktau.
void write_kernel_csv(const std::vector<KernelResult>& ks, const std::string& path);

} // namespace qwloc

#endif
