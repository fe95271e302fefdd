#ifndef QWLOC_SIM_ENGINE_HPP
#define QWLOC_SIM_ENGINE_HPP

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qwloc/wavesim.hpp"

namespace qwloc::detail {

// Staggered first-order form of u_tt = div(c^2 grad u) + f:
//   qx_t + dx qx = c^2 w_x          (qx on x half nodes)
//   qz_t + dz qz = c^2 w_z          (qz on z half nodes)
//   wx_t + dx wx = d/dx qx
//   wz_t + dz wz = d/dz qz + f
// with w = wx + wz = u_t; u is accumulated at tracked nodes only. The grid is
// the physical grid extended by pml_width pads on left/right/bottom; damping
// is zero in the interior, so the interior update is the plain leapfrog of
// the second-order form with harmonic-mean c^2 at half nodes. Boundaries
// without a pad are Neumann mirrors (half-cell flux doubling).

struct SimSetup {
    std::size_t NX = 0, NZ = 0;   // padded grid
    std::size_t npml = 0;
    double h = 0.0, dt = 0.0;
    std::size_t nt = 0;
    int order = 2;
    bool mirror_left = false, mirror_right = false, mirror_bottom = false;

    std::vector<double> ax, az;           // harmonic c^2 at half nodes
    std::vector<double> fq1x, fq2x;       // qx damping factors per half-x
    std::vector<double> fq1z, fq2z;       // qz damping factors per half-z
    std::vector<double> fw1x, fw2x;       // wx damping factors per x
    std::vector<double> fw1z, fw2z;       // wz damping factors per z

    SimSetup(const VelocityModel& vm, const SolverConfig& cfg);

    std::size_t idx(std::size_t ix, std::size_t iz) const { return ix * NZ + iz; }
    // physical km -> padded-grid index coordinate
    double gx(double x) const { return x / h + static_cast<double>(npml); }
    double gz(double z) const { return z / h; }
};

// Source injected into the wz update. Weights are the tensor-product quintic
// delta / h^2, with taps above the free surface folded back by the mirror and
// surface-row taps scaled by the inverse half-cell mass.
struct PointSource {
    std::size_t ix0 = 0, iz0 = 0;            // slice origin in the padded grid
    std::size_t nx = 0, nz = 0;              // stencil extent
    std::vector<double> weights;             // nx * nz, row-major
    std::vector<double> series;              // amplitude at t_{m+1/2}, m = 0..nt-1
};

PointSource make_point_source(const SimSetup& s, double x, double z,
                              std::vector<double> series_half);

struct ProbeSeries {
    std::vector<double> u, ux, uz;  // nt+1 samples each, delta-interpolated at the probe
};

struct RunOutput {
    std::vector<std::vector<double>> receiver_u;  // per receiver, nt+1 samples
    std::optional<WavefieldRecord> record;
    std::vector<double> energy;  // staggered invariant per step, when requested
};

RunOutput run_simulation(const SimSetup& s, const std::vector<PointSource>& sources,
                         const std::vector<std::size_t>& receiver_nodes_physical_ix,
                         std::optional<std::array<double, 2>> probe,
                         bool track_energy = false);

// Delta-weighted interpolation of a WavefieldRecord at its probe point.
ProbeSeries probe_series(const SimSetup& s, const WavefieldRecord& rec);

} // namespace qwloc::detail

#endif
