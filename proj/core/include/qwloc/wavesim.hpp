#ifndef QWLOC_WAVESIM_HPP
#define QWLOC_WAVESIM_HPP

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "qwloc/signal.hpp"
#include "qwloc/trace.hpp"

namespace qwloc {

/// Uniform square grid on [0,(nx-1)h] x [0,(nz-1)h]; z = 0 is the free
/// surface and z increases downward. Units: km.
struct Grid2D {
    std::size_t nx = 0, nz = 0;
    double h = 0.0;

    Grid2D() = default;
    Grid2D(std::size_t nx_, std::size_t nz_, double h_);

    double length_x() const { return h * static_cast<double>(nx - 1); }
    double depth_z() const { return h * static_cast<double>(nz - 1); }
    std::size_t index(std::size_t ix, std::size_t iz) const { return ix * nz + iz; }
};

/// Wave speed c(x,z) on grid nodes, km/s.
struct VelocityModel {
    Grid2D grid;
    std::vector<double> c;  ///< node-major: c[ix*nz + iz]

    double at(std::size_t ix, std::size_t iz) const { return c[grid.index(ix, iz)]; }
    double max_c() const;
};

void validate(const VelocityModel& vm);

/// Layer-over-halfspace crust model with a sinusoidal lateral perturbation,
/// on [0,100] x [0,50] km.
VelocityModel two_layer_model(std::size_t nx, std::size_t nz, double h);

/// Crust / mantle / dipping slab model with an undulating interface,
/// on [0,200] x [0,200] km.
VelocityModel subduction_model(std::size_t nx, std::size_t nz, double h);

VelocityModel explicit_model(Grid2D grid, std::vector<double> c);

/// Point source: position (km), origin time (s), Ricker wavelet.
struct SourceParams {
    double xi_x = 0.0;
    double xi_z = 0.0;
    double tau = 0.0;
    RickerParams wavelet;
};

/// Requires tau >= 0 and the source at least 3h inside the grid.
void validate(const SourceParams& s, const Grid2D& g);

struct SolverConfig {
    double dt = 0.0;            ///< time step, s
    std::size_t nt = 0;         ///< step count; t_f = nt*dt
    double cfl = 0.7;           ///< stability safety factor, <= 0.9
    std::size_t pml_width = 20; ///< absorbing pad width in nodes
    double pml_strength = 0.0;  ///< 1/s; 0 selects the reflection-1e-4 profile
    int stencil_order = 2;      ///< {2|4}

    double t_final() const { return dt * static_cast<double>(nt); }
};

/// Largest stable dt for the model under this config's cfl factor.
double max_stable_dt(const SolverConfig& cfg, const VelocityModel& vm);

/// Throws when dt exceeds cfl*h/(sqrt(2)*max c); the message carries the
/// maximum admissible dt.
void validate(const SolverConfig& cfg, const VelocityModel& vm);

/// Receivers on free-surface nodes; requested positions snap to the nearest
/// node and must be distinct after snapping.
struct ReceiverArray {
    std::vector<double> x_positions;  ///< snapped coordinates, km
    std::vector<std::size_t> nodes;   ///< surface node indices

    static ReceiverArray on_surface(const std::vector<double>& x_requested, const Grid2D& g);
    std::size_t size() const { return nodes.size(); }
};

/// One trace per receiver on a common grid.
struct TraceSet {
    double dt = 0.0;
    std::vector<Trace> traces;

    std::size_t size() const { return traces.size(); }
};

/// Multi-column CSV t,r1..rR.
void write_csv(const TraceSet& ts, const std::string& path);
TraceSet read_traceset_csv(const std::string& path);

/// Quintic discrete delta: weights over integer offsets -3..3 for a point at
/// (node + offset)*h; weights sum to 1 and have vanishing first moment.
std::array<double, 7> discretize_delta(double offset);

/// Per-step field patch around a designated point: u plus its central-difference
/// spatial gradient on a 7x7 node block, recorded every step.
struct WavefieldRecord {
    double probe_x = 0.0, probe_z = 0.0;  ///< designated point, km
    std::size_t n_steps = 0;              ///< samples per node = nt+1
    /// layout: value(step, k, l) = data[step*49 + (k+3)*7 + (l+3)]
    std::vector<double> u, ux, uz;

    double at(const std::vector<double>& field, std::size_t step, int k, int l) const {
        return field[step * 49 + static_cast<std::size_t>(k + 3) * 7 +
                     static_cast<std::size_t>(l + 3)];
    }
};

/// Explicit leapfrog of u_tt = div(c^2 grad u) + R(t-tau) delta(x-xi), zero
/// initial data, Neumann mirror at the free surface, split-field PML pads on
/// the other three sides. Traces are u at the receiver nodes at every step.
TraceSet forward_solve(const VelocityModel& vm, const SourceParams& src,
                       const SolverConfig& cfg, const ReceiverArray& rec);

/// forward_solve that additionally records the 7x7 patch around probe_point.
std::pair<TraceSet, WavefieldRecord> forward_solve_with_storage(
    const VelocityModel& vm, const SourceParams& src, const SolverConfig& cfg,
    const ReceiverArray& rec, std::array<double, 2> probe_point);

} // namespace qwloc

#endif
