#include "sim_engine.hpp"

#include <algorithm>
#include <cstring>

namespace qwloc::detail {

namespace {

constexpr double kPmlReflectTarget = 1e-4;

double quad_profile(double frac, double d0) { return d0 * frac * frac; }

} // namespace

SimSetup::SimSetup(const VelocityModel& vm, const SolverConfig& cfg) {
    const auto& g = vm.grid;
    npml = cfg.pml_width;
    NX = g.nx + 2 * npml;
    NZ = g.nz + npml;
    h = g.h;
    dt = cfg.dt;
    nt = cfg.nt;
    order = cfg.stencil_order;
    mirror_left = mirror_right = mirror_bottom = (npml == 0);

    // padded c^2, edge-extended into the pads
    std::vector<double> c2(NX * NZ);
    for (std::size_t ix = 0; ix < NX; ++ix) {
        const std::size_t px = std::min(g.nx - 1, static_cast<std::size_t>(std::max<long>(
                                   0, static_cast<long>(ix) - static_cast<long>(npml))));
        for (std::size_t iz = 0; iz < NZ; ++iz) {
            const std::size_t pz = std::min(g.nz - 1, iz);
            const double c = vm.at(px, pz);
            c2[idx(ix, iz)] = c * c;
        }
    }
    ax.resize((NX - 1) * NZ);
    for (std::size_t ix = 0; ix + 1 < NX; ++ix)
        for (std::size_t iz = 0; iz < NZ; ++iz)
            ax[ix * NZ + iz] =
                2.0 / (1.0 / c2[idx(ix, iz)] + 1.0 / c2[idx(ix + 1, iz)]);
    az.resize(NX * (NZ - 1));
    for (std::size_t ix = 0; ix < NX; ++ix)
        for (std::size_t iz = 0; iz + 1 < NZ; ++iz)
            az[ix * (NZ - 1) + iz] =
                2.0 / (1.0 / c2[idx(ix, iz)] + 1.0 / c2[idx(ix, iz + 1)]);

    // quadratic damping profiles over the pads
    const double cmax = vm.max_c();
    const double L = static_cast<double>(npml) * h;
    double d0 = npml == 0 ? 0.0 : 3.0 * cmax * std::log(1.0 / kPmlReflectTarget) / (2.0 * L);
    if (cfg.pml_strength > 0.0) d0 = cfg.pml_strength;
    const double W = static_cast<double>(npml);

    auto dx_at = [&](double xi) {  // xi in padded index units
        if (npml == 0) return 0.0;
        if (xi < W) return quad_profile((W - xi) / W, d0);
        const double rim = static_cast<double>(NX - 1) - W;
        if (xi > rim) return quad_profile((xi - rim) / W, d0);
        return 0.0;
    };
    auto dz_at = [&](double zi) {
        if (npml == 0) return 0.0;
        const double rim = static_cast<double>(NZ - 1) - W;
        if (zi > rim) return quad_profile((zi - rim) / W, d0);
        return 0.0;
    };
    auto factors = [&](double d, double& f1, double& f2) {
        const double a = 0.5 * dt * d;
        f1 = (1.0 - a) / (1.0 + a);
        f2 = dt / ((1.0 + a) * h);
    };
    fq1x.resize(NX - 1); fq2x.resize(NX - 1);
    for (std::size_t i = 0; i + 1 < NX; ++i)
        factors(dx_at(static_cast<double>(i) + 0.5), fq1x[i], fq2x[i]);
    fq1z.resize(NZ - 1); fq2z.resize(NZ - 1);
    for (std::size_t j = 0; j + 1 < NZ; ++j)
        factors(dz_at(static_cast<double>(j) + 0.5), fq1z[j], fq2z[j]);
    fw1x.resize(NX); fw2x.resize(NX);
    for (std::size_t i = 0; i < NX; ++i)
        factors(dx_at(static_cast<double>(i)), fw1x[i], fw2x[i]);
    fw1z.resize(NZ); fw2z.resize(NZ);
    for (std::size_t j = 0; j < NZ; ++j)
        factors(dz_at(static_cast<double>(j)), fw1z[j], fw2z[j]);
}

PointSource make_point_source(const SimSetup& s, double x, double z,
                              std::vector<double> series_half) {
    const double sx = s.gx(x), sz = s.gz(z);
    const long i0 = static_cast<long>(std::floor(sx));
    const long j0 = static_cast<long>(std::floor(sz));
    const auto wx = discretize_delta(sx - static_cast<double>(i0));
    const auto wz = discretize_delta(sz - static_cast<double>(j0));

    const long xlo = i0 - 3, xhi = i0 + 3;
    if (xlo < 0 || xhi >= static_cast<long>(s.NX))
        throw std::invalid_argument("source stencil leaves the grid in x");
    long zlo = j0 - 3, zhi = j0 + 3;
    if (zhi >= static_cast<long>(s.NZ))
        throw std::invalid_argument("source stencil leaves the grid in z");

    PointSource ps;
    ps.series = std::move(series_half);
    ps.ix0 = static_cast<std::size_t>(xlo);
    ps.nx = 7;
    const double inv_h2 = 1.0 / (s.h * s.h);
    if (zlo < 0) {
        // fold taps above the free surface onto their mirror nodes
        ps.iz0 = 0;
        ps.nz = static_cast<std::size_t>(zhi + 1);
        ps.weights.assign(ps.nx * ps.nz, 0.0);
        for (int k = 0; k < 7; ++k)
            for (int l = 0; l < 7; ++l) {
                long zz = zlo + l;
                if (zz < 0) zz = -zz;
                ps.weights[static_cast<std::size_t>(k) * ps.nz + static_cast<std::size_t>(zz)] +=
                    wx[static_cast<std::size_t>(k)] * wz[static_cast<std::size_t>(l)] * inv_h2;
            }
        for (int k = 0; k < 7; ++k) ps.weights[static_cast<std::size_t>(k) * ps.nz] *= 2.0;
    } else {
        ps.iz0 = static_cast<std::size_t>(zlo);
        ps.nz = 7;
        ps.weights.assign(49, 0.0);
        for (int k = 0; k < 7; ++k)
            for (int l = 0; l < 7; ++l)
                ps.weights[static_cast<std::size_t>(k) * 7 + static_cast<std::size_t>(l)] =
                    wx[static_cast<std::size_t>(k)] * wz[static_cast<std::size_t>(l)] * inv_h2;
    }
    return ps;
}

namespace {

// gather u on a (7+2)x(7+2) block around the patch center with mirror rows
// above the free surface; then form 7x7 u/ux/uz patches
struct PatchTracker {
    long pc = 0, pj = 0;  // center node, padded grid
    std::vector<std::size_t> gather_idx;   // 9x9 source indices (mirrored)
    std::vector<double> u9;                // accumulated u on the 9x9 block

    PatchTracker(const SimSetup& s, double x, double z) {
        const double px = s.gx(x), pz = s.gz(z);
        pc = std::lround(px);
        pj = std::lround(pz);
        if (pc - 4 < 0 || pc + 4 >= static_cast<long>(s.NX) || pj + 4 >= static_cast<long>(s.NZ))
            throw std::invalid_argument("probe patch leaves the grid");
        gather_idx.resize(81);
        for (int k = -4; k <= 4; ++k)
            for (int l = -4; l <= 4; ++l) {
                long zz = pj + l;
                if (zz < 0) zz = -zz;  // mirror above the surface
                gather_idx[static_cast<std::size_t>(k + 4) * 9 +
                           static_cast<std::size_t>(l + 4)] =
                    s.idx(static_cast<std::size_t>(pc + k), static_cast<std::size_t>(zz));
            }
        u9.assign(81, 0.0);
    }
};

} // namespace

RunOutput run_simulation(const SimSetup& s, const std::vector<PointSource>& sources,
                         const std::vector<std::size_t>& receiver_nodes_physical_ix,
                         std::optional<std::array<double, 2>> probe,
                         bool track_energy) {
    const std::size_t NX = s.NX, NZ = s.NZ, nt = s.nt;
    const double h = s.h, dt = s.dt;
    std::vector<double> wx(NX * NZ, 0.0), wz(NX * NZ, 0.0), w(NX * NZ, 0.0);
    std::vector<double> qx((NX - 1) * NZ, 0.0), qz(NX * (NZ - 1), 0.0);
    std::vector<double> qx_prev, qz_prev;
    if (track_energy) {
        qx_prev.assign(qx.size(), 0.0);
        qz_prev.assign(qz.size(), 0.0);
    }

    RunOutput out;
    out.receiver_u.assign(receiver_nodes_physical_ix.size(),
                          std::vector<double>(nt + 1, 0.0));
    std::vector<std::size_t> rec_idx(receiver_nodes_physical_ix.size());
    for (std::size_t r = 0; r < rec_idx.size(); ++r)
        rec_idx[r] = s.idx(receiver_nodes_physical_ix[r] + s.npml, 0);
    std::vector<double> rec_u(rec_idx.size(), 0.0);

    std::optional<PatchTracker> patch;
    if (probe) {
        patch.emplace(s, (*probe)[0], (*probe)[1]);
        out.record.emplace();
        out.record->probe_x = (*probe)[0];
        out.record->probe_z = (*probe)[1];
        out.record->n_steps = nt + 1;
        out.record->u.assign((nt + 1) * 49, 0.0);
        out.record->ux.assign((nt + 1) * 49, 0.0);
        out.record->uz.assign((nt + 1) * 49, 0.0);
    }

    const bool fourth = (s.order == 4);
    const double A4 = 9.0 / 8.0, B4 = 1.0 / 24.0;

    auto emit_patch = [&](std::size_t step) {
        auto& rec = *out.record;
        const auto& u9 = patch->u9;
        const double inv2h = 0.5 / h;
        for (int k = -3; k <= 3; ++k)
            for (int l = -3; l <= 3; ++l) {
                const std::size_t r9 = static_cast<std::size_t>(k + 4) * 9 +
                                       static_cast<std::size_t>(l + 4);
                const std::size_t r7 = step * 49 + static_cast<std::size_t>(k + 3) * 7 +
                                       static_cast<std::size_t>(l + 3);
                rec.u[r7] = u9[r9];
                rec.ux[r7] = (u9[r9 + 9] - u9[r9 - 9]) * inv2h;
                rec.uz[r7] = (u9[r9 + 1] - u9[r9 - 1]) * inv2h;
            }
    };
    if (patch) emit_patch(0);

    for (std::size_t m = 0; m < nt; ++m) {
        if (track_energy) {
            qx_prev = qx;
            qz_prev = qz;
        }
        // q updates from w = wx + wz
        for (std::size_t ix = 0; ix + 1 < NX; ++ix) {
            const double f1 = s.fq1x[ix], f2 = s.fq2x[ix];
            const double* w0 = &w[ix * NZ];
            const double* w1 = &w[(ix + 1) * NZ];
            double* q = &qx[ix * NZ];
            const double* a = &s.ax[ix * NZ];
            if (fourth && ix >= 1 && ix + 2 < NX) {
                const double* wm = &w[(ix - 1) * NZ];
                const double* w2 = &w[(ix + 2) * NZ];
                for (std::size_t iz = 0; iz < NZ; ++iz)
                    q[iz] = f1 * q[iz] +
                            f2 * a[iz] * (A4 * (w1[iz] - w0[iz]) - B4 * (w2[iz] - wm[iz]));
            } else {
                for (std::size_t iz = 0; iz < NZ; ++iz)
                    q[iz] = f1 * q[iz] + f2 * a[iz] * (w1[iz] - w0[iz]);
            }
        }
        for (std::size_t ix = 0; ix < NX; ++ix) {
            const double* wc = &w[ix * NZ];
            double* q = &qz[ix * (NZ - 1)];
            const double* a = &s.az[ix * (NZ - 1)];
            for (std::size_t iz = 0; iz + 1 < NZ; ++iz) {
                const double f1 = s.fq1z[iz], f2 = s.fq2z[iz];
                if (fourth && iz >= 1 && iz + 2 < NZ)
                    q[iz] = f1 * q[iz] +
                            f2 * a[iz] * (A4 * (wc[iz + 1] - wc[iz]) - B4 * (wc[iz + 2] - wc[iz - 1]));
                else
                    q[iz] = f1 * q[iz] + f2 * a[iz] * (wc[iz + 1] - wc[iz]);
            }
        }

        if (track_energy) {
            // staggered invariant: 1/2 w V w + 1/2 q_prev W A^-1 q, finite-volume
            // weights (1/2 on boundary cells and tangential boundary edges)
            double E = 0.0;
            for (std::size_t ix = 0; ix < NX; ++ix)
                for (std::size_t iz = 0; iz < NZ; ++iz) {
                    double mass = 1.0;
                    if (ix == 0 || ix == NX - 1) mass *= 0.5;
                    if (iz == 0 || iz == NZ - 1) mass *= 0.5;
                    const double v = w[s.idx(ix, iz)];
                    E += 0.5 * mass * v * v;
                }
            for (std::size_t ix = 0; ix + 1 < NX; ++ix)
                for (std::size_t iz = 0; iz < NZ; ++iz) {
                    const double wt = (iz == 0 || iz == NZ - 1) ? 0.5 : 1.0;
                    const std::size_t i = ix * NZ + iz;
                    E += 0.5 * wt * qx_prev[i] * qx[i] / s.ax[i];
                }
            for (std::size_t ix = 0; ix < NX; ++ix)
                for (std::size_t iz = 0; iz + 1 < NZ; ++iz) {
                    const double wt = (ix == 0 || ix == NX - 1) ? 0.5 : 1.0;
                    const std::size_t i = ix * (NZ - 1) + iz;
                    E += 0.5 * wt * qz_prev[i] * qz[i] / s.az[i];
                }
            out.energy.push_back(E);
        }

        // w updates from the flux divergence
        for (std::size_t ix = 0; ix < NX; ++ix) {
            double* wxr = &wx[ix * NZ];
            double* wzr = &wz[ix * NZ];
            const double f1x = s.fw1x[ix], f2x = s.fw2x[ix];
            // x part
            if (ix == 0) {
                const double edge = s.mirror_left ? 2.0 : 1.0;
                for (std::size_t iz = 0; iz < NZ; ++iz)
                    wxr[iz] = f1x * wxr[iz] + f2x * edge * qx[iz];
            } else if (ix == NX - 1) {
                const double edge = s.mirror_right ? 2.0 : 1.0;
                const double* qm = &qx[(ix - 1) * NZ];
                for (std::size_t iz = 0; iz < NZ; ++iz)
                    wxr[iz] = f1x * wxr[iz] - f2x * edge * qm[iz];
            } else if (fourth && ix >= 2 && ix + 2 < NX) {
                const double* qm2 = &qx[(ix - 2) * NZ];
                const double* qm1 = &qx[(ix - 1) * NZ];
                const double* qp0 = &qx[ix * NZ];
                const double* qp1 = &qx[(ix + 1) * NZ];
                for (std::size_t iz = 0; iz < NZ; ++iz)
                    wxr[iz] = f1x * wxr[iz] +
                              f2x * (A4 * (qp0[iz] - qm1[iz]) - B4 * (qp1[iz] - qm2[iz]));
            } else {
                const double* qm = &qx[(ix - 1) * NZ];
                const double* qp = &qx[ix * NZ];
                for (std::size_t iz = 0; iz < NZ; ++iz)
                    wxr[iz] = f1x * wxr[iz] + f2x * (qp[iz] - qm[iz]);
            }
            // z part; free surface at iz=0 is always a mirror
            const double* q = &qz[ix * (NZ - 1)];
            wzr[0] = s.fw1z[0] * wzr[0] + s.fw2z[0] * 2.0 * q[0];
            for (std::size_t iz = 1; iz + 1 < NZ; ++iz) {
                if (fourth && iz >= 2 && iz + 2 < NZ)
                    wzr[iz] = s.fw1z[iz] * wzr[iz] +
                              s.fw2z[iz] * (A4 * (q[iz] - q[iz - 1]) - B4 * (q[iz + 1] - q[iz - 2]));
                else
                    wzr[iz] = s.fw1z[iz] * wzr[iz] + s.fw2z[iz] * (q[iz] - q[iz - 1]);
            }
            const double edge = s.mirror_bottom ? 2.0 : 1.0;
            wzr[NZ - 1] = s.fw1z[NZ - 1] * wzr[NZ - 1] - s.fw2z[NZ - 1] * edge * q[NZ - 2];
        }

        // sources at t_{m+1/2}
        for (const auto& src : sources) {
            const double amp = src.series[m];
            if (amp == 0.0) continue;
            for (std::size_t k = 0; k < src.nx; ++k) {
                double* row = &wz[(src.ix0 + k) * NZ + src.iz0];
                const double* wrow = &src.weights[k * src.nz];
                for (std::size_t l = 0; l < src.nz; ++l) row[l] += dt * amp * wrow[l];
            }
        }

        // trapezoid accumulation of u at tracked nodes
        for (std::size_t r = 0; r < rec_idx.size(); ++r) {
            const std::size_t i = rec_idx[r];
            const double wnew = wx[i] + wz[i];
            rec_u[r] += 0.5 * dt * (w[i] + wnew);
            out.receiver_u[r][m + 1] = rec_u[r];
        }
        if (patch) {
            auto& u9 = patch->u9;
            for (std::size_t p = 0; p < 81; ++p) {
                const std::size_t i = patch->gather_idx[p];
                const double wnew = wx[i] + wz[i];
                u9[p] += 0.5 * dt * (w[i] + wnew);
            }
        }
        // refresh w = wx + wz
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = wx[i] + wz[i];
        if (patch) emit_patch(m + 1);

        if ((m & 63) == 63) {
            double probe_val = w[s.idx(NX / 2, NZ / 2)];
            if (!std::isfinite(probe_val))
                throw std::runtime_error("solver produced NaN at step " + std::to_string(m));
        }
    }
    // full-field NaN sweep at the end
    for (double v : w)
        if (!std::isfinite(v))
            throw std::runtime_error("solver produced NaN at step " + std::to_string(nt));
    return out;
}

ProbeSeries probe_series(const SimSetup& s, const WavefieldRecord& rec) {
    const double px = s.gx(rec.probe_x), pz = s.gz(rec.probe_z);
    const long pc = std::lround(px), pj = std::lround(pz);
    const auto wx = discretize_delta(px - static_cast<double>(pc));
    const auto wz = discretize_delta(pz - static_cast<double>(pj));
    ProbeSeries out;
    const std::size_t ns = rec.n_steps;
    out.u.assign(ns, 0.0);
    out.ux.assign(ns, 0.0);
    out.uz.assign(ns, 0.0);
    for (std::size_t step = 0; step < ns; ++step)
        for (int k = -3; k <= 3; ++k) {
            const double wk = wx[static_cast<std::size_t>(k + 3)];
            if (wk == 0.0) continue;
            for (int l = -3; l <= 3; ++l) {
                const double wgt = wk * wz[static_cast<std::size_t>(l + 3)];
                out.u[step] += wgt * rec.at(rec.u, step, k, l);
                out.ux[step] += wgt * rec.at(rec.ux, step, k, l);
                out.uz[step] += wgt * rec.at(rec.uz, step, k, l);
            }
        }
    return out;
}

} // namespace qwloc::detail
