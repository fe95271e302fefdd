#include "qwloc/locate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace qwloc {

namespace {

constexpr const char* kNoConvergenceMessage = "The iteration doesn't converges.";

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 normal_matrix(const std::vector<std::array<double, 3>>& J, double nu) {
    Mat3 m{};
    for (const auto& row : J)
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) m[a][b] += row[a] * row[b];
    for (int a = 0; a < 3; ++a) m[a][a] += nu;
    return m;
}

Vec3 jt_r(const std::vector<std::array<double, 3>>& J, const std::vector<double>& r) {
    Vec3 g{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < J.size(); ++i)
        for (int a = 0; a < 3; ++a) g[a] += J[i][a] * r[i];
    return g;
}

// Cholesky solve of the 3x3 SPD system; throws on a non-positive pivot.
Vec3 cholesky_solve(Mat3 m, Vec3 rhs) {
    Mat3 L{};
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b <= a; ++b) {
            double s = m[a][b];
            for (int k = 0; k < b; ++k) s -= L[a][k] * L[b][k];
            if (a == b) {
                if (!(s > 1e-300)) throw std::runtime_error("singular normal equations");
                L[a][a] = std::sqrt(s);
            } else {
                L[a][b] = s / L[b][b];
            }
        }
    }
    Vec3 y{};
    for (int a = 0; a < 3; ++a) {
        double s = rhs[a];
        for (int k = 0; k < a; ++k) s -= L[a][k] * y[k];
        y[a] = s / L[a][a];
    }
    Vec3 x{};
    for (int a = 2; a >= 0; --a) {
        double s = y[a];
        for (int k = a + 1; k < 3; ++k) s -= L[k][a] * x[k];
        x[a] = s / L[a][a];
    }
    return x;
}

double max_diag_jtj(const std::vector<std::array<double, 3>>& J) {
    double m = 0.0;
    for (int a = 0; a < 3; ++a) {
        double d = 0.0;
        for (const auto& row : J) d += row[a] * row[a];
        m = std::max(m, d);
    }
    return m;
}

std::size_t argmin_objective(const std::vector<LmfState>& traj) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < traj.size(); ++k)
        if (traj[k].f_val < traj[best].f_val) best = k;
    return best;
}

} // namespace

double LocateRun::hypocenter_error_km(const Vec3& x) const {
    if (!truth) return std::nan("");
    const double dx = x[0] - (*truth)[0];
    const double dz = x[1] - (*truth)[1];
    return std::hypot(dx, dz);
}

const char* to_string(LocateRun::Status s) {
    switch (s) {
        case LocateRun::Status::converged: return "converged";
        case LocateRun::Status::max_iter: return "max_iter";
        case LocateRun::Status::diverged: return "diverged";
    }
    return "unknown";
}

Vec3 lmf_step(const std::vector<std::array<double, 3>>& J,
              const std::vector<double>& r, double nu) {
    if (nu < 0.0) throw std::invalid_argument("lmf_step needs nu >= 0");
    auto g = jt_r(J, r);
    auto d = cholesky_solve(normal_matrix(J, nu), {-g[0], -g[1], -g[2]});
    return d;
}

double gamma_ratio(double f_old, double f_new,
                   const std::vector<std::array<double, 3>>& J,
                   const std::vector<double>& r, const Vec3& d) {
    // q(0) - q(d) = -d.J^T r - 1/2 |J d|^2
    double jd_sq = 0.0;
    double djtr = 0.0;
    for (std::size_t i = 0; i < J.size(); ++i) {
        const double jd = J[i][0] * d[0] + J[i][1] * d[1] + J[i][2] * d[2];
        jd_sq += jd * jd;
        djtr += jd * r[i];
    }
    const double denom = -djtr - 0.5 * jd_sq;
    if (denom == 0.0) return -1.0;
    return (f_old - f_new) / denom;
}

NuUpdate nu_update(double gamma, double nu, double mu, bool noise_mode, double eta) {
    NuUpdate out;
    const double shrink = std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * gamma - 1.0, 3.0));
    if (!noise_mode) {
        if (gamma > 0.0) {
            out.accept = true;
            out.nu = nu * shrink;
            out.mu = 2.0;
        } else {
            out.accept = false;
            out.nu = mu * nu;
            out.mu = 2.0 * mu;
        }
        return out;
    }
    if (gamma > 0.0 || nu >= eta) {
        out.accept = true;
        out.nu = std::min(eta, nu * shrink);
        out.mu = 2.0;
    } else {
        out.accept = false;
        out.nu = std::min(eta, mu * nu);
        out.mu = 2.0 * mu;
    }
    return out;
}

namespace {

LocateRun run_lmf(LeastSquaresProblem& problem, const Vec3& x0, const LmfConfig& cfg) {
    LocateRun run;
    Vec3 x = x0;
    ProblemEval cur;
    try {
        cur = problem.evaluate(x, true);
    } catch (const std::exception& e) {
        run.status = LocateRun::Status::diverged;
        run.message = std::string("initial evaluation failed: ") + e.what();
        return run;
    }
    run.evaluations = 1;

    double nu = cfg.noise_mode ? cfg.nu0_noise : 1e-6 * max_diag_jtj(cur.jacobian);
    double mu = cfg.mu0;
    std::size_t k = 0;

    auto snapshot = [&]() {
        LmfState st;
        st.x = x;
        st.nu = nu;
        st.mu = mu;
        st.k = k;
        st.f_val = cur.objective;
        st.residuals = cur.residuals;
        st.jacobian = cur.jacobian;
        run.trajectory.push_back(std::move(st));
    };
    snapshot();
    run.log.push_back({0, x, nu, 0.0, cur.objective, true});

    if (cur.objective < cfg.eps) {
        run.status = LocateRun::Status::converged;
        run.k_star = argmin_objective(run.trajectory);
        return run;
    }

    while (true) {
        Vec3 step;
        try {
            step = lmf_step(cur.jacobian, cur.residuals, nu);
        } catch (const std::exception& e) {
            run.status = LocateRun::Status::diverged;
            run.message = e.what();
            break;
        }
        const Vec3 xt{x[0] + step[0], x[1] + step[1], x[2] + step[2]};
        double gamma;
        double ft = std::nan("");
        ProblemEval trial;
        const bool inside = problem.inside_domain(xt);
        if (inside) {
            trial = problem.evaluate(xt, false);
            ++run.evaluations;
            ft = trial.objective;
            gamma = std::isfinite(ft)
                        ? gamma_ratio(cur.objective, ft, cur.jacobian, cur.residuals, step)
                        : -1.0;
        } else {
            gamma = -1.0;  // projected back; the step is rejected
        }
        auto upd = nu_update(gamma, nu, mu, cfg.noise_mode, cfg.eta);
        const bool accept = upd.accept && inside && std::isfinite(ft);
        if (accept) {
            nu = upd.nu;
            mu = upd.mu;
            x = xt;
            cur = problem.evaluate(x, true);  // jacobian at the accepted iterate
            ++k;
            snapshot();
            run.log.push_back({k, x, nu, gamma, cur.objective, true});
            if (cur.objective < cfg.eps) {
                run.status = LocateRun::Status::converged;
                break;
            }
        } else {
            // reject branch regardless of what nu_update proposed
            if (cfg.noise_mode)
                nu = std::min(cfg.eta, mu * nu);
            else
                nu = mu * nu;
            mu = 2.0 * mu;
            run.log.push_back({k, xt, nu, gamma, ft, false});
        }
        if (k > cfg.k_max || (!accept && k >= cfg.k_max)) {
            run.status = LocateRun::Status::max_iter;
            run.message = kNoConvergenceMessage;
            break;
        }
        if (run.evaluations >= cfg.max_evaluations || !std::isfinite(nu)) {
            run.status = LocateRun::Status::max_iter;
            run.message = kNoConvergenceMessage;
            break;
        }
    }
    run.k_star = argmin_objective(run.trajectory);
    return run;
}

} // namespace

LocateRun lmf_locate(LeastSquaresProblem& problem, const Vec3& x0, const LmfConfig& cfg) {
    return run_lmf(problem, x0, cfg);
}

LocateRun lmf_locate_noise(LeastSquaresProblem& problem, const Vec3& x0, LmfConfig cfg) {
    cfg.noise_mode = true;
    return run_lmf(problem, x0, cfg);
}

LocateRun gn_locate(LeastSquaresProblem& problem, const Vec3& x0, const LmfConfig& cfg) {
    LocateRun run;
    Vec3 x = x0;
    ProblemEval cur;
    try {
        cur = problem.evaluate(x, true);
    } catch (const std::exception& e) {
        run.status = LocateRun::Status::diverged;
        run.message = std::string("initial evaluation failed: ") + e.what();
        return run;
    }
    run.evaluations = 1;
    std::size_t k = 0;
    auto snapshot = [&]() {
        LmfState st;
        st.x = x;
        st.k = k;
        st.f_val = cur.objective;
        st.residuals = cur.residuals;
        st.jacobian = cur.jacobian;
        run.trajectory.push_back(std::move(st));
    };
    snapshot();
    run.log.push_back({0, x, 0.0, 0.0, cur.objective, true});
    if (cur.objective < cfg.eps) {
        run.status = LocateRun::Status::converged;
        run.k_star = argmin_objective(run.trajectory);
        return run;
    }
    while (true) {
        Vec3 step;
        try {
            step = lmf_step(cur.jacobian, cur.residuals, 0.0);
        } catch (const std::exception& e) {
            run.status = LocateRun::Status::diverged;
            run.message = e.what();
            break;
        }
        const Vec3 xt{x[0] + step[0], x[1] + step[1], x[2] + step[2]};
        if (!problem.inside_domain(xt)) {
            run.status = LocateRun::Status::diverged;
            run.message = "iterate left the domain";
            break;
        }
        x = xt;
        cur = problem.evaluate(x, true);
        ++run.evaluations;
        ++k;
        snapshot();
        run.log.push_back({k, x, 0.0, 0.0, cur.objective, true});
        if (!std::isfinite(cur.objective)) {
            run.status = LocateRun::Status::diverged;
            run.message = "objective is not finite";
            break;
        }
        if (cur.objective < cfg.eps) {
            run.status = LocateRun::Status::converged;
            break;
        }
        if (k > cfg.k_max) {
            run.status = LocateRun::Status::max_iter;
            run.message = kNoConvergenceMessage;
            break;
        }
    }
    run.k_star = argmin_objective(run.trajectory);
    return run;
}

LocateRun bfgs_locate(LeastSquaresProblem& problem, const Vec3& x0, const LmfConfig& cfg) {
    LocateRun run;
    Vec3 x = x0;
    ProblemEval cur;
    try {
        cur = problem.evaluate(x, true);
    } catch (const std::exception& e) {
        run.status = LocateRun::Status::diverged;
        run.message = std::string("initial evaluation failed: ") + e.what();
        return run;
    }
    run.evaluations = 1;

    // minimize F = sum chi = 2 * objective with gradient 2 J^T r
    auto gradient = [](const ProblemEval& ev) {
        Vec3 g = jt_r(ev.jacobian, ev.residuals);
        for (auto& v : g) v *= 2.0;
        return g;
    };
    Mat3 H{{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}};
    Vec3 g = gradient(cur);
    std::size_t k = 0;
    auto snapshot = [&]() {
        LmfState st;
        st.x = x;
        st.k = k;
        st.f_val = cur.objective;
        st.residuals = cur.residuals;
        st.jacobian = cur.jacobian;
        run.trajectory.push_back(std::move(st));
    };
    snapshot();
    run.log.push_back({0, x, 0.0, 0.0, cur.objective, true});
    if (cur.objective < cfg.eps) {
        run.status = LocateRun::Status::converged;
        run.k_star = argmin_objective(run.trajectory);
        return run;
    }
    while (true) {
        Vec3 p{};
        for (int a = 0; a < 3; ++a)
            p[a] = -(H[a][0] * g[0] + H[a][1] * g[1] + H[a][2] * g[2]);
        double slope = p[0] * g[0] + p[1] * g[1] + p[2] * g[2];
        if (slope >= 0.0) {  // reset on a non-descent direction
            H = {{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}};
            for (int a = 0; a < 3; ++a) p[a] = -g[a];
            slope = -(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
        }
        const double f_old = 2.0 * cur.objective;
        double alpha = 1.0;
        ProblemEval trial;
        Vec3 xt{};
        bool ok = false;
        for (int ls = 0; ls < 30; ++ls) {
            xt = {x[0] + alpha * p[0], x[1] + alpha * p[1], x[2] + alpha * p[2]};
            if (problem.inside_domain(xt)) {
                trial = problem.evaluate(xt, false);
                ++run.evaluations;
                if (std::isfinite(trial.objective) &&
                    2.0 * trial.objective <= f_old + 1e-4 * alpha * slope) {
                    ok = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if (!ok) {
            run.status = LocateRun::Status::diverged;
            run.message = "line search failed";
            break;
        }
        const Vec3 s{xt[0] - x[0], xt[1] - x[1], xt[2] - x[2]};
        x = xt;
        cur = problem.evaluate(x, true);
        ++k;
        Vec3 g_new = gradient(cur);
        const Vec3 y{g_new[0] - g[0], g_new[1] - g[1], g_new[2] - g[2]};
        const double ys = y[0] * s[0] + y[1] * s[1] + y[2] * s[2];
        if (ys > 1e-12) {
            const double rho = 1.0 / ys;
            // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            Mat3 A{};
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b)
                    A[a][b] = (a == b ? 1.0 : 0.0) - rho * s[a] * y[b];
            Mat3 HA{};
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) {
                    double v = 0.0;
                    for (int c2 = 0; c2 < 3; ++c2) v += A[a][c2] * H[c2][b];
                    HA[a][b] = v;
                }
            Mat3 Hn{};
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) {
                    double v = 0.0;
                    for (int c2 = 0; c2 < 3; ++c2) v += HA[a][c2] * A[b][c2];
                    Hn[a][b] = v + rho * s[a] * s[b];
                }
            H = Hn;
        }
        g = g_new;
        snapshot();
        run.log.push_back({k, x, 0.0, 0.0, cur.objective, true});
        if (cur.objective < cfg.eps) {
            run.status = LocateRun::Status::converged;
            break;
        }
        if (k > cfg.k_max) {
            run.status = LocateRun::Status::max_iter;
            run.message = kNoConvergenceMessage;
            break;
        }
        if (run.evaluations >= cfg.max_evaluations) {
            run.status = LocateRun::Status::max_iter;
            run.message = kNoConvergenceMessage;
            break;
        }
    }
    run.k_star = argmin_objective(run.trajectory);
    return run;
}

void write_run_csv(const LocateRun& run, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    auto fmt = [](double v) {
        if (std::isnan(v)) return std::string();
        char buf[40];
        auto res = std::to_chars(buf, buf + sizeof(buf), v);
        return std::string(buf, res.ptr);
    };
    os << "k,xi_x,xi_z,tau,nu,gamma,objective,accepted,hypocenter_error_km\n";
    for (const auto& row : run.log) {
        double err = std::nan("");
        if (run.truth) err = run.hypocenter_error_km(row.x);
        os << row.k << ',' << fmt(row.x[0]) << ',' << fmt(row.x[1]) << ',' << fmt(row.x[2])
           << ',' << fmt(row.nu) << ',' << fmt(row.gamma) << ',' << fmt(row.objective) << ','
           << (row.accepted ? 1 : 0) << ',' << fmt(err) << '\n';
    }
}

} // namespace qwloc
