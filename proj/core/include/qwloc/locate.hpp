#ifndef QWLOC_LOCATE_HPP
#define QWLOC_LOCATE_HPP

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace qwloc {

using Vec3 = std::array<double, 3>;  ///< (xi_x km, xi_z km, tau s)

struct LmfConfig {
    double eps = 0.01;          ///< objective tolerance
    std::size_t k_max = 20;     ///< break-off step
    double mu0 = 2.0;           ///< trust-factor seed
    bool noise_mode = false;
    double nu0_noise = 1e-3;
    double eta = 1e-3;          ///< damping upper limit in noise mode
    std::size_t max_evaluations = 100;  ///< guard on total trial evaluations
};

struct ProblemEval {
    double objective = 0.0;                       ///< 1/2 sum r_i^2
    std::vector<double> residuals;
    std::vector<std::array<double, 3>> jacobian;  ///< filled when requested
    bool has_jacobian = false;
};

/// Least-squares problem over x = (xi_x, xi_z, tau). Wave-backed problems
/// should cache the forward solve so evaluate(x, true) after evaluate(x,
/// false) at the same x reuses the traces.
class LeastSquaresProblem {
public:
    virtual ~LeastSquaresProblem() = default;
    virtual ProblemEval evaluate(const Vec3& x, bool with_jacobian) = 0;
    virtual bool inside_domain(const Vec3&) const { return true; }
    virtual Vec3 clamp_to_domain(const Vec3& x) const { return x; }
};

struct LmfState {
    Vec3 x{};
    double nu = 0.0;
    double mu = 2.0;
    std::size_t k = 0;
    double f_val = 0.0;
    std::vector<double> residuals;
    std::vector<std::array<double, 3>> jacobian;
};

struct IterationLog {
    std::size_t k = 0;
    Vec3 x{};
    double nu = 0.0;
    double gamma = 0.0;
    double objective = 0.0;
    bool accepted = false;
};

struct LocateRun {
    enum class Status { converged, max_iter, diverged };
    Status status = Status::max_iter;
    std::string message;
    std::vector<LmfState> trajectory;  ///< accepted iterates, index = k
    std::vector<IterationLog> log;     ///< every trial evaluation
    std::size_t k_star = 0;            ///< argmin of the recorded objectives
    std::size_t evaluations = 0;
    std::optional<Vec3> truth;

    std::size_t iterations() const { return trajectory.empty() ? 0 : trajectory.back().k; }
    const LmfState& best() const { return trajectory.at(k_star); }
    double hypocenter_error_km(const Vec3& x) const;
};

const char* to_string(LocateRun::Status s);

/// Solves (J^T J + nu I) d = -J^T r for the 3-vector step by Cholesky.
/// Throws "singular normal equations" when the system is singular at nu = 0.
Vec3 lmf_step(const std::vector<std::array<double, 3>>& J,
              const std::vector<double>& r, double nu);

/// gamma = (f_old - f_new) / (q(0) - q(d)) with q(d) = 1/2 |J d + r|^2.
/// A vanishing denominator yields -1 (forces a damping increase).
double gamma_ratio(double f_old, double f_new,
                   const std::vector<std::array<double, 3>>& J,
                   const std::vector<double>& r, const Vec3& d);

struct NuUpdate {
    double nu = 0.0;
    double mu = 2.0;
    bool accept = false;
};

/// Damping update. Noise off: accept iff gamma > 0 with
/// nu *= max{1/3, 1-(2 gamma-1)^3}, otherwise nu *= mu, mu *= 2.
/// Noise on: accept iff gamma > 0 or nu >= eta, capping nu at eta.
NuUpdate nu_update(double gamma, double nu, double mu, bool noise_mode, double eta);

LocateRun lmf_locate(LeastSquaresProblem& problem, const Vec3& x0, const LmfConfig& cfg);
LocateRun lmf_locate_noise(LeastSquaresProblem& problem, const Vec3& x0, LmfConfig cfg);
LocateRun gn_locate(LeastSquaresProblem& problem, const Vec3& x0, const LmfConfig& cfg);
LocateRun bfgs_locate(LeastSquaresProblem& problem, const Vec3& x0, const LmfConfig& cfg);

/// Run log CSV: k, xi_x, xi_z, tau, nu, gamma, objective, accepted,
/// hypocenter_error_km (blank without truth).
void write_run_csv(const LocateRun& run, const std::string& path);

} // namespace qwloc

#endif
