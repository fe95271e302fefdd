#ifndef QWLOC_EXPERIMENTS_HPP
#define QWLOC_EXPERIMENTS_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qwloc/adjoint.hpp"
#include "qwloc/config.hpp"
#include "qwloc/locate.hpp"
#include "qwloc/wavesim.hpp"

namespace qwloc {

/// Everything shared by the experiment drivers, parsed from a config file.
struct ExperimentSetup {
    std::string kind;  ///< landscape | locate | noise-table | compare
    VelocityModel model;
    SourceParams truth;
    ReceiverArray receivers;
    SolverConfig solver;
    Vec3 init{};
    bool has_init = false;

    bool noise_active = false;
    double noise_ratio = 0.0;
    std::size_t noise_segments = 0;  ///< 0 = one draw per sample
    std::string lambda_mode = "auto";
    double lambda_override = 0.0;

    TimeWindow window;
    LmfConfig lmf;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::string output_dir;
    ConfigFile raw;
};

ExperimentSetup load_experiment(const ConfigFile& cf);

/// Wave-equation least-squares problem over (xi_x, xi_z, tau); the forward
/// solve is cached so a jacobian evaluation at the last trial point reuses
/// its traces. Kernel evaluations are appended to kernel_history.
class WaveProblem : public LeastSquaresProblem {
public:
    WaveProblem(const VelocityModel& vm, const SolverConfig& cfg, const ReceiverArray& rec,
                TraceSet observed, std::vector<Lambda> lambda, TimeWindow window,
                RickerParams wavelet, unsigned threads);

    ProblemEval evaluate(const Vec3& x, bool with_jacobian) override;
    bool inside_domain(const Vec3& x) const override;
    Vec3 clamp_to_domain(const Vec3& x) const override;

    struct KernelHistoryEntry {
        std::size_t evaluation = 0;
        Vec3 x{};
        std::vector<KernelResult> kernels;
    };
    const std::vector<KernelHistoryEntry>& kernel_history() const { return history_; }
    std::size_t forward_solves() const { return forward_solves_; }

private:
    const VelocityModel& vm_;
    SolverConfig cfg_;
    ReceiverArray rec_;
    TraceSet observed_;
    std::vector<Lambda> lambda_;
    TimeWindow window_;
    RickerParams wavelet_;
    unsigned threads_;
    std::optional<Vec3> cached_x_;
    TraceSet cached_synth_;
    std::vector<double> cached_chi_;
    std::vector<KernelHistoryEntry> history_;
    std::size_t forward_solves_ = 0;
};

// ---------------------------------------------------------------- landscape

struct LandscapeResult {
    std::vector<double> xs, zs;
    /// psi[metric] in scan order (x outer, z inner); NaN marks a failed node
    std::map<std::string, std::vector<double>> psi;
    std::size_t failures = 0;
    double qwnc_c = 0.0;

    double at(const std::string& metric, std::size_t ix, std::size_t iz) const {
        return psi.at(metric)[ix * zs.size() + iz];
    }
};

/// Strict local minima over the 8-neighborhood (NaN nodes never qualify).
std::vector<std::pair<std::size_t, std::size_t>> local_minima(const LandscapeResult& r,
                                                              const std::string& metric);
std::pair<std::size_t, std::size_t> global_minimum(const LandscapeResult& r,
                                                   const std::string& metric);

LandscapeResult run_landscape(const ExperimentSetup& s);

// ------------------------------------------------------------------- locate

struct LocateResult {
    LocateRun run;
    TraceSet observed;
    std::vector<double> sigma;  ///< per-receiver noise level (empty when clean)
};

LocateResult run_locate(const ExperimentSetup& s);

// -------------------------------------------------------------- noise-table

struct NoiseTableResult {
    std::vector<double> factors;      ///< lambda = factor * lambda_star
    std::vector<std::size_t> counts;  ///< segment counts N
    std::vector<std::vector<double>> mean_d;  ///< [factor][N]
    std::vector<double> mean_l2_sq;           ///< [N], mean integral |f_N-g|^2
    double lambda_star_value = 0.0;
};

NoiseTableResult run_noise_table(const ExperimentSetup& s);

// ------------------------------------------------------------------ compare

enum class ConvergenceClass { correct, divergence, error_convergence };
const char* to_string(ConvergenceClass c);

struct CompareRow {
    std::size_t member = 0;
    std::string method;
    LocateRun::Status status = LocateRun::Status::max_iter;
    std::size_t iterations = 0;
    double error_km = 0.0;
    ConvergenceClass cls = ConvergenceClass::divergence;
};

struct CompareResult {
    std::vector<CompareRow> rows;
    struct MethodSummary {
        std::size_t correct = 0, divergence = 0, error_convergence = 0;
        double mean_iterations = 0.0, stddev_iterations = 0.0;
    };
    std::map<std::string, MethodSummary> summary;
};

CompareResult run_method_compare(const ExperimentSetup& s);

/// Dispatch on setup.kind, writing all outputs under setup.output_dir.
void run_experiment(const ExperimentSetup& s);

/// Deterministic seed derivation for sub-streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

} // namespace qwloc

#endif
