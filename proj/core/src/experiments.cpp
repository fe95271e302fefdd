#include "qwloc/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "qwloc/altmetrics.hpp"
#include "qwloc/parallel.hpp"

namespace qwloc {

namespace {

std::string fmt(double x) {
    if (std::isnan(x)) return "nan";
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

std::ofstream open_out(const std::string& dir, const std::string& name) {
    std::filesystem::create_directories(dir);
    const auto path = std::filesystem::path(dir) / name;
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
    return os;
}

} // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b,
                          std::uint64_t c) {
    // splitmix64 over a mixed stream id
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (a + 1) +
                      0xbf58476d1ce4e5b9ULL * (b + 1) + 0x94d049bb133111ebULL * (c + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

ExperimentSetup load_experiment(const ConfigFile& cf) {
    ExperimentSetup s;
    s.raw = cf;
    s.kind = cf.get_string("experiment", "kind");
    s.seed = cf.get_uint("experiment", "seed", 0);
    s.threads = static_cast<unsigned>(cf.get_int("experiment", "threads", 0));
    s.output_dir = cf.get_string("experiment", "output", "");

    const auto nx = static_cast<std::size_t>(cf.get_int("grid", "nx"));
    const auto nz = static_cast<std::size_t>(cf.get_int("grid", "nz"));
    const double h = cf.get_double("grid", "h");

    const std::string medium = cf.get_string("medium", "kind");
    if (medium == "two_layer") {
        s.model = two_layer_model(nx, nz, h);
    } else if (medium == "subduction") {
        s.model = subduction_model(nx, nz, h);
    } else if (medium == "file") {
        const auto path = cf.get_string("medium", "file");
        std::ifstream is(path);
        if (!is) throw ConfigError("cannot open velocity file: " + path);
        std::vector<double> c;
        double v;
        while (is >> v) c.push_back(v);
        s.model = explicit_model(Grid2D(nx, nz, h), std::move(c));
    } else {
        throw ConfigError("unknown medium kind: " + medium);
    }

    s.truth.xi_x = cf.get_double("source", "x");
    s.truth.xi_z = cf.get_double("source", "z");
    s.truth.tau = cf.get_double("source", "tau");
    s.truth.wavelet.amp = cf.get_double("source", "amp", 1.0);
    s.truth.wavelet.f0 = cf.get_double("source", "f0", 2.0);

    s.receivers = ReceiverArray::on_surface(cf.get_list("receivers", "x"), s.model.grid);

    s.solver.dt = cf.get_double("solver", "dt");
    s.solver.nt = static_cast<std::size_t>(cf.get_int("solver", "nt"));
    s.solver.cfl = cf.get_double("solver", "cfl", 0.7);
    s.solver.pml_width = static_cast<std::size_t>(cf.get_int("solver", "pml_width", 20));
    s.solver.pml_strength = cf.get_double("solver", "pml_strength", 0.0);
    s.solver.stencil_order = static_cast<int>(cf.get_int("solver", "stencil_order", 2));

    if (cf.has_section("init")) {
        s.init = {cf.get_double("init", "x"), cf.get_double("init", "z"),
                  cf.get_double("init", "tau")};
        s.has_init = true;
    }

    if (cf.has_section("noise")) {
        s.noise_active = cf.get_double("noise", "ratio", 0.0) > 0.0;
        s.noise_ratio = cf.get_double("noise", "ratio", 0.0);
        s.noise_segments = static_cast<std::size_t>(cf.get_int("noise", "segments", 0));
        s.lambda_mode = cf.get_string("noise", "lambda", "auto");
        if (s.lambda_mode != "auto") {
            try {
                s.lambda_override = std::stod(s.lambda_mode);
            } catch (const std::exception&) {
                throw ConfigError("noise.lambda must be 'auto' or a number");
            }
            s.lambda_mode = "override";
        }
    }

    if (cf.has_section("window")) {
        s.window.t_begin = cf.get_double("window", "t_begin", 0.0);
        s.window.t_end = cf.get_double("window", "t_end", 0.0);
    }

    s.lmf.eps = cf.get_double("lmf", "eps", 0.01);
    s.lmf.k_max = static_cast<std::size_t>(cf.get_int("lmf", "k_max", 20));
    s.lmf.eta = cf.get_double("lmf", "eta", 1e-3);
    s.lmf.nu0_noise = cf.get_double("lmf", "nu0_noise", 1e-3);
    s.lmf.max_evaluations = static_cast<std::size_t>(cf.get_int("lmf", "max_evaluations", 100));

    validate(s.model);
    validate(s.truth, s.model.grid);
    validate(s.solver, s.model);
    return s;
}

// ------------------------------------------------------------- WaveProblem

WaveProblem::WaveProblem(const VelocityModel& vm, const SolverConfig& cfg,
                         const ReceiverArray& rec, TraceSet observed,
                         std::vector<Lambda> lambda, TimeWindow window,
                         RickerParams wavelet, unsigned threads)
    : vm_(vm), cfg_(cfg), rec_(rec), observed_(std::move(observed)),
      lambda_(std::move(lambda)), window_(window), wavelet_(wavelet), threads_(threads) {}

bool WaveProblem::inside_domain(const Vec3& x) const {
    const auto& g = vm_.grid;
    const double m = 3.0 * g.h;
    return x[0] >= m && x[0] <= g.length_x() - m && x[1] >= m && x[1] <= g.depth_z() - m &&
           x[2] >= 0.0 && x[2] <= 0.9 * cfg_.t_final();
}

Vec3 WaveProblem::clamp_to_domain(const Vec3& x) const {
    const auto& g = vm_.grid;
    const double m = 3.0 * g.h;
    return {std::clamp(x[0], m, g.length_x() - m), std::clamp(x[1], m, g.depth_z() - m),
            std::clamp(x[2], 0.0, 0.9 * cfg_.t_final())};
}

ProblemEval WaveProblem::evaluate(const Vec3& x, bool with_jacobian) {
    SourceParams src;
    src.xi_x = x[0];
    src.xi_z = x[1];
    src.tau = x[2];
    src.wavelet = wavelet_;

    if (!cached_x_ || (*cached_x_)[0] != x[0] || (*cached_x_)[1] != x[1] ||
        (*cached_x_)[2] != x[2]) {
        auto m = misfit_only(vm_, src, cfg_, rec_, observed_, lambda_, window_);
        cached_synth_ = std::move(m.synthetic);
        cached_chi_ = std::move(m.chi);
        cached_x_ = x;
        ++forward_solves_;
    }

    ProblemEval out;
    out.residuals.resize(rec_.size());
    for (std::size_t r = 0; r < rec_.size(); ++r) {
        out.residuals[r] = cached_chi_[r] < 1e-14 ? 0.0 : std::sqrt(cached_chi_[r]);
        out.objective += 0.5 * cached_chi_[r];
    }
    if (with_jacobian) {
        auto mg = assemble_gradient(vm_, src, cfg_, rec_, observed_, cached_synth_, lambda_,
                                    window_, threads_);
        out.jacobian = std::move(mg.jacobian);
        out.residuals = std::move(mg.residuals);
        out.has_jacobian = true;
        history_.push_back({history_.size(), x, std::move(mg.kernels)});
    }
    return out;
}

// -------------------------------------------------------------- landscape

std::vector<std::pair<std::size_t, std::size_t>> local_minima(const LandscapeResult& r,
                                                              const std::string& metric) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    const auto& v = r.psi.at(metric);
    const std::size_t nxs = r.xs.size(), nzs = r.zs.size();
    for (std::size_t i = 0; i < nxs; ++i)
        for (std::size_t j = 0; j < nzs; ++j) {
            const double c = v[i * nzs + j];
            if (std::isnan(c)) continue;
            bool strict = true;
            for (int di = -1; di <= 1 && strict; ++di)
                for (int dj = -1; dj <= 1 && strict; ++dj) {
                    if (di == 0 && dj == 0) continue;
                    const long ii = static_cast<long>(i) + di;
                    const long jj = static_cast<long>(j) + dj;
                    if (ii < 0 || jj < 0 || ii >= static_cast<long>(nxs) ||
                        jj >= static_cast<long>(nzs))
                        continue;
                    const double nb = v[static_cast<std::size_t>(ii) * nzs +
                                        static_cast<std::size_t>(jj)];
                    if (!(c < nb)) strict = false;
                }
            if (strict) out.emplace_back(i, j);
        }
    return out;
}

std::pair<std::size_t, std::size_t> global_minimum(const LandscapeResult& r,
                                                   const std::string& metric) {
    const auto& v = r.psi.at(metric);
    const std::size_t nzs = r.zs.size();
    std::size_t best = 0;
    double bestv = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < v.size(); ++k)
        if (!std::isnan(v[k]) && v[k] < bestv) {
            bestv = v[k];
            best = k;
        }
    return {best / nzs, best % nzs};
}

namespace {

std::vector<std::string> scan_metrics(const ExperimentSetup& s) {
    const std::string m = s.raw.get_string("scan", "metric", "qwn2");
    if (m == "all") return {"qwn2", "rld", "qwnc", "krn"};
    std::vector<std::string> out;
    std::stringstream ss(m);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        cell.erase(std::remove_if(cell.begin(), cell.end(), ::isspace), cell.end());
        if (cell.empty()) continue;
        if (cell != "qwn2" && cell != "rld" && cell != "qwnc" && cell != "krn")
            throw ConfigError("unknown scan metric: " + cell);
        out.push_back(cell);
    }
    if (out.empty()) throw ConfigError("scan.metric is empty");
    return out;
}

void write_metadata(const ExperimentSetup& s, const std::string& extra) {
    if (s.output_dir.empty()) return;
    auto os = open_out(s.output_dir, "run_metadata.txt");
    os << "kind: " << s.kind << "\n"
       << "seed: " << s.seed << "\n"
       << "grid: nx=" << s.model.grid.nx << " nz=" << s.model.grid.nz
       << " h_km=" << fmt(s.model.grid.h) << "\n"
       << "solver: dt_s=" << fmt(s.solver.dt) << " nt=" << s.solver.nt
       << " cfl=" << fmt(s.solver.cfl) << " stencil_order=" << s.solver.stencil_order << "\n"
       << "pml: width_nodes=" << s.solver.pml_width
       << " strength=" << (s.solver.pml_strength > 0 ? fmt(s.solver.pml_strength)
                                                     : std::string("auto(R0=1e-4,quadratic)"))
       << "\n"
       << "quadrature: trapezoid on the sample grid\n"
       << "w2: exact quantile integral of the trapezoid-weighted atomic measures\n"
       << "gradient: transport dual potential, 4(A-B)f\n"
       << "residuals: r_r = sqrt(chi_r), jacobian rows K_r/(2 sqrt(chi_r)), floor 1e-14\n"
       << "lambda placement: synthetic side (g^2+lambda)\n"
       << "window: "
       << (s.window.active()
               ? ("[" + fmt(s.window.t_begin) + ", " + fmt(s.window.t_end) + "] s")
               : std::string("none"))
       << "\n";
    if (!extra.empty()) os << extra;
}

} // namespace

LandscapeResult run_landscape(const ExperimentSetup& s) {
    const double x0 = s.raw.get_double("scan", "x_begin");
    const double x1 = s.raw.get_double("scan", "x_end");
    const double z0 = s.raw.get_double("scan", "z_begin");
    const double z1 = s.raw.get_double("scan", "z_end");
    const double step = s.raw.get_double("scan", "step");
    if (!(step > 0.0) || x1 < x0 || z1 < z0) throw ConfigError("bad scan ranges");
    const auto metrics = scan_metrics(s);

    LandscapeResult res;
    for (double x = x0; x <= x1 + 1e-9; x += step) res.xs.push_back(x);
    for (double z = z0; z <= z1 + 1e-9; z += step) res.zs.push_back(z);

    const TraceSet observed = forward_solve(s.model, s.truth, s.solver, s.receivers);

    double c_shift = s.raw.get_double("scan", "qwnc_c", 0.0);
    if (c_shift <= 0.0) {
        double peak = 0.0;
        for (const auto& tr : observed.traces)
            for (double v : tr.samples) peak = std::max(peak, std::abs(v));
        c_shift = 2.0 * peak;
    }
    res.qwnc_c = c_shift;

    const std::size_t total = res.xs.size() * res.zs.size();
    for (const auto& m : metrics)
        res.psi[m].assign(total, std::numeric_limits<double>::quiet_NaN());
    std::vector<char> failed(total, 0);

    parallel_for(total, s.threads, [&](std::size_t node) {
        const std::size_t ix = node / res.zs.size();
        const std::size_t iz = node % res.zs.size();
        SourceParams trial = s.truth;
        trial.xi_x = res.xs[ix];
        trial.xi_z = res.zs[iz];
        try {
            const TraceSet synth = forward_solve(s.model, trial, s.solver, s.receivers);
            for (const auto& m : metrics) {
                double psi = 0.0;
                for (std::size_t r = 0; r < s.receivers.size(); ++r) {
                    const auto& d = observed.traces[r];
                    const auto& sy = synth.traces[r];
                    if (m == "qwn2") psi += misfit_distance(d, sy);
                    else if (m == "rld") psi += rld(d, sy);
                    else if (m == "qwnc") psi += qwn_c(d, sy, c_shift);
                    else psi += krn(d, sy).objective;
                }
                res.psi[m][node] = psi;
            }
        } catch (const std::exception&) {
            failed[node] = 1;
        }
    });
    for (char f : failed) res.failures += f;

    if (!s.output_dir.empty()) {
        for (const auto& m : metrics) {
            auto os = open_out(s.output_dir, "landscape_" + m + ".csv");
            os << "x,z,psi\n";
            for (std::size_t ix = 0; ix < res.xs.size(); ++ix)
                for (std::size_t iz = 0; iz < res.zs.size(); ++iz)
                    os << fmt(res.xs[ix]) << ',' << fmt(res.zs[iz]) << ','
                       << fmt(res.psi[m][ix * res.zs.size() + iz]) << '\n';
        }
        std::ostringstream extra;
        extra << "scan: x=[" << fmt(x0) << "," << fmt(x1) << "] z=[" << fmt(z0) << ","
              << fmt(z1) << "] step=" << fmt(step) << "\n"
              << "qwnc_c: " << fmt(c_shift) << "\n"
              << "failed_nodes: " << res.failures << "\n";
        write_metadata(s, extra.str());
    }
    return res;
}

// ----------------------------------------------------------------- locate

namespace {

struct NoisyObservation {
    TraceSet observed;
    std::vector<double> sigma;
    std::vector<Lambda> lambda;
};

NoisyObservation make_observation(const ExperimentSetup& s, const TraceSet& clean) {
    NoisyObservation out;
    out.observed = clean;
    if (!s.noise_active) return out;
    out.sigma.resize(clean.size());
    out.lambda.resize(clean.size());
    for (std::size_t r = 0; r < clean.size(); ++r) {
        double peak = 0.0;
        for (double v : clean.traces[r].samples) peak = std::max(peak, std::abs(v));
        const double sigma = s.noise_ratio * peak;
        out.sigma[r] = sigma;
        const std::size_t n = clean.traces[r].size();
        const std::size_t segments = s.noise_segments == 0 ? n : s.noise_segments;
        const auto spec =
            NoiseSpec::normal(0.0, sigma, segments, derive_seed(s.seed, 0xA11CE, r));
        out.observed.traces[r] = inject_noise(clean.traces[r], spec);
        out.lambda[r] =
            s.lambda_mode == "auto" ? Lambda(sigma * sigma) : Lambda(s.lambda_override);
    }
    return out;
}

} // namespace

LocateResult run_locate(const ExperimentSetup& s) {
    if (!s.has_init) throw ConfigError("locate experiment needs an [init] section");
    const TraceSet clean = forward_solve(s.model, s.truth, s.solver, s.receivers);
    auto obs = make_observation(s, clean);

    WaveProblem problem(s.model, s.solver, s.receivers, obs.observed, obs.lambda, s.window,
                        s.truth.wavelet, s.threads);
    LmfConfig cfg = s.lmf;
    LocateRun run = s.noise_active ? lmf_locate_noise(problem, s.init, cfg)
                                   : lmf_locate(problem, s.init, cfg);
    run.truth = Vec3{s.truth.xi_x, s.truth.xi_z, s.truth.tau};

    if (!s.output_dir.empty()) {
        write_run_csv(run, (std::filesystem::path(s.output_dir) / "trajectory.csv").string());
        {
            auto os = open_out(s.output_dir, "kernels.csv");
            os << "evaluation,r,chi,Kx,Kz,Ktau\n";
            for (const auto& e : problem.kernel_history())
                for (const auto& k : e.kernels)
                    os << e.evaluation << ',' << k.receiver << ',' << fmt(k.chi) << ','
                       << fmt(k.k_xi[0]) << ',' << fmt(k.k_xi[1]) << ',' << fmt(k.k_tau)
                       << '\n';
        }
        {
            auto os = open_out(s.output_dir, "summary.txt");
            const auto& best = run.best();
            const auto& fin = run.trajectory.back();
            os << "status: " << to_string(run.status) << "\n";
            if (!run.message.empty()) os << "message: " << run.message << "\n";
            os << "iterations: " << run.iterations() << "\n"
               << "evaluations: " << run.evaluations << "\n"
               << "k_star: " << run.k_star << "\n"
               << "final: xi_x=" << fmt(fin.x[0]) << " xi_z=" << fmt(fin.x[1])
               << " tau=" << fmt(fin.x[2]) << " objective=" << fmt(fin.f_val) << "\n"
               << "best: xi_x=" << fmt(best.x[0]) << " xi_z=" << fmt(best.x[1])
               << " tau=" << fmt(best.x[2]) << " objective=" << fmt(best.f_val) << "\n"
               << "final_error_km: " << fmt(run.hypocenter_error_km(fin.x)) << "\n"
               << "best_error_km: " << fmt(run.hypocenter_error_km(best.x)) << "\n"
               << "best_tau_error_s: " << fmt(std::abs(best.x[2] - s.truth.tau)) << "\n";
        }
        write_csv(obs.observed, (std::filesystem::path(s.output_dir) / "observed.csv").string());
        std::ostringstream extra;
        if (s.noise_active) {
            extra << "noise: ratio=" << fmt(s.noise_ratio) << " lambda_mode=" << s.lambda_mode
                  << "\n";
            for (std::size_t r = 0; r < obs.sigma.size(); ++r)
                extra << "sigma_r" << (r + 1) << ": " << fmt(obs.sigma[r]) << "\n";
        }
        write_metadata(s, extra.str());
    }
    LocateResult out;
    out.run = std::move(run);
    out.observed = std::move(obs.observed);
    out.sigma = std::move(obs.sigma);
    return out;
}

// ------------------------------------------------------------- noise-table

NoiseTableResult run_noise_table(const ExperimentSetup& s) {
    const auto& cf = s.raw;
    const std::string kind = cf.get_string("noise-table", "kind", "uniform");
    const std::size_t trials =
        static_cast<std::size_t>(cf.get_int("noise-table", "trials", 100));
    const std::size_t n = static_cast<std::size_t>(cf.get_int("noise-table", "n", 801));
    const double t_final = cf.get_double("noise-table", "t_final", 5.0);
    const double delay = cf.get_double("noise-table", "delay", 2.5);
    RickerParams rp;
    rp.amp = cf.get_double("noise-table", "amp", 1.0);
    rp.f0 = cf.get_double("noise-table", "f0", 2.0);
    const double dt = t_final / static_cast<double>(n - 1);
    const Trace g = make_ricker_trace(rp, delay, dt, n);

    NoiseTableResult res;
    res.factors = {0.8, 0.9, 1.0, 1.1, 1.2};
    res.counts = {50, 100, 200, 400, 800};
    if (cf.has("noise-table", "segments")) {
        res.counts.clear();
        for (double v : cf.get_list("noise-table", "segments"))
            res.counts.push_back(static_cast<std::size_t>(v));
    }

    auto make_spec = [&](std::size_t N, std::uint64_t seed) {
        if (kind == "uniform")
            return NoiseSpec::uniform(cf.get_double("noise-table", "a", -0.1),
                                      cf.get_double("noise-table", "b", 0.1), N, seed);
        if (kind == "normal")
            return NoiseSpec::normal(cf.get_double("noise-table", "mean", 0.0),
                                     cf.get_double("noise-table", "stddev", 0.1), N, seed);
        throw ConfigError("noise-table kind must be uniform or normal");
    };
    const double lam_star = make_spec(1, 0).noise_variance();  // mu = 0 in both kinds
    res.lambda_star_value = lam_star;

    res.mean_d.assign(res.factors.size(), std::vector<double>(res.counts.size(), 0.0));
    res.mean_l2_sq.assign(res.counts.size(), 0.0);

    // one noise draw per (N, trial), shared across the lambda factors
    parallel_for(res.counts.size(), s.threads, [&](std::size_t ni) {
        const std::size_t N = res.counts[ni];
        std::vector<double> acc(res.factors.size(), 0.0);
        double acc_l2 = 0.0;
        for (std::size_t t = 0; t < trials; ++t) {
            const Trace fN = inject_noise(g, make_spec(N, derive_seed(s.seed, ni, t)));
            std::vector<double> diff2(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double d = fN.samples[i] - g.samples[i];
                diff2[i] = d * d;
            }
            acc_l2 += trapezoid(diff2, dt);
            for (std::size_t fi = 0; fi < res.factors.size(); ++fi)
                acc[fi] += misfit_distance_reg(fN, g, Lambda(res.factors[fi] * lam_star));
        }
        for (std::size_t fi = 0; fi < res.factors.size(); ++fi)
            res.mean_d[fi][ni] = acc[fi] / static_cast<double>(trials);
        res.mean_l2_sq[ni] = acc_l2 / static_cast<double>(trials);
    });

    if (!s.output_dir.empty()) {
        auto os = open_out(s.output_dir, "noise_table.csv");
        os << "lambda_factor,N,mean_d_lambda\n";
        for (std::size_t fi = 0; fi < res.factors.size(); ++fi)
            for (std::size_t ni = 0; ni < res.counts.size(); ++ni)
                os << fmt(res.factors[fi]) << ',' << res.counts[ni] << ','
                   << fmt(res.mean_d[fi][ni]) << '\n';
        for (std::size_t ni = 0; ni < res.counts.size(); ++ni)
            os << "l2," << res.counts[ni] << ',' << fmt(res.mean_l2_sq[ni]) << '\n';
        std::ostringstream extra;
        extra << "noise-table: kind=" << kind << " trials=" << trials
              << " lambda_star=" << fmt(lam_star) << "\n"
              << "l2 row: mean integral of |f_N-g|^2 over [0,t_f]\n";
        write_metadata(s, extra.str());
    }
    return res;
}

// ---------------------------------------------------------------- compare

const char* to_string(ConvergenceClass c) {
    switch (c) {
        case ConvergenceClass::correct: return "correct";
        case ConvergenceClass::divergence: return "divergence";
        case ConvergenceClass::error_convergence: return "error_convergence";
    }
    return "unknown";
}

CompareResult run_method_compare(const ExperimentSetup& s) {
    const auto& cf = s.raw;
    const std::size_t count = static_cast<std::size_t>(cf.get_int("ensemble", "count", 20));
    const double x_min = cf.get_double("ensemble", "x_min", 20.0);
    const double x_max = cf.get_double("ensemble", "x_max", 80.0);
    const double z_min = cf.get_double("ensemble", "z_min", 3.0);
    const double z_max = cf.get_double("ensemble", "z_max", 40.0);
    const double tau_min = cf.get_double("ensemble", "tau_min", 7.5);
    const double tau_max = cf.get_double("ensemble", "tau_max", 12.5);
    const double correct_km = cf.get_double("ensemble", "correct_km", 1.0);
    std::vector<std::string> methods = {"lmf", "gn", "bfgs"};
    if (cf.has("ensemble", "methods")) {
        methods.clear();
        std::stringstream ss(cf.get_string("ensemble", "methods"));
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cell.erase(std::remove_if(cell.begin(), cell.end(), ::isspace), cell.end());
            if (!cell.empty()) methods.push_back(cell);
        }
    }

    // identical seeded draws for every method
    std::mt19937_64 rng(derive_seed(s.seed, 0xC0817));
    std::uniform_real_distribution<double> ux(x_min, x_max), uz(z_min, z_max),
        ut(tau_min, tau_max);
    std::vector<std::pair<Vec3, Vec3>> draws(count);
    for (auto& d : draws) {
        d.first = {ux(rng), uz(rng), ut(rng)};   // truth
        d.second = {ux(rng), uz(rng), ut(rng)};  // init
    }

    CompareResult res;
    std::vector<std::vector<CompareRow>> rows(count);
    parallel_for(count, s.threads, [&](std::size_t m) {
        SourceParams truth = s.truth;
        truth.xi_x = draws[m].first[0];
        truth.xi_z = draws[m].first[1];
        truth.tau = draws[m].first[2];
        const TraceSet observed = forward_solve(s.model, truth, s.solver, s.receivers);
        for (const auto& method : methods) {
            WaveProblem problem(s.model, s.solver, s.receivers, observed, {}, s.window,
                                s.truth.wavelet, 1);
            LocateRun run;
            try {
                if (method == "lmf") run = lmf_locate(problem, draws[m].second, s.lmf);
                else if (method == "gn") run = gn_locate(problem, draws[m].second, s.lmf);
                else if (method == "bfgs") run = bfgs_locate(problem, draws[m].second, s.lmf);
                else throw ConfigError("unknown method: " + method);
            } catch (const ConfigError&) {
                throw;
            } catch (const std::exception& e) {
                run.status = LocateRun::Status::diverged;
                run.message = e.what();
            }
            CompareRow row;
            row.member = m;
            row.method = method;
            row.status = run.status;
            row.iterations = run.iterations();
            if (!run.trajectory.empty()) {
                const auto& fin = run.trajectory.back();
                row.error_km = std::hypot(fin.x[0] - truth.xi_x, fin.x[1] - truth.xi_z);
            } else {
                row.error_km = std::numeric_limits<double>::infinity();
            }
            if (run.status == LocateRun::Status::diverged ||
                !(row.error_km < correct_km || run.status == LocateRun::Status::converged)) {
                row.cls = ConvergenceClass::divergence;
            } else if (row.error_km < correct_km) {
                row.cls = ConvergenceClass::correct;
            } else {
                row.cls = ConvergenceClass::error_convergence;
            }
            rows[m].push_back(row);
        }
    });
    for (auto& r : rows)
        for (auto& row : r) res.rows.push_back(row);

    for (const auto& method : methods) {
        CompareResult::MethodSummary sum;
        std::vector<double> iters;
        for (const auto& row : res.rows) {
            if (row.method != method) continue;
            switch (row.cls) {
                case ConvergenceClass::correct:
                    ++sum.correct;
                    iters.push_back(static_cast<double>(row.iterations));
                    break;
                case ConvergenceClass::divergence: ++sum.divergence; break;
                case ConvergenceClass::error_convergence: ++sum.error_convergence; break;
            }
        }
        if (!iters.empty()) {
            double mean = 0.0;
            for (double v : iters) mean += v;
            mean /= static_cast<double>(iters.size());
            double var = 0.0;
            for (double v : iters) var += (v - mean) * (v - mean);
            var /= static_cast<double>(iters.size());
            sum.mean_iterations = mean;
            sum.stddev_iterations = std::sqrt(var);
        }
        res.summary[method] = sum;
    }

    if (!s.output_dir.empty()) {
        {
            auto os = open_out(s.output_dir, "compare_results.csv");
            os << "member,method,status,iterations,error_km,class\n";
            for (const auto& row : res.rows)
                os << row.member << ',' << row.method << ',' << to_string(row.status) << ','
                   << row.iterations << ',' << fmt(row.error_km) << ',' << to_string(row.cls)
                   << '\n';
        }
        {
            auto os = open_out(s.output_dir, "compare_summary.csv");
            os << "method,correct,divergence,error_convergence,mean_iterations,stddev_iterations\n";
            for (const auto& method : methods) {
                const auto& sum = res.summary.at(method);
                os << method << ',' << sum.correct << ',' << sum.divergence << ','
                   << sum.error_convergence << ',' << fmt(sum.mean_iterations) << ','
                   << fmt(sum.stddev_iterations) << '\n';
            }
        }
        std::ostringstream extra;
        extra << "ensemble: count=" << count << " box x=[" << fmt(x_min) << "," << fmt(x_max)
              << "] z=[" << fmt(z_min) << "," << fmt(z_max) << "] tau=[" << fmt(tau_min)
              << "," << fmt(tau_max) << "] correct_km=" << fmt(correct_km) << "\n";
        write_metadata(s, extra.str());
    }
    return res;
}

void run_experiment(const ExperimentSetup& s) {
    if (s.kind == "landscape") run_landscape(s);
    else if (s.kind == "locate") run_locate(s);
    else if (s.kind == "noise-table") run_noise_table(s);
    else if (s.kind == "compare") run_method_compare(s);
    else throw ConfigError("unknown experiment kind: " + s.kind);
}

} // namespace qwloc
