#include "qwloc/wavesim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include "sim_engine.hpp"

namespace qwloc {

Grid2D::Grid2D(std::size_t nx_, std::size_t nz_, double h_) : nx(nx_), nz(nz_), h(h_) {
    if (nx < 16 || nz < 16) throw std::invalid_argument("grid needs nx,nz >= 16");
    if (!(h > 0.0)) throw std::invalid_argument("grid spacing must be positive");
}

double VelocityModel::max_c() const {
    return *std::max_element(c.begin(), c.end());
}

void validate(const VelocityModel& vm) {
    if (vm.c.size() != vm.grid.nx * vm.grid.nz)
        throw std::invalid_argument("velocity field size does not match grid");
    for (double v : vm.c)
        if (!(v > 0.0)) throw std::invalid_argument("wave speed must be positive");
}

VelocityModel two_layer_model(std::size_t nx, std::size_t nz, double h) {
    VelocityModel vm;
    vm.grid = Grid2D(nx, nz, h);
    vm.c.resize(nx * nz);
    for (std::size_t ix = 0; ix < nx; ++ix) {
        const double x = static_cast<double>(ix) * h;
        const double s = 0.2 * std::sin(std::numbers::pi * x / 25.0);
        for (std::size_t iz = 0; iz < nz; ++iz) {
            const double z = static_cast<double>(iz) * h;
            vm.c[vm.grid.index(ix, iz)] = (z <= 20.0) ? (5.2 + 0.05 * z + s) : (6.8 + s);
        }
    }
    return vm;
}

VelocityModel subduction_model(std::size_t nx, std::size_t nz, double h) {
    VelocityModel vm;
    vm.grid = Grid2D(nx, nz, h);
    vm.c.resize(nx * nz);
    for (std::size_t ix = 0; ix < nx; ++ix) {
        const double x = static_cast<double>(ix) * h;
        const double moho = 33.0 + 5.0 * std::sin(std::numbers::pi * x / 40.0);
        for (std::size_t iz = 0; iz < nz; ++iz) {
            const double z = static_cast<double>(iz) * h;
            double c;
            if (z <= moho) c = 5.5;  // crust, including the surface row
            else if (z <= 45.0 + 0.4 * x) c = 7.8;
            else if (z <= 60.0 + 0.4 * x) c = 7.488;
            else if (z <= 85.0 + 0.4 * x) c = 8.268;
            else c = 7.8;
            vm.c[vm.grid.index(ix, iz)] = c;
        }
    }
    return vm;
}

VelocityModel explicit_model(Grid2D grid, std::vector<double> c) {
    VelocityModel vm;
    vm.grid = grid;
    vm.c = std::move(c);
    validate(vm);
    return vm;
}

void validate(const SourceParams& s, const Grid2D& g) {
    if (s.tau < 0.0) throw std::invalid_argument("source origin time must be >= 0");
    if (!(s.wavelet.amp > 0.0) && s.wavelet.amp != 0.0)
        throw std::invalid_argument("wavelet amplitude must be positive");
    if (!(s.wavelet.f0 > 0.0)) throw std::invalid_argument("wavelet f0 must be positive");
    const double m = 3.0 * g.h;
    if (s.xi_x < m || s.xi_x > g.length_x() - m || s.xi_z < m || s.xi_z > g.depth_z() - m)
        throw std::invalid_argument("source must sit at least 3h inside the grid");
}

double max_stable_dt(const SolverConfig& cfg, const VelocityModel& vm) {
    const double base = cfg.cfl * vm.grid.h / (std::numbers::sqrt2 * vm.max_c());
    return cfg.stencil_order == 4 ? base * 6.0 / 7.0 : base;
}

void validate(const SolverConfig& cfg, const VelocityModel& vm) {
    if (!(cfg.dt > 0.0) || cfg.nt < 1)
        throw std::invalid_argument("solver needs dt > 0 and nt >= 1");
    if (!(cfg.cfl > 0.0) || cfg.cfl > 0.9)
        throw std::invalid_argument("cfl safety factor must be in (0, 0.9]");
    if (cfg.stencil_order != 2 && cfg.stencil_order != 4)
        throw std::invalid_argument("stencil_order must be 2 or 4");
    const double dt_max = max_stable_dt(cfg, vm);
    if (cfg.dt > dt_max) {
        std::ostringstream os;
        os << "unstable time step: dt = " << cfg.dt
           << " exceeds the maximum allowed dt = " << dt_max;
        throw std::invalid_argument(os.str());
    }
}

ReceiverArray ReceiverArray::on_surface(const std::vector<double>& x_requested,
                                        const Grid2D& g) {
    ReceiverArray out;
    std::set<std::size_t> seen;
    for (double x : x_requested) {
        const long node = std::lround(x / g.h);
        if (node < 0 || node >= static_cast<long>(g.nx))
            throw std::invalid_argument("receiver outside the surface");
        if (!seen.insert(static_cast<std::size_t>(node)).second)
            throw std::invalid_argument("receivers must be distinct after snapping");
        out.nodes.push_back(static_cast<std::size_t>(node));
        out.x_positions.push_back(static_cast<double>(node) * g.h);
    }
    return out;
}

std::array<double, 7> discretize_delta(double offset) {
    auto piece = [](double a) {
        if (a <= 1.0)
            return 1.0 - 5.0 / 4.0 * a * a - 35.0 / 12.0 * a * a * a +
                   21.0 / 4.0 * a * a * a * a - 25.0 / 12.0 * a * a * a * a * a;
        if (a <= 2.0)
            return -4.0 + 75.0 / 4.0 * a - 245.0 / 8.0 * a * a + 545.0 / 24.0 * a * a * a -
                   63.0 / 8.0 * a * a * a * a + 25.0 / 24.0 * a * a * a * a * a;
        if (a <= 3.0)
            return 18.0 - 153.0 / 4.0 * a + 255.0 / 8.0 * a * a - 313.0 / 24.0 * a * a * a +
                   21.0 / 8.0 * a * a * a * a - 5.0 / 24.0 * a * a * a * a * a;
        return 0.0;
    };
    std::array<double, 7> w{};
    for (int k = -3; k <= 3; ++k)
        w[static_cast<std::size_t>(k + 3)] = piece(std::abs(static_cast<double>(k) - offset));
    return w;
}

namespace {

std::vector<double> ricker_half_series(const SourceParams& src, const SolverConfig& cfg) {
    std::vector<double> s(cfg.nt);
    for (std::size_t m = 0; m < cfg.nt; ++m)
        s[m] = ricker_eval(src.wavelet,
                           (static_cast<double>(m) + 0.5) * cfg.dt - src.tau);
    return s;
}

TraceSet collect_traces(const detail::RunOutput& out, double dt) {
    TraceSet ts;
    ts.dt = dt;
    for (const auto& u : out.receiver_u) ts.traces.emplace_back(dt, u);
    return ts;
}

} // namespace

TraceSet forward_solve(const VelocityModel& vm, const SourceParams& src,
                       const SolverConfig& cfg, const ReceiverArray& rec) {
    validate(vm);
    validate(src, vm.grid);
    validate(cfg, vm);
    detail::SimSetup setup(vm, cfg);
    auto source = detail::make_point_source(setup, src.xi_x, src.xi_z,
                                            ricker_half_series(src, cfg));
    auto out = detail::run_simulation(setup, {source}, rec.nodes, std::nullopt);
    return collect_traces(out, cfg.dt);
}

std::pair<TraceSet, WavefieldRecord> forward_solve_with_storage(
    const VelocityModel& vm, const SourceParams& src, const SolverConfig& cfg,
    const ReceiverArray& rec, std::array<double, 2> probe_point) {
    validate(vm);
    validate(src, vm.grid);
    validate(cfg, vm);
    detail::SimSetup setup(vm, cfg);
    auto source = detail::make_point_source(setup, src.xi_x, src.xi_z,
                                            ricker_half_series(src, cfg));
    auto out = detail::run_simulation(setup, {source}, rec.nodes, probe_point);
    return {collect_traces(out, cfg.dt), std::move(*out.record)};
}

namespace {

std::string fmt(double x) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

} // namespace

void write_csv(const TraceSet& ts, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << 't';
    for (std::size_t r = 0; r < ts.size(); ++r) os << ",r" << (r + 1);
    os << '\n';
    const std::size_t n = ts.traces.empty() ? 0 : ts.traces.front().size();
    for (std::size_t i = 0; i < n; ++i) {
        os << fmt(static_cast<double>(i) * ts.dt);
        for (const auto& tr : ts.traces) os << ',' << fmt(tr.samples[i]);
        os << '\n';
    }
}

TraceSet read_traceset_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open trace CSV: " + path);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("empty trace CSV");
    std::size_t ncol = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
    std::vector<double> times;
    std::vector<std::vector<double>> cols(ncol);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        times.push_back(std::stod(cell));
        for (std::size_t c = 0; c < ncol; ++c) {
            if (!std::getline(ss, cell, ','))
                throw std::runtime_error("trace CSV row too short");
            cols[c].push_back(std::stod(cell));
        }
    }
    if (times.size() < 2) throw std::runtime_error("trace CSV needs at least 2 rows");
    const double dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
    TraceSet ts;
    ts.dt = dt;
    for (auto& c : cols) ts.traces.emplace_back(dt, std::move(c));
    return ts;
}

} // namespace qwloc
