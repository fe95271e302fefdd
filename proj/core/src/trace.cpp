#include "qwloc/trace.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace qwloc {

Trace::Trace(double dt_, std::vector<double> samples_)
    : dt(dt_), samples(std::move(samples_)) {
    validate(*this);
}

void validate(const Trace& t) {
    if (t.samples.size() < 2)
        throw std::invalid_argument("trace needs at least 2 samples");
    if (!(t.dt > 0.0))
        throw std::invalid_argument("trace dt must be positive");
    for (double v : t.samples)
        if (!std::isfinite(v))
            throw std::invalid_argument("trace sample not finite");
}

bool same_grid(const Trace& a, const Trace& b) {
    if (a.samples.size() != b.samples.size()) return false;
    return std::abs(a.dt - b.dt) <= 1e-9 * std::max(a.dt, b.dt);
}

void require_same_grid(const Trace& a, const Trace& b) {
    if (!same_grid(a, b))
        throw std::invalid_argument("traces are not on the same grid");
}

double trapezoid(const std::vector<double>& v, double dt) {
    if (v.size() < 2) return 0.0;
    double s = 0.5 * (v.front() + v.back());
    for (std::size_t i = 1; i + 1 < v.size(); ++i) s += v[i];
    return s * dt;
}

std::vector<double> cumulative_trapezoid(const std::vector<double>& v, double dt) {
    std::vector<double> out(v.size(), 0.0);
    for (std::size_t i = 1; i < v.size(); ++i)
        out[i] = out[i - 1] + 0.5 * dt * (v[i - 1] + v[i]);
    return out;
}

namespace {

std::string fmt(double x) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, const char* what) {
    double x = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::runtime_error(std::string("failed to parse ") + what + ": '" + std::string(s) + "'");
    return x;
}

} // namespace

void write_csv(const Trace& t, std::ostream& os) {
    os << "t,value\n";
    for (std::size_t i = 0; i < t.samples.size(); ++i)
        os << fmt(t.time(i)) << ',' << fmt(t.samples[i]) << '\n';
}

void write_csv(const Trace& t, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    write_csv(t, os);
}

Trace read_trace_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line))
        throw std::runtime_error("empty trace CSV");
    std::vector<double> times, values;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error("malformed trace CSV line: " + line);
        times.push_back(parse_double(std::string_view(line).substr(0, comma), "time"));
        values.push_back(parse_double(std::string_view(line).substr(comma + 1), "value"));
    }
    if (times.size() < 2)
        throw std::runtime_error("trace CSV needs at least 2 rows");
    const double n1 = static_cast<double>(times.size() - 1);
    const double dt = (times.back() - times.front()) / n1;
    if (!(dt > 0.0))
        throw std::runtime_error("trace CSV time column not increasing");
    const double tol = 1e-9 * std::max(times.back(), dt);
    for (std::size_t i = 0; i < times.size(); ++i)
        if (std::abs(times[i] - static_cast<double>(i) * dt) > tol)
            throw std::runtime_error("trace CSV sampling not uniform within 1e-9");
    return Trace(dt, std::move(values));
}

Trace read_trace_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open trace CSV: " + path);
    return read_trace_csv(is);
}

} // namespace qwloc
