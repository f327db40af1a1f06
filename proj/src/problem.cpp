#include "kvmem/problem.hpp"

#include "csv.hpp"
#include "kvmem/errors.hpp"

namespace kvmem {

const char* mode_name(Mode m) { return m == Mode::kv ? "kv" : "oseen"; }

void validate(const ModelParams& p)
{
    if (!(p.mu0 > 0.0)) throw InvalidArgument("mu0 must be positive");
    if (!(p.mu1 > 0.0)) throw InvalidArgument("mu1 must be positive");
    if (p.mode == Mode::oseen) {
        if (p.u_inf.empty()) throw InvalidArgument("Oseen mode requires a background field u_inf");
        const double scale = 1.0 + sobolev_norm(p.u_inf, 1.0);
        if (divergence_norm(p.u_inf) > 1e-10 * scale)
            throw InvalidArgument("background field u_inf is not divergence-free");
    }
}

MeasurementTrace slice(const MeasurementTrace& m, std::size_t first, std::size_t count)
{
    if (m.r.empty() || first + count > m.steps())
        throw ShapeError("measurement slice exceeds the recorded range");
    MeasurementTrace out;
    out.dt = m.dt;
    const auto b = static_cast<std::ptrdiff_t>(first);
    const auto e = static_cast<std::ptrdiff_t>(first + count + 1);
    out.r.assign(m.r.begin() + b, m.r.begin() + e);
    out.r1.assign(m.r1.begin() + b, m.r1.begin() + e);
    out.r2.assign(m.r2.begin() + b, m.r2.begin() + e);
    return out;
}

void write_measurement_csv(const std::string& path, const MeasurementTrace& m)
{
    if (m.r1.size() != m.r.size() || m.r2.size() != m.r.size())
        throw ShapeError("measurement columns have different lengths");
    std::vector<double> t(m.r.size());
    for (std::size_t n = 0; n < t.size(); ++n) t[n] = m.dt * static_cast<double>(n);
    detail::write_csv(path, {"t", "r", "rp", "rpp"}, {&t, &m.r, &m.r1, &m.r2});
}

}  // namespace kvmem
