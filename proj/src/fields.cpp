#include "kvmem/fields.hpp"

#include "kvmem/errors.hpp"

#include <cmath>
#include <random>

namespace kvmem {

namespace {

using Vec = std::array<double, 3>;

Vec taylor_green_2d(const Vec& x)
{
    return {std::sin(x[0]) * std::cos(x[1]), -std::cos(x[0]) * std::sin(x[1]), 0.0};
}

/// Velocity of the stream function sin x sin y + 0.6 cos(x+2y) + 0.4 sin(2x−y).
Vec multi_2d(const Vec& x)
{
    const double dpsi_dy = std::sin(x[0]) * std::cos(x[1]) - 1.2 * std::sin(x[0] + 2 * x[1]) -
                           0.4 * std::cos(2 * x[0] - x[1]);
    const double dpsi_dx = std::cos(x[0]) * std::sin(x[1]) - 0.6 * std::sin(x[0] + 2 * x[1]) +
                           0.8 * std::cos(2 * x[0] - x[1]);
    return {dpsi_dy, -dpsi_dx, 0.0};
}

Vec taylor_green_3d(const Vec& x)
{
    return {std::sin(x[0]) * std::cos(x[1]) * std::cos(x[2]), -std::cos(x[0]) * std::sin(x[1]) * std::cos(x[2]), 0.0};
}

Vec abc_3d(const Vec& x)
{
    return {std::sin(x[2]) + std::cos(x[1]), std::sin(x[0]) + std::cos(x[2]), std::sin(x[1]) + std::cos(x[0])};
}

Vec multi_3d(const Vec& x)
{
    Vec u = taylor_green_3d(x);
    u[0] += 0.5 * std::sin(2 * x[2]);
    u[1] += 0.5 * std::sin(2 * x[0]);
    u[2] += 0.5 * std::sin(2 * x[1]);
    return u;
}

}  // namespace

std::vector<std::string> preset_names(int dim)
{
    if (dim == 3) return {"zero", "shear", "taylor_green", "multi", "abc"};
    return {"zero", "shear", "taylor_green", "multi"};
}

SpectralField build_field(const FieldSpec& spec, const GridPtr& grid)
{
    const int dim = grid->dim();
    if (!spec.modes.empty()) {
        for (const auto& m : spec.modes)
            for (int a = 0; a < 3; ++a)
                if (a >= dim && (m.xi[a] != 0 || m.a_cos[a] != 0.0 || m.a_sin[a] != 0.0))
                    throw InvalidArgument("mode list uses a component beyond the grid dimension");
        return sample_field(grid, [&](const Vec& x) {
            Vec u{0.0, 0.0, 0.0};
            for (const auto& m : spec.modes) {
                double phase = 0.0;
                for (int a = 0; a < dim; ++a) phase += m.xi[a] * x[a];
                for (int a = 0; a < dim; ++a)
                    u[a] += spec.amplitude * (m.a_cos[a] * std::cos(phase) + m.a_sin[a] * std::sin(phase));
            }
            return u;
        });
    }

    const double A = spec.amplitude;
    auto scaled = [A](Vec (*f)(const Vec&)) {
        return [A, f](const Vec& x) {
            Vec u = f(x);
            for (double& c : u) c *= A;
            return u;
        };
    };
    SpectralField out(grid);
    if (spec.preset == "zero") {
        // already zero
    } else if (spec.preset == "shear") {
        out = sample_field(grid, [A](const Vec& x) { return Vec{A * std::sin(x[1]), 0.0, 0.0}; });
    } else if (spec.preset == "taylor_green") {
        out = sample_field(grid, scaled(dim == 2 ? taylor_green_2d : taylor_green_3d));
    } else if (spec.preset == "multi") {
        out = sample_field(grid, scaled(dim == 2 ? multi_2d : multi_3d));
    } else if (spec.preset == "abc" && dim == 3) {
        out = sample_field(grid, scaled(abc_3d));
    } else {
        throw InvalidArgument("unknown field preset '" + spec.preset + "' for dimension " + std::to_string(dim));
    }
    out.mark_solenoidal(true);
    return out;
}

SpectralField random_field(const GridPtr& grid, std::uint64_t seed, int max_wavenumber, bool solenoidal)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const Grid& g = *grid;
    SpectralField f(grid);
    for (std::size_t m = 0; m < g.size(); ++m) {
        const std::size_t neg = g.index_of_negative(m);
        if (neg < m) continue;
        const auto& xi = g.wavevector(m);
        bool keep = g.k2(m) > 0.0 && neg != m;
        for (int a = 0; a < g.dim(); ++a) keep = keep && std::abs(xi[a]) <= max_wavenumber;
        for (int c = 0; c < g.dim(); ++c) {
            const Complex value = keep ? Complex(unit(rng), unit(rng)) : Complex{};
            f.at(c, m) = value;
            f.at(c, neg) = std::conj(value);
        }
    }
    return solenoidal ? leray_project(f) : f;
}

}  // namespace kvmem
