#pragma once

/// @file fields.hpp
/// @brief Named divergence-free initial conditions and user-specified Fourier modes.

#include "kvmem/spectral.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace kvmem {

/// One real Fourier mode:  a_cos·cos(ξ·x) + a_sin·sin(ξ·x).
struct ModeTerm {
    std::array<int, 3> xi{0, 0, 0};
    std::array<double, 3> a_cos{0.0, 0.0, 0.0};
    std::array<double, 3> a_sin{0.0, 0.0, 0.0};
};

/// Either a named preset scaled by amplitude, or an explicit list of modes.
/// Mode lists are used as given (no projection), so they can describe
/// compressible data on purpose.
struct FieldSpec {
    std::string preset = "zero";
    double amplitude = 1.0;
    std::vector<ModeTerm> modes;
};

/// Preset names: zero, shear, taylor_green, multi (2D and 3D) and abc (3D).
std::vector<std::string> preset_names(int dim);

SpectralField build_field(const FieldSpec& spec, const GridPtr& grid);

/// Real random field, coefficient parts uniform in [-1,1] on modes with
/// every |ξ_i| ≤ max_wavenumber, zero mean; Leray-projected when solenoidal.
SpectralField random_field(const GridPtr& grid, std::uint64_t seed, int max_wavenumber, bool solenoidal);

/// Samples a vector function of x on the grid and transforms it.
template <typename F>
SpectralField sample_field(const GridPtr& grid, F&& f)
{
    PhysicalField p{grid, std::vector<std::vector<double>>(grid->dim(), std::vector<double>(grid->size()))};
    for (std::size_t i = 0; i < grid->size(); ++i) {
        std::array<double, 3> x{0.0, 0.0, 0.0};
        for (int a = 0; a < grid->dim(); ++a) x[a] = grid->coordinate(i, a);
        const std::array<double, 3> u = f(x);
        for (int a = 0; a < grid->dim(); ++a) p.values[a][i] = u[a];
    }
    return from_physical(p);
}

}  // namespace kvmem
