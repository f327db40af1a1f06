#pragma once

/// @file problem.hpp
/// @brief Model coefficients, measurement traces and the inverse-problem data bundle.

#include "kvmem/memory.hpp"
#include "kvmem/spectral.hpp"

#include <string>
#include <vector>

namespace kvmem {

/// Full convective term (u·∇)u, or its linearization (u∞·∇)u about a fixed field.
enum class Mode { kv, oseen };

const char* mode_name(Mode m);

struct ModelParams {
    double mu0 = 1.0;
    double mu1 = 1.0;
    KernelSpec kernel = zero_kernel();
    Mode mode = Mode::kv;
    SpectralField u_inf;  ///< only read in Oseen mode
};

/// Throws InvalidArgument for non-positive μ's or a missing / compressible u∞.
void validate(const ModelParams& p);

/// Samples of r, r′, r″ at t_n = n·dt.
struct MeasurementTrace {
    double dt = 0.0;
    std::vector<double> r;
    std::vector<double> r1;
    std::vector<double> r2;

    std::size_t size() const { return r.size(); }
    std::size_t steps() const { return r.empty() ? 0 : r.size() - 1; }
    double duration() const { return dt * static_cast<double>(steps()); }
};

/// Samples [first, first+count] of every column.
MeasurementTrace slice(const MeasurementTrace& m, std::size_t first, std::size_t count);

/// `t,r,rp,rpp` CSV, 17 significant digits.
void write_measurement_csv(const std::string& path, const MeasurementTrace& m);

/// Data of the inverse problem: the kernel inside params is ignored.
struct ProblemSetup {
    ModelParams params;
    SpectralField u0;
    SpectralField phi;
    MeasurementTrace measurement;
    /// |α⁻¹| must exceed alpha_floor_rel·‖φ‖_{L²}‖u₀‖_{H²}.
    double alpha_floor_rel = 1e-8;
    /// Compatibility of r(0), r′(0) is accepted within compat_tol·(1 + |reference|).
    double compat_tol = 1e-6;
};

}  // namespace kvmem
