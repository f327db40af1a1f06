#pragma once

/// @file forward.hpp
/// @brief Time integration of the direct problem with a known memory kernel.
///
/// Each mode obeys (1 + μ₁|ξ|²) dû/dt = −μ₀|ξ|² û + N̂(t), with
///   N = P[ −(a·∇)u + Δ ∫₀ᵗ k(t−s) u(s) ds ],   a = u  or  a = u∞.
/// The viscous term is treated by Crank–Nicolson and N by second-order
/// Adams–Bashforth (forward Euler on the first step).

#include "kvmem/problem.hpp"

namespace kvmem {

/// Explicit part N(t_n) given the stored history u₀..u_n.
SpectralField explicit_terms(const Trajectory& history, std::size_t n, const KernelTrace& k,
                             const ModelParams& params);

/// One IMEX step from u_n (the last entry of history) to u_{n+1}.
/// Throws DivergenceError carrying n on non-finite output.
SpectralField step_direct(const SpectralField& u_n, const Trajectory& history, const KernelTrace& k,
                          const ModelParams& params, double dt);

struct ForwardOptions {
    /// Internal substeps per output sample (reference solutions, twin data).
    int substeps = 1;
    /// Abort when ‖u‖ exceeds growth_limit × ‖u₀‖.
    double growth_limit = 1e6;
};

struct ForwardRun {
    Trajectory u;
    Trajectory v;  ///< ∂ₜu from the semi-discrete equation
    MeasurementTrace measurement;
    KernelTrace kernel;
};

/// Integrates on [0,T] and samples r, r′, r″ for the test function φ.
/// r′ and r″ come from the exact identities obtained by testing the
/// u- and v-equations with φ.
ForwardRun run_direct(const SpectralField& u0, const ModelParams& params, double T, double dt,
                      const SpectralField& phi, const ForwardOptions& opts = {});

/// Unprojected advective part of the v-equation: (v·∇)u + (u·∇)v, or (u∞·∇)v.
SpectralField advective_derivative(const SpectralField& v, const SpectralField& u, const ModelParams& params);

struct TwinDataset {
    MeasurementTrace measurement;
    KernelTrace k_true;
    Trajectory u;
    Trajectory v;
};

/// Forward solve from the setup's u₀, φ and model with kernel k_true; the
/// setup's own measurement is ignored.
TwinDataset synthesize_twin(const ProblemSetup& setup, const KernelSpec& k_true, double T, double dt,
                            const ForwardOptions& opts = {});

}  // namespace kvmem
