#pragma once

/// @file continuation.hpp
/// @brief Global-in-time reconstruction by marching fixed-point windows.
///
/// After a solution (v̂, k̂) is known on [0,τ], the next window [τ, τ+δ] with
/// δ ≤ τ is solved for the shifted unknowns v_τ(t) = v(τ+t), k_τ(t) = k(τ+t).
/// Its memory integral splits into k_τ∗v̂ + k̂∗v_τ plus a tail over [t,τ]
/// that only involves the frozen history.  The Oseen model is the supported
/// case; the full nonlinear model is marched the same way (experimental).

#include "kvmem/inverse.hpp"

#include <vector>

namespace kvmem {

struct WindowState {
    double offset = 0.0;        ///< end of the reconstructed range
    Trajectory v_hat;           ///< most recent window solution
    KernelTrace k_hat;
    SpectralField u_tau;        ///< v(offset), initial value of the next window
    Trajectory glued_v;         ///< v on [0, offset]
    KernelTrace glued_k;        ///< k on [0, offset]
};

/// State after the first window.
WindowState initial_state(const FixedPointResult& first);

/// Window problem on [offset, offset + δ] carrying the glued history.
/// Requires 0 < δ ≤ offset and offset + δ within the measurement.
WindowProblem shift_problem(const WindowState& state, const ProblemSetup& setup, Mode mode, std::size_t delta_steps);

/// Appends a solved continuation window.  The junction sample is averaged;
/// a mismatch above 100·tol throws GlueError.
WindowState glue(const WindowState& state, const Trajectory& v_tau, const KernelTrace& k_tau, double tol);

/// ‖v_τ(0) − v̂(offset)‖_{H²} + |k_τ(0) − k̂(offset)|
double junction_mismatch(const WindowState& state, const Trajectory& v_tau, const KernelTrace& k_tau);

struct WindowDiagnostics {
    double offset = 0.0;
    double length = 0.0;
    int iterations = 0;
    int halvings = 0;
    bool converged = false;
    double final_delta = 0.0;
    double norm = 0.0;               ///< combined norm of the window solution
    double junction_mismatch = 0.0;  ///< 0 for the first window
    std::vector<double> contraction_ratios;
};

struct MarchResult {
    FixedPointResult solution;  ///< glued (v, k) on [0, reached]
    std::vector<WindowDiagnostics> windows;
    double reached = 0.0;
    bool completed = false;
    bool experimental = false;  ///< full nonlinear model
    std::string message;

    /// max window norm / first window norm
    double monitor_growth() const;
};

/// Windows of length min(offset, T − offset, cfg.tau) until T is reached.
/// Assumption failures throw AssumptionError; a window that cannot be
/// solved ends the march with completed = false and the partial result.
MarchResult march_global(const ProblemSetup& setup, const FixedPointConfig& cfg, double T, Mode mode);

}  // namespace kvmem
