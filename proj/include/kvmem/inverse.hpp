#pragma once

/// @file inverse.hpp
/// @brief Simultaneous reconstruction of v = ∂ₜu and the memory kernel k.
///
/// One fixed-point sweep maps a guess (ṽ, k̃) to (v, k):
///   k(t) = α { r″ − μ₀⟨ṽ,Δφ⟩ − (k̃∗⟨ṽ,Δφ⟩)(t) + ⟨φ, A(ṽ)⟩ },   α⁻¹ = ⟨φ, Δu₀⟩,
///   (I − μ₁Δ)∂ₜv = μ₀Δv + P[ kΔu₀ + Δ(k∗ṽ) − A(ṽ) ],            v(0) = v₀,
/// where A(ṽ) = (ṽ·∇)U + (U·∇)ṽ with U = u₀ + ∫ṽ (full model) or
/// A(ṽ) = (u∞·∇)ṽ (Oseen model).  The sweep is repeated until the update is
/// below tolerance in the discrete H¹(0,τ;H²) × L²(0,τ) norm.

#include "kvmem/forward.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace kvmem {

struct AssumptionCheck {
    std::string name;  ///< "A1".."A5" (full model) or "H1".."H5" (Oseen)
    bool passed = false;
    bool skipped = false;
    double value = 0.0;
    double threshold = 0.0;
    std::string detail;
};

struct AssumptionReport {
    std::vector<AssumptionCheck> checks;

    bool passed() const;
    const AssumptionCheck* first_failure() const;
};

/// Report-only; never throws for bad data.  The compatibility check on
/// r(0), r′(0) is skipped when the setup has no measurement.
AssumptionReport check_assumptions(const ProblemSetup& setup, Mode mode);

/// ⟨φ, Δu₀⟩
double alpha_inverse(const ProblemSetup& setup);
/// Lower bound that |α⁻¹| must exceed.
double alpha_floor(const ProblemSetup& setup);

/// v₀ = (I − μ₁Δ)⁻¹ P[μ₀Δu₀ − (a·∇)u₀] with a = u₀ or u∞.
SpectralField compute_v0(const ProblemSetup& setup, Mode mode);
/// p₀ with −Δp₀ = ∇·[(a·∇)u₀].
PressureField initial_pressure(const ProblemSetup& setup, Mode mode);

struct IterationInfo {
    std::size_t window = 0;
    int iteration = 0;
    double tau = 0.0;
    double delta = 0.0;
    double ratio = 0.0;  ///< 0 on the first iteration
    double iterate_norm = 0.0;
};

using IterationCallback = std::function<void(const IterationInfo&)>;

struct FixedPointConfig {
    double tau = 0.25;
    double dt = 1e-3;
    double tol = 1e-8;
    int max_iter = 50;
    /// Halve the window whenever τ(1 + L + L²) > 1 for the running iterate norm L.
    bool enforce_smallness = false;
    /// Constant value of the initial kernel guess k̃⁰.
    double initial_kernel = 0.0;
    /// Consecutive non-contracting sweeps tolerated before halving.
    int stall_limit = 3;
    IterationCallback on_iteration;
};

struct FixedPointResult {
    Trajectory v;
    KernelTrace k;
    int iterations = 0;
    std::vector<double> deltas;
    std::vector<double> contraction_ratios;
    bool converged = false;
    double tau = 0.0;          ///< window actually solved (after halving)
    int halvings = 0;
    double iterate_norm = 0.0; ///< combined norm of the final (v, k)
    std::string message;
};

/// Discrete ‖w‖_{H¹(0,τ;H²)} + ‖κ‖_{L²(0,τ)}: trapezoid in time of ‖w‖²_{H²}
/// plus the forward-difference time derivative, and the trapezoid L² norm of κ.
double combined_norm(const std::vector<SpectralField>& w, const std::vector<double>& kappa, double dt);
double combined_norm(const Trajectory& w, const KernelTrace& kappa);

/// Memory history carried into a continuation window: glued (v̂, k̂) on [0,τ].
struct WindowHistory {
    KernelTrace k;
    Trajectory v;
    std::vector<double> s;            ///< ⟨v̂(t_i), Δφ⟩
    std::vector<SpectralField> tail;  ///< ∫_{t_j}^τ k̂(τ+t_j−s) v̂(s) ds, j = 0..steps
};

/// Everything one fixed-point window needs; the first window has no history.
struct WindowProblem {
    Mode mode = Mode::kv;
    double mu0 = 1.0;
    double mu1 = 1.0;
    double alpha = 0.0;
    SpectralField u0;
    SpectralField phi;
    SpectralField lap_phi;
    SpectralField u_inf;
    SpectralField v_start;  ///< v at the window start
    SpectralField u_start;  ///< u at the window start (full model)
    double dt = 0.0;
    std::size_t steps = 0;
    std::vector<double> r2;  ///< r″ on the window, at least steps + 1 samples
    std::shared_ptr<const WindowHistory> history;

    double offset() const;
};

/// Fresh window [0, steps·dt] built from the setup.  Throws AssumptionError
/// when α⁻¹ is under the floor.
WindowProblem make_window(const ProblemSetup& setup, Mode mode, std::size_t steps);

/// Kernel half of the sweep for a general window.
KernelTrace kernel_update(const WindowProblem& w, const Trajectory& v_tilde, const KernelTrace& k_tilde);
/// Linear IBVP half of the sweep for a general window.
Trajectory solve_linear_ibvp(const WindowProblem& w, const KernelTrace& k, const Trajectory& v_tilde);

KernelTrace kernel_update_kv(const Trajectory& v_tilde, const KernelTrace& k_tilde, const ProblemSetup& setup);
KernelTrace kernel_update_oseen(const Trajectory& v_tilde, const KernelTrace& k_tilde, const ProblemSetup& setup);
Trajectory solve_linear_ibvp_kv(const KernelTrace& k, const Trajectory& v_tilde, const ProblemSetup& setup,
                                const FixedPointConfig& cfg);
Trajectory solve_linear_ibvp_oseen(const KernelTrace& k, const Trajectory& v_tilde, const ProblemSetup& setup,
                                   const FixedPointConfig& cfg);

/// Iterates a window to convergence, halving it on smallness violations,
/// stalled contraction or exhausted iterations.  Never throws for
/// non-convergence; check result.converged.
FixedPointResult solve_window(WindowProblem w, const FixedPointConfig& cfg, std::size_t window_index = 0);

/// Checks assumptions (throws AssumptionError naming the first failure), then
/// solves on [0, cfg.tau].
FixedPointResult fixed_point_solve(const ProblemSetup& setup, const FixedPointConfig& cfg, Mode mode);

/// u(t) = u₀ + ∫₀ᵗ v by the cumulative trapezoid rule.
Trajectory reconstruct_u(const Trajectory& v, const SpectralField& u0);

struct ResidualReport {
    double momentum = 0.0;           ///< max over interior samples of the projected residual, L² norm
    double momentum_relative = 0.0;  ///< momentum / max ‖(I − μ₁Δ)∂ₜu‖
    double divergence = 0.0;         ///< max_n max_ξ |ξ·û_n(ξ)|
    double overdetermination = 0.0;  ///< max_n |⟨(I − μ₁Δ)φ, u_n⟩ − r(t_n)|
};

/// Residuals of the direct equation for (u, k) with centered time differences.
ResidualReport residual_check(const Trajectory& u, const KernelTrace& k, const ProblemSetup& setup, Mode mode);

}  // namespace kvmem
