#pragma once

/// @file memory.hpp
/// @brief Trapezoid quadrature for Volterra memory terms and window splitting.
///
/// All integrals ∫₀^{t_n} k(t_n − s) f(s) ds are approximated by the
/// composite trapezoid rule on the uniform sample grid t_i = i·dt, with the
/// end samples carrying weight dt/2.  A single-sample range integrates to 0.

#include "kvmem/spectral.hpp"

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace kvmem {

/// Uniformly sampled scalar function of time (memory kernel, or any trace).
struct KernelTrace {
    double dt = 0.0;
    std::vector<double> samples;

    std::size_t steps() const { return samples.empty() ? 0 : samples.size() - 1; }
    double duration() const { return dt * static_cast<double>(steps()); }
};

/// Discrete L²(0,T) norm by the trapezoid rule.
double l2_norm(const KernelTrace& k);
double l2_norm(std::span<const double> f, double dt);

/// Constitutive constants of the viscoelastic fluid.
struct PhysicalParameters {
    double lambda = 0.0;  ///< relaxation time
    double kappa1 = 0.0;
    double kappa2 = 0.0;
    double nu = 0.0;
};

/// Model coefficients implied by the constitutive constants.
struct DerivedParameters {
    double mu0 = 0.0;
    double mu1 = 0.0;
    double gamma = 0.0;
    double delta = 0.0;
};

/// μ₁ = 2κ₂/λ, μ₀ = (2/λ)(κ₁ − κ₂/λ), γ = (2/λ)(ν − κ₁/λ + κ₂/λ²), δ = 1/λ.
/// Throws InvalidArgument unless all four are strictly positive.
DerivedParameters derive_parameters(const PhysicalParameters& p);

struct ZeroKernel {};
/// k(t) = γ e^{−δt}
struct ExponentialKernel {
    double gamma = 0.0;
    double delta = 0.0;
};

struct KernelSpec {
    std::variant<ZeroKernel, ExponentialKernel, KernelTrace> shape;
    std::optional<PhysicalParameters> physical;
};

KernelSpec zero_kernel();
KernelSpec exponential_kernel(double gamma, double delta);
/// Exponential kernel with γ, δ taken from derive_parameters(p).
KernelSpec physical_kernel(const PhysicalParameters& p);
KernelSpec tabulated_kernel(KernelTrace trace);

/// Samples k at t_n = n·dt, n = 0..steps.  A tabulated kernel must share dt
/// and cover the requested range.
KernelTrace sample_kernel(const KernelSpec& spec, double dt, std::size_t steps);

/// Weight of sample i in a trapezoid sum over samples 0..n (in units of dt).
inline double trapezoid_weight(std::size_t i, std::size_t n)
{
    if (n == 0) return 0.0;
    return (i == 0 || i == n) ? 0.5 : 1.0;
}

/// Trapezoid approximation of ∫₀^{t_n} k(t_n − s) f(s) ds.
double convolve_scalar(const KernelTrace& k, std::span<const double> f, std::size_t n);

/// Componentwise trapezoid convolution of k with the stored fields of traj at t_n.
SpectralField convolve_field(const KernelTrace& k, const Trajectory& traj, std::size_t n);

/// The three pieces of ∫₀^{τ+t} k(τ+t−s) f(s) ds when k and f are known as a
/// history (k̂, f̂) on [0,τ] followed by a continuation (k_τ, f_τ) on [0,δ]:
///   early = ∫₀^t k_τ(t−s) f̂(s) ds
///   late  = ∫₀^t k̂(t−s) f_τ(s) ds
///   tail  = ∫_t^τ k̂(τ+t−s) f̂(s) ds
template <typename T>
struct SplitTerms {
    T early;
    T late;
    T tail;
};

/// Split of the memory integral at local time t_j = j·dt of the continuation
/// window.  Requires δ ≤ τ and j ≤ δ/dt.  When k_τ(0) = k̂(τ) and
/// f_τ(0) = f̂(τ), early + late + tail equals the monolithic trapezoid
/// convolution of the concatenated traces at τ + t_j.
SplitTerms<SpectralField> split_convolution(const KernelTrace& k_hat, const KernelTrace& k_tau,
                                            const Trajectory& v_hat, const Trajectory& v_tau,
                                            std::size_t j);
SplitTerms<double> split_convolution(const KernelTrace& k_hat, const KernelTrace& k_tau,
                                     std::span<const double> f_hat, std::span<const double> f_tau,
                                     std::size_t j);

/// Tail piece only: ∫_{t_j}^τ k̂(τ+t_j−s) f̂(s) ds.
SpectralField convolution_tail(const KernelTrace& k_hat, const Trajectory& v_hat, std::size_t j);
double convolution_tail(const KernelTrace& k_hat, std::span<const double> f_hat, std::size_t j);

/// h(t_j) = −∫_{t_j}^τ k̂(τ+t_j−s) Δv̂(s) ds, the frozen-history forcing of a
/// continuation window.  The pressure part is a gradient and drops out after
/// projection.  Valid for j ≤ τ/dt; h vanishes at t = τ.
SpectralField history_source(const KernelTrace& k_hat, const Trajectory& v_hat, std::size_t j);

/// Composite trapezoid primitive: out[n] = ∫₀^{t_n} f.
std::vector<SpectralField> cumulative_integral(const Trajectory& f);

struct YoungReport {
    double lhs = 0.0;    ///< ‖k∗f‖_{L²(0,τ)}
    double rhs = 0.0;    ///< τ^{1/2}‖k‖_{L²}‖f‖_{L²}
    double ratio = 0.0;  ///< lhs/rhs, 0 when rhs vanishes
    bool holds = false;  ///< ratio ≤ 1 + 5·dt
};

YoungReport check_young_bound(const KernelTrace& k, std::span<const double> f);

struct PrimitiveReport {
    double sup_norm = 0.0;
    double l2 = 0.0;
    double derivative_l2 = 0.0;  ///< forward-difference ‖∂ₜz‖_{L²}
    double sup_ratio = 0.0;      ///< ‖z‖_∞ / (τ^{1/2}‖∂ₜz‖)
    double l2_ratio = 0.0;       ///< ‖z‖_{L²} / (τ‖∂ₜz‖)
    bool holds = false;
};

/// Requires z(0) = 0 (InvalidArgument otherwise).
PrimitiveReport check_time_primitive_bound(const KernelTrace& z);

/// `t,k` CSV with a header row, values printed to 17 significant digits.
void write_kernel_csv(const std::string& path, const KernelTrace& k);
KernelTrace read_kernel_csv(const std::string& path);

void check_same_dt(double a, double b);

}  // namespace kvmem
