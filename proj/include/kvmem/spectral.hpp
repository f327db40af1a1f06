#pragma once

/// @file spectral.hpp
/// @brief Fourier representation of real, periodic vector fields on [0,2π)^d.
///
/// A field is stored by its coefficients f̂(ξ) in the expansion
///   f(x) = Σ_ξ f̂(ξ) e^{iξ·x},
/// one complex array per velocity component.  All differential operators
/// (Laplacian, gradient, Leray projection, (I - μ₁Δ)^{-1}) are diagonal in
/// this basis; only the convective product goes through physical space.

#include <array>
#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace kvmem {

using Complex = std::complex<double>;

/// Periodic box discretization with N modes per axis and a 2/3-rule mask.
class Grid {
public:
    Grid(int dim, int modes_per_axis);
    ~Grid();
    Grid(const Grid&) = delete;
    Grid& operator=(const Grid&) = delete;

    int dim() const { return dim_; }
    int n() const { return n_; }
    std::size_t size() const { return size_; }

    /// Wavevector of the mode stored at flat index m (unused axes are 0).
    const std::array<int, 3>& wavevector(std::size_t m) const { return xi_[m]; }
    double k2(std::size_t m) const { return k2_[m]; }
    /// False for modes removed by the 2/3 rule (any |ξ_i| > N/3).
    bool retained(std::size_t m) const { return mask_[m] != 0; }
    /// Flat index of wavevector ξ, each component in [-N/2, N/2).
    std::size_t index_of(std::array<int, 3> xi) const;
    std::size_t index_of_negative(std::size_t m) const { return neg_[m]; }

    /// (2π)^dim
    double volume() const;

    /// Normalized analysis transform: spec[m] = N^{-d} Σ_x phys(x) e^{-iξ·x}.
    void forward(const Complex* phys, Complex* spec) const;
    /// Synthesis transform: phys(x) = Σ_ξ spec(ξ) e^{iξ·x}.
    void inverse(const Complex* spec, Complex* phys) const;

    /// Grid coordinate of physical point p along axis a.
    double coordinate(std::size_t p, int axis) const;

private:
    int dim_;
    int n_;
    std::size_t size_;
    std::vector<std::array<int, 3>> xi_;
    std::vector<double> k2_;
    std::vector<unsigned char> mask_;
    std::vector<std::size_t> neg_;
    void* plan_fwd_ = nullptr;
    void* plan_bwd_ = nullptr;
};

using GridPtr = std::shared_ptr<const Grid>;

GridPtr make_grid(int dim, int modes_per_axis);

/// Divergence-free (or general) vector field in Fourier space.
class SpectralField {
public:
    SpectralField() = default;
    explicit SpectralField(GridPtr grid);

    const Grid& grid() const { return *grid_; }
    const GridPtr& grid_ptr() const { return grid_; }
    bool empty() const { return !grid_; }
    int components() const { return grid_->dim(); }
    std::size_t modes() const { return grid_->size(); }

    std::span<Complex> component(int c) { return {data_.data() + c * modes(), modes()}; }
    std::span<const Complex> component(int c) const { return {data_.data() + c * modes(), modes()}; }
    Complex& at(int c, std::size_t m) { return data_[c * modes() + m]; }
    const Complex& at(int c, std::size_t m) const { return data_[c * modes() + m]; }

    std::vector<Complex>& data() { return data_; }
    const std::vector<Complex>& data() const { return data_; }

    /// Set by leray_project and preserved by linear combinations of solenoidal fields.
    bool solenoidal() const { return solenoidal_; }
    void mark_solenoidal(bool s) { solenoidal_ = s; }

    SpectralField& operator+=(const SpectralField& o);
    SpectralField& operator-=(const SpectralField& o);
    SpectralField& operator*=(double s);
    /// this += a * x
    SpectralField& axpy(double a, const SpectralField& x);
    void set_zero();

private:
    GridPtr grid_;
    std::vector<Complex> data_;
    bool solenoidal_ = false;
};

SpectralField operator+(SpectralField a, const SpectralField& b);
SpectralField operator-(SpectralField a, const SpectralField& b);
SpectralField operator*(double s, SpectralField a);

/// Zero-mean scalar field (pressure); coefficient at ξ=0 is always zero.
struct PressureField {
    GridPtr grid;
    std::vector<Complex> coeffs;
};

/// Fields sampled at t_n = n·dt, n = 0..M, on one grid.
struct Trajectory {
    double dt = 0.0;
    std::vector<SpectralField> fields;

    std::size_t steps() const { return fields.empty() ? 0 : fields.size() - 1; }
    double duration() const { return dt * static_cast<double>(steps()); }
};

/// Physical-space samples, one real array per component (row-major grid).
struct PhysicalField {
    GridPtr grid;
    std::vector<std::vector<double>> values;
};

PhysicalField to_physical(const SpectralField& f);
SpectralField from_physical(const PhysicalField& p);

SpectralField leray_project(const SpectralField& f);
SpectralField helmholtz_inverse(const SpectralField& f, double mu1);
SpectralField apply_helmholtz(const SpectralField& f, double mu1);
SpectralField laplacian(const SpectralField& f);
SpectralField gradient(const PressureField& s);
SpectralField apply_dealias(const SpectralField& f);

/// Dealiased pseudo-spectral (a·∇)b without projection.
SpectralField advect_raw(const SpectralField& a, const SpectralField& b);
/// Leray-projected, dealiased (a·∇)b.
SpectralField advect(const SpectralField& a, const SpectralField& b);

/// max_ξ |ξ·f̂(ξ)|
double divergence_norm(const SpectralField& f);
/// Largest modulus of the ξ = 0 coefficients.
double mean_mode_norm(const SpectralField& f);

double l2_inner(const SpectralField& a, const SpectralField& b);
double sobolev_norm(const SpectralField& f, double s);

/// ∫ (I - μ₁Δ)φ · u dx
double measurement_functional(const SpectralField& phi, const SpectralField& u, double mu1);

/// Pressure balancing the convective term (a·∇)b:  -Δp = ∇·[(a·∇)b], zero mean.
PressureField recover_pressure(const SpectralField& a, const SpectralField& b);
/// Same with a = b = u (full nonlinear system).
PressureField recover_pressure(const SpectralField& u);

void check_same_grid(const SpectralField& a, const SpectralField& b);

}  // namespace kvmem
