#include "kvmem/spectral.hpp"

#include "kvmem/errors.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>

namespace kvmem {

namespace {

// FFTW's planner is not re-entrant; plan execution on fresh arrays is.
std::mutex& planner_mutex()
{
    static std::mutex m;
    return m;
}

int wavenumber(int i, int n) { return i < n / 2 ? i : i - n; }

int wrap(int xi, int n) { return ((xi % n) + n) % n; }

}  // namespace

Grid::Grid(int dim, int modes_per_axis) : dim_(dim), n_(modes_per_axis)
{
    if (dim != 2 && dim != 3)
        throw InvalidArgument("grid dimension must be 2 or 3");
    if (n_ < 4 || n_ % 2 != 0)
        throw InvalidArgument("modes per axis must be an even integer >= 4");

    size_ = 1;
    for (int a = 0; a < dim_; ++a) size_ *= static_cast<std::size_t>(n_);

    xi_.resize(size_);
    k2_.resize(size_);
    mask_.resize(size_);
    neg_.resize(size_);
    for (std::size_t m = 0; m < size_; ++m) {
        std::size_t rem = m;
        std::array<int, 3> xi{0, 0, 0};
        for (int a = dim_ - 1; a >= 0; --a) {
            xi[a] = wavenumber(static_cast<int>(rem % n_), n_);
            rem /= n_;
        }
        xi_[m] = xi;
        double k2 = 0.0;
        bool keep = true;
        for (int a = 0; a < dim_; ++a) {
            k2 += static_cast<double>(xi[a]) * xi[a];
            if (3 * std::abs(xi[a]) > n_) keep = false;
        }
        k2_[m] = k2;
        mask_[m] = keep ? 1 : 0;
    }
    for (std::size_t m = 0; m < size_; ++m) {
        const auto& xi = xi_[m];
        neg_[m] = index_of({-xi[0], -xi[1], -xi[2]});
    }

    std::vector<int> dims(dim_, n_);
    std::vector<fftw_complex> scratch_in(size_), scratch_out(size_);
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan_fwd_ = fftw_plan_dft(dim_, dims.data(), scratch_in.data(), scratch_out.data(),
                              FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    plan_bwd_ = fftw_plan_dft(dim_, dims.data(), scratch_in.data(), scratch_out.data(),
                              FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
}

Grid::~Grid()
{
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (plan_fwd_) fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
    if (plan_bwd_) fftw_destroy_plan(static_cast<fftw_plan>(plan_bwd_));
}

std::size_t Grid::index_of(std::array<int, 3> xi) const
{
    std::size_t m = 0;
    for (int a = 0; a < dim_; ++a)
        m = m * n_ + static_cast<std::size_t>(wrap(xi[a], n_));
    return m;
}

double Grid::volume() const { return std::pow(2.0 * std::numbers::pi, dim_); }

void Grid::forward(const Complex* phys, Complex* spec) const
{
    // fftw_execute_dft does not modify its input for out-of-place c2c plans.
    auto* in = reinterpret_cast<fftw_complex*>(const_cast<Complex*>(phys));
    fftw_execute_dft(static_cast<fftw_plan>(plan_fwd_), in, reinterpret_cast<fftw_complex*>(spec));
    const double scale = 1.0 / static_cast<double>(size_);
    for (std::size_t m = 0; m < size_; ++m) spec[m] *= scale;
}

void Grid::inverse(const Complex* spec, Complex* phys) const
{
    auto* in = reinterpret_cast<fftw_complex*>(const_cast<Complex*>(spec));
    fftw_execute_dft(static_cast<fftw_plan>(plan_bwd_), in, reinterpret_cast<fftw_complex*>(phys));
}

double Grid::coordinate(std::size_t p, int axis) const
{
    std::size_t rem = p;
    for (int a = dim_ - 1; a > axis; --a) rem /= n_;
    return 2.0 * std::numbers::pi * static_cast<double>(rem % n_) / n_;
}

GridPtr make_grid(int dim, int modes_per_axis)
{
    return std::make_shared<const Grid>(dim, modes_per_axis);
}

// ---------------------------------------------------------------------------

SpectralField::SpectralField(GridPtr grid) : grid_(std::move(grid))
{
    data_.assign(static_cast<std::size_t>(grid_->dim()) * grid_->size(), Complex{});
}

void check_same_grid(const SpectralField& a, const SpectralField& b)
{
    if (a.empty() || b.empty())
        throw ShapeError("operation on an uninitialized field");
    if (a.grid_ptr() != b.grid_ptr() &&
        (a.grid().dim() != b.grid().dim() || a.grid().n() != b.grid().n()))
        throw ShapeError("fields live on different grids");
}

SpectralField& SpectralField::operator+=(const SpectralField& o)
{
    check_same_grid(*this, o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    solenoidal_ = solenoidal_ && o.solenoidal_;
    return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& o)
{
    check_same_grid(*this, o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    solenoidal_ = solenoidal_ && o.solenoidal_;
    return *this;
}

SpectralField& SpectralField::operator*=(double s)
{
    for (auto& c : data_) c *= s;
    return *this;
}

SpectralField& SpectralField::axpy(double a, const SpectralField& x)
{
    check_same_grid(*this, x);
    const std::size_t n = data_.size();
    Complex* __restrict dst = data_.data();
    const Complex* __restrict src = x.data_.data();
    for (std::size_t i = 0; i < n; ++i) dst[i] += a * src[i];
    solenoidal_ = solenoidal_ && x.solenoidal_;
    return *this;
}

void SpectralField::set_zero()
{
    for (auto& c : data_) c = Complex{};
}

SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
SpectralField operator*(double s, SpectralField a) { return a *= s; }

// ---------------------------------------------------------------------------

PhysicalField to_physical(const SpectralField& f)
{
    const Grid& g = f.grid();
    PhysicalField p{f.grid_ptr(), {}};
    std::vector<Complex> buf(g.size());
    for (int c = 0; c < f.components(); ++c) {
        g.inverse(f.component(c).data(), buf.data());
        std::vector<double> vals(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) vals[i] = buf[i].real();
        p.values.push_back(std::move(vals));
    }
    return p;
}

SpectralField from_physical(const PhysicalField& p)
{
    SpectralField f(p.grid);
    const Grid& g = *p.grid;
    if (static_cast<int>(p.values.size()) != g.dim())
        throw ShapeError("physical field has the wrong number of components");
    std::vector<Complex> buf(g.size());
    for (int c = 0; c < g.dim(); ++c) {
        for (std::size_t i = 0; i < g.size(); ++i) buf[i] = p.values[c][i];
        g.forward(buf.data(), f.component(c).data());
    }
    return f;
}

SpectralField leray_project(const SpectralField& f)
{
    const Grid& g = f.grid();
    SpectralField out(f.grid_ptr());
    const int d = g.dim();
    for (std::size_t m = 0; m < g.size(); ++m) {
        const double k2 = g.k2(m);
        if (k2 == 0.0) continue;
        const auto& xi = g.wavevector(m);
        Complex dot{};
        for (int c = 0; c < d; ++c) dot += static_cast<double>(xi[c]) * f.at(c, m);
        for (int c = 0; c < d; ++c) out.at(c, m) = f.at(c, m) - (static_cast<double>(xi[c]) / k2) * dot;
    }
    out.mark_solenoidal(true);
    return out;
}

SpectralField helmholtz_inverse(const SpectralField& f, double mu1)
{
    if (mu1 < 0.0) throw InvalidArgument("helmholtz_inverse: mu1 must be non-negative");
    const Grid& g = f.grid();
    SpectralField out = f;
    for (int c = 0; c < g.dim(); ++c) {
        auto comp = out.component(c);
        for (std::size_t m = 0; m < g.size(); ++m) comp[m] /= (1.0 + mu1 * g.k2(m));
    }
    return out;
}

SpectralField apply_helmholtz(const SpectralField& f, double mu1)
{
    const Grid& g = f.grid();
    SpectralField out = f;
    for (int c = 0; c < g.dim(); ++c) {
        auto comp = out.component(c);
        for (std::size_t m = 0; m < g.size(); ++m) comp[m] *= (1.0 + mu1 * g.k2(m));
    }
    return out;
}

SpectralField laplacian(const SpectralField& f)
{
    const Grid& g = f.grid();
    SpectralField out = f;
    for (int c = 0; c < g.dim(); ++c) {
        auto comp = out.component(c);
        for (std::size_t m = 0; m < g.size(); ++m) comp[m] *= -g.k2(m);
    }
    return out;
}

SpectralField gradient(const PressureField& s)
{
    const Grid& g = *s.grid;
    SpectralField out(s.grid);
    for (std::size_t m = 0; m < g.size(); ++m) {
        const auto& xi = g.wavevector(m);
        for (int c = 0; c < g.dim(); ++c) out.at(c, m) = Complex(0.0, xi[c]) * s.coeffs[m];
    }
    return out;
}

SpectralField apply_dealias(const SpectralField& f)
{
    const Grid& g = f.grid();
    SpectralField out = f;
    for (int c = 0; c < g.dim(); ++c) {
        auto comp = out.component(c);
        for (std::size_t m = 0; m < g.size(); ++m)
            if (!g.retained(m)) comp[m] = Complex{};
    }
    return out;
}

SpectralField advect_raw(const SpectralField& a, const SpectralField& b)
{
    check_same_grid(a, b);
    const Grid& g = a.grid();
    const int d = g.dim();
    const std::size_t n = g.size();

    std::vector<std::vector<Complex>> a_phys(d, std::vector<Complex>(n));
    for (int j = 0; j < d; ++j) g.inverse(a.component(j).data(), a_phys[j].data());

    SpectralField out(a.grid_ptr());
    std::vector<Complex> deriv(n), phys(n), acc(n);
    for (int i = 0; i < d; ++i) {
        std::fill(acc.begin(), acc.end(), Complex{});
        auto bi = b.component(i);
        for (int j = 0; j < d; ++j) {
            for (std::size_t m = 0; m < n; ++m)
                deriv[m] = Complex(0.0, g.wavevector(m)[j]) * bi[m];
            g.inverse(deriv.data(), phys.data());
            for (std::size_t p = 0; p < n; ++p) acc[p] += a_phys[j][p].real() * phys[p].real();
        }
        g.forward(acc.data(), out.component(i).data());
    }
    return apply_dealias(out);
}

SpectralField advect(const SpectralField& a, const SpectralField& b)
{
    return leray_project(advect_raw(a, b));
}

double divergence_norm(const SpectralField& f)
{
    const Grid& g = f.grid();
    double worst = 0.0;
    for (std::size_t m = 0; m < g.size(); ++m) {
        const auto& xi = g.wavevector(m);
        Complex dot{};
        for (int c = 0; c < g.dim(); ++c) dot += static_cast<double>(xi[c]) * f.at(c, m);
        worst = std::max(worst, std::abs(dot));
    }
    return worst;
}

double mean_mode_norm(const SpectralField& f)
{
    double worst = 0.0;
    for (int c = 0; c < f.components(); ++c) worst = std::max(worst, std::abs(f.at(c, 0)));
    return worst;
}

double l2_inner(const SpectralField& a, const SpectralField& b)
{
    check_same_grid(a, b);
    const auto& x = a.data();
    const auto& y = b.data();
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        sum += x[i].real() * y[i].real() + x[i].imag() * y[i].imag();
    return a.grid().volume() * sum;
}

double sobolev_norm(const SpectralField& f, double s)
{
    const Grid& g = f.grid();
    double sum = 0.0;
    for (int c = 0; c < g.dim(); ++c) {
        auto comp = f.component(c);
        for (std::size_t m = 0; m < g.size(); ++m) {
            const double w = s == 0.0 ? 1.0 : std::pow(1.0 + g.k2(m), s);
            sum += w * std::norm(comp[m]);
        }
    }
    return std::sqrt(g.volume() * sum);
}

double measurement_functional(const SpectralField& phi, const SpectralField& u, double mu1)
{
    check_same_grid(phi, u);
    const Grid& g = phi.grid();
    double sum = 0.0;
    for (int c = 0; c < g.dim(); ++c) {
        auto p = phi.component(c);
        auto q = u.component(c);
        for (std::size_t m = 0; m < g.size(); ++m) {
            const double w = 1.0 + mu1 * g.k2(m);
            sum += w * (p[m].real() * q[m].real() + p[m].imag() * q[m].imag());
        }
    }
    return g.volume() * sum;
}

PressureField recover_pressure(const SpectralField& a, const SpectralField& b)
{
    const SpectralField conv = advect_raw(a, b);
    const Grid& g = a.grid();
    PressureField p{a.grid_ptr(), std::vector<Complex>(g.size())};
    for (std::size_t m = 0; m < g.size(); ++m) {
        const double k2 = g.k2(m);
        if (k2 == 0.0) continue;
        const auto& xi = g.wavevector(m);
        Complex div{};
        for (int c = 0; c < g.dim(); ++c) div += Complex(0.0, xi[c]) * conv.at(c, m);
        p.coeffs[m] = div / k2;
    }
    return p;
}

PressureField recover_pressure(const SpectralField& u) { return recover_pressure(u, u); }

}  // namespace kvmem
