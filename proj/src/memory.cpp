#include "kvmem/memory.hpp"

#include "csv.hpp"
#include "kvmem/errors.hpp"

#include <cmath>

namespace kvmem {

void check_same_dt(double a, double b)
{
    if (!(a > 0.0) || !(b > 0.0) || std::abs(a - b) > 1e-12 * std::max(a, b))
        throw ShapeError("time steps do not match (" + detail::format_double(a) + " vs " +
                         detail::format_double(b) + ")");
}

double l2_norm(std::span<const double> f, double dt)
{
    const std::size_t n = f.empty() ? 0 : f.size() - 1;
    double sum = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) sum += trapezoid_weight(i, n) * f[i] * f[i];
    return std::sqrt(dt * sum);
}

double l2_norm(const KernelTrace& k) { return l2_norm(k.samples, k.dt); }

DerivedParameters derive_parameters(const PhysicalParameters& p)
{
    if (!(p.lambda > 0.0)) throw InvalidArgument("lambda must be positive");
    DerivedParameters d;
    const double l = p.lambda;
    d.mu1 = 2.0 * p.kappa2 / l;
    d.mu0 = (2.0 / l) * (p.kappa1 - p.kappa2 / l);
    d.gamma = (2.0 / l) * (p.nu - p.kappa1 / l + p.kappa2 / (l * l));
    d.delta = 1.0 / l;
    if (!(d.mu1 > 0.0)) throw InvalidArgument("derived mu1 = 2*kappa2/lambda is not positive");
    if (!(d.mu0 > 0.0)) throw InvalidArgument("derived mu0 = (2/lambda)(kappa1 - kappa2/lambda) is not positive");
    if (!(d.gamma > 0.0)) throw InvalidArgument("derived kernel amplitude gamma is not positive");
    return d;
}

KernelSpec zero_kernel() { return KernelSpec{ZeroKernel{}, std::nullopt}; }

KernelSpec exponential_kernel(double gamma, double delta)
{
    if (!std::isfinite(gamma) || !std::isfinite(delta))
        throw InvalidArgument("exponential kernel parameters must be finite");
    return KernelSpec{ExponentialKernel{gamma, delta}, std::nullopt};
}

KernelSpec physical_kernel(const PhysicalParameters& p)
{
    const DerivedParameters d = derive_parameters(p);
    return KernelSpec{ExponentialKernel{d.gamma, d.delta}, p};
}

KernelSpec tabulated_kernel(KernelTrace trace)
{
    if (!(trace.dt > 0.0) || trace.samples.empty())
        throw InvalidArgument("tabulated kernel needs dt > 0 and at least one sample");
    for (double x : trace.samples)
        if (!std::isfinite(x)) throw InvalidArgument("tabulated kernel contains non-finite samples");
    return KernelSpec{std::move(trace), std::nullopt};
}

KernelTrace sample_kernel(const KernelSpec& spec, double dt, std::size_t steps)
{
    if (!(dt > 0.0)) throw InvalidArgument("sample_kernel: dt must be positive");
    KernelTrace k{dt, std::vector<double>(steps + 1, 0.0)};
    if (const auto* e = std::get_if<ExponentialKernel>(&spec.shape)) {
        for (std::size_t n = 0; n <= steps; ++n)
            k.samples[n] = e->gamma * std::exp(-e->delta * dt * static_cast<double>(n));
    } else if (const auto* t = std::get_if<KernelTrace>(&spec.shape)) {
        check_same_dt(t->dt, dt);
        if (t->samples.size() < steps + 1)
            throw ShapeError("tabulated kernel is shorter than the requested time range");
        std::copy_n(t->samples.begin(), steps + 1, k.samples.begin());
    }
    return k;
}

double convolve_scalar(const KernelTrace& k, std::span<const double> f, std::size_t n)
{
    if (n >= k.samples.size() || n >= f.size())
        throw ShapeError("convolve_scalar: index beyond the sampled range");
    double sum = 0.0;
    for (std::size_t i = 0; i <= n; ++i) sum += trapezoid_weight(i, n) * k.samples[n - i] * f[i];
    return k.dt * sum;
}

SpectralField convolve_field(const KernelTrace& k, const Trajectory& traj, std::size_t n)
{
    check_same_dt(k.dt, traj.dt);
    if (n >= k.samples.size() || n >= traj.fields.size())
        throw ShapeError("convolve_field: index beyond the sampled range");
    SpectralField out(traj.fields.front().grid_ptr());
    for (std::size_t i = 0; i <= n; ++i) {
        const double w = k.dt * trapezoid_weight(i, n) * k.samples[n - i];
        if (w != 0.0) out.axpy(w, traj.fields[i]);
    }
    return out;
}

namespace {

void check_split_shapes(const KernelTrace& k_hat, const KernelTrace& k_tau, std::size_t hat_len,
                        std::size_t tau_len, std::size_t j)
{
    check_same_dt(k_hat.dt, k_tau.dt);
    const std::size_t m = k_hat.steps();
    if (hat_len != k_hat.samples.size())
        throw ShapeError("split_convolution: history kernel and trajectory lengths differ");
    if (k_tau.steps() > m)
        throw InvalidArgument("split_convolution: continuation window is longer than the history (delta > tau)");
    if (j > k_tau.steps() || j >= tau_len)
        throw InvalidArgument("split_convolution: time index outside the continuation window");
}

}  // namespace

SplitTerms<double> split_convolution(const KernelTrace& k_hat, const KernelTrace& k_tau,
                                     std::span<const double> f_hat, std::span<const double> f_tau,
                                     std::size_t j)
{
    check_split_shapes(k_hat, k_tau, f_hat.size(), f_tau.size(), j);
    const double dt = k_hat.dt;
    SplitTerms<double> s{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i <= j; ++i) {
        const double w = dt * trapezoid_weight(i, j);
        s.early += w * k_tau.samples[j - i] * f_hat[i];
        s.late += w * k_hat.samples[j - i] * f_tau[i];
    }
    s.tail = convolution_tail(k_hat, f_hat, j);
    return s;
}

SplitTerms<SpectralField> split_convolution(const KernelTrace& k_hat, const KernelTrace& k_tau,
                                            const Trajectory& v_hat, const Trajectory& v_tau,
                                            std::size_t j)
{
    check_same_dt(k_hat.dt, v_hat.dt);
    check_same_dt(k_tau.dt, v_tau.dt);
    check_split_shapes(k_hat, k_tau, v_hat.fields.size(), v_tau.fields.size(), j);
    const double dt = k_hat.dt;
    const GridPtr& grid = v_hat.fields.front().grid_ptr();
    SplitTerms<SpectralField> s{SpectralField(grid), SpectralField(grid), SpectralField(grid)};
    for (std::size_t i = 0; i <= j; ++i) {
        const double w = dt * trapezoid_weight(i, j);
        if (k_tau.samples[j - i] != 0.0) s.early.axpy(w * k_tau.samples[j - i], v_hat.fields[i]);
        if (k_hat.samples[j - i] != 0.0) s.late.axpy(w * k_hat.samples[j - i], v_tau.fields[i]);
    }
    s.tail = convolution_tail(k_hat, v_hat, j);
    return s;
}

double convolution_tail(const KernelTrace& k_hat, std::span<const double> f_hat, std::size_t j)
{
    const std::size_t m = k_hat.steps();
    if (f_hat.size() != k_hat.samples.size())
        throw ShapeError("convolution_tail: history kernel and trace lengths differ");
    if (j > m) throw InvalidArgument("convolution_tail: time index beyond the history length");
    double sum = 0.0;
    for (std::size_t i = j; i <= m; ++i)
        sum += trapezoid_weight(i - j, m - j) * k_hat.samples[m + j - i] * f_hat[i];
    return k_hat.dt * sum;
}

SpectralField convolution_tail(const KernelTrace& k_hat, const Trajectory& v_hat, std::size_t j)
{
    check_same_dt(k_hat.dt, v_hat.dt);
    const std::size_t m = k_hat.steps();
    if (v_hat.fields.size() != k_hat.samples.size())
        throw ShapeError("convolution_tail: history kernel and trajectory lengths differ");
    if (j > m) throw InvalidArgument("convolution_tail: time index beyond the history length");
    SpectralField out(v_hat.fields.front().grid_ptr());
    for (std::size_t i = j; i <= m; ++i) {
        const double w = k_hat.dt * trapezoid_weight(i - j, m - j) * k_hat.samples[m + j - i];
        if (w != 0.0) out.axpy(w, v_hat.fields[i]);
    }
    return out;
}

SpectralField history_source(const KernelTrace& k_hat, const Trajectory& v_hat, std::size_t j)
{
    SpectralField h = laplacian(convolution_tail(k_hat, v_hat, j));
    h *= -1.0;
    return h;
}

std::vector<SpectralField> cumulative_integral(const Trajectory& f)
{
    std::vector<SpectralField> out;
    if (f.fields.empty()) return out;
    out.reserve(f.fields.size());
    out.emplace_back(f.fields.front().grid_ptr());
    for (std::size_t n = 1; n < f.fields.size(); ++n) {
        SpectralField next = out.back();
        next.axpy(0.5 * f.dt, f.fields[n - 1]);
        next.axpy(0.5 * f.dt, f.fields[n]);
        out.push_back(std::move(next));
    }
    return out;
}

YoungReport check_young_bound(const KernelTrace& k, std::span<const double> f)
{
    if (f.size() != k.samples.size())
        throw ShapeError("check_young_bound: kernel and function lengths differ");
    YoungReport r;
    std::vector<double> conv(f.size());
    for (std::size_t n = 0; n < f.size(); ++n) conv[n] = convolve_scalar(k, f, n);
    r.lhs = l2_norm(conv, k.dt);
    r.rhs = std::sqrt(k.duration()) * l2_norm(k) * l2_norm(f, k.dt);
    r.ratio = r.rhs > 0.0 ? r.lhs / r.rhs : 0.0;
    r.holds = r.ratio <= 1.0 + 5.0 * k.dt;
    return r;
}

PrimitiveReport check_time_primitive_bound(const KernelTrace& z)
{
    if (z.samples.empty() || z.samples.front() != 0.0)
        throw InvalidArgument("check_time_primitive_bound: z(0) must be 0");
    PrimitiveReport r;
    double sum = 0.0;
    for (std::size_t n = 0; n + 1 < z.samples.size(); ++n) {
        const double d = (z.samples[n + 1] - z.samples[n]) / z.dt;
        sum += d * d;
    }
    r.derivative_l2 = std::sqrt(z.dt * sum);
    for (double x : z.samples) r.sup_norm = std::max(r.sup_norm, std::abs(x));
    r.l2 = l2_norm(z);
    const double tau = z.duration();
    if (r.derivative_l2 > 0.0) {
        r.sup_ratio = r.sup_norm / (std::sqrt(tau) * r.derivative_l2);
        r.l2_ratio = r.l2 / (tau * r.derivative_l2);
    }
    r.holds = r.sup_ratio <= 1.0 + 5.0 * z.dt && r.l2_ratio <= 1.0 + 5.0 * z.dt;
    return r;
}

void write_kernel_csv(const std::string& path, const KernelTrace& k)
{
    std::vector<double> t(k.samples.size());
    for (std::size_t n = 0; n < t.size(); ++n) t[n] = k.dt * static_cast<double>(n);
    detail::write_csv(path, {"t", "k"}, {&t, &k.samples});
}

KernelTrace read_kernel_csv(const std::string& path)
{
    auto table = detail::read_csv(path);
    if (table.header.size() != 2 || table.header[0] != "t" || table.header[1] != "k")
        throw IoError("'" + path + "': expected header 't,k'");
    const auto& t = table.columns[0];
    if (t.size() < 2) throw IoError("'" + path + "': need at least two samples");
    KernelTrace k{t[1] - t[0], table.columns[1]};
    for (std::size_t n = 1; n < t.size(); ++n)
        if (std::abs((t[n] - t[n - 1]) - k.dt) > 1e-9 * std::abs(k.dt))
            throw IoError("'" + path + "': time samples are not uniformly spaced");
    if (!(k.dt > 0.0)) throw IoError("'" + path + "': time samples must increase");
    return k;
}

}  // namespace kvmem
