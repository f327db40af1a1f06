#include "kvmem/selftest.hpp"

#include "kvmem/continuation.hpp"
#include "kvmem/fields.hpp"

#include <cmath>
#include <random>

namespace kvmem {

namespace {

class Collector {
public:
    explicit Collector(std::vector<SelftestCase>& out) : out_(out) {}

    /// Records value ≤ limit.
    void below(const std::string& suite, const std::string& name, double value, double limit)
    {
        out_.push_back({suite, name, std::isfinite(value) && value <= limit, value, limit});
    }
    /// Records value ≥ limit.
    void above(const std::string& suite, const std::string& name, double value, double limit)
    {
        out_.push_back({suite, name, std::isfinite(value) && value >= limit, value, limit});
    }

private:
    std::vector<SelftestCase>& out_;
};

double physical_l2(const SpectralField& f)
{
    const PhysicalField p = to_physical(f);
    const Grid& g = f.grid();
    double sum = 0.0;
    for (const auto& comp : p.values)
        for (double x : comp) sum += x * x;
    return std::sqrt(sum * g.volume() / static_cast<double>(g.size()));
}

void spectral_suite(Collector& c)
{
    for (auto [dim, n] : {std::pair{2, 16}, std::pair{3, 8}}) {
        const GridPtr g = make_grid(dim, n);
        const std::string tag = std::to_string(dim) + "D";
        double idem = 0.0, div = 0.0, grad = 0.0, helm = 0.0, skew = 0.0, parseval = 0.0;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            const SpectralField f = random_field(g, seed, n / 2, false);
            const double fn = sobolev_norm(f, 0.0);
            const SpectralField p = leray_project(f);
            idem = std::max(idem, sobolev_norm(leray_project(p) - p, 0.0) / fn);
            div = std::max(div, divergence_norm(p) / fn);
            const SpectralField r = random_field(g, seed + 100, n / 2, false);
            const PressureField s{g, {r.component(0).begin(), r.component(0).end()}};
            grad = std::max(grad, sobolev_norm(leray_project(gradient(s)), 0.0));
            helm = std::max(helm, sobolev_norm(apply_helmholtz(helmholtz_inverse(f, 0.7), 0.7) - f, 0.0) / fn);
            const SpectralField a = random_field(g, seed + 200, n / 3, true);
            const SpectralField b = random_field(g, seed + 300, n / 3, true);
            const double scale = sobolev_norm(a, 1.0) * std::pow(sobolev_norm(b, 1.0), 2);
            skew = std::max(skew, std::abs(l2_inner(advect(a, b), b)) / scale);
            parseval = std::max(parseval, std::abs(physical_l2(f) - fn) / fn);
        }
        c.below("spectral", tag + " projection idempotency", idem, 1e-12);
        c.below("spectral", tag + " divergence annihilation", div, 1e-12);
        c.below("spectral", tag + " gradient annihilation", grad, 1e-12);
        c.below("spectral", tag + " helmholtz round trip", helm, 1e-12);
        c.below("spectral", tag + " advection skew-symmetry", skew, 1e-10);
        c.below("spectral", tag + " parseval", parseval, 1e-10);
    }
}

void memory_suite(Collector& c)
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        KernelTrace k{0.01, std::vector<double>(101)};
        std::vector<double> f(101);
        for (std::size_t i = 0; i <= 100; ++i) {
            k.samples[i] = unit(rng);
            f[i] = unit(rng);
        }
        worst = std::max(worst, check_young_bound(k, f).ratio);
    }
    c.below("memory", "young bound ratio", worst, 1.0 + 5.0 * 0.01);

    KernelTrace z{0.01, std::vector<double>(101)};
    for (std::size_t i = 0; i <= 100; ++i) z.samples[i] = std::sin(0.01 * static_cast<double>(i));
    const PrimitiveReport pr = check_time_primitive_bound(z);
    c.below("memory", "time primitive bound", std::max(pr.sup_ratio, pr.l2_ratio), 1.0 + 5.0 * 0.01);

    // ∫₀¹ e^{−(1−s)} cos s ds = (sin 1 + cos 1 − e^{−1}) / 2
    const double exact = 0.5 * (std::sin(1.0) + std::cos(1.0) - std::exp(-1.0));
    double err[2];
    for (int r = 0; r < 2; ++r) {
        const std::size_t n = 20u << r;
        const double dt = 1.0 / static_cast<double>(n);
        const KernelTrace k = sample_kernel(exponential_kernel(1.0, 1.0), dt, n);
        std::vector<double> f(n + 1);
        for (std::size_t i = 0; i <= n; ++i) f[i] = std::cos(dt * static_cast<double>(i));
        err[r] = std::abs(convolve_scalar(k, f, n) - exact);
    }
    c.above("memory", "convolution order", std::log2(err[0] / err[1]), 1.9);
}

void forward_suite(Collector& c)
{
    const GridPtr g = make_grid(2, 8);
    ModelParams p;
    p.mu0 = 1.5;
    p.mu1 = 1.0;
    p.mode = Mode::oseen;
    p.u_inf = SpectralField(g);
    const SpectralField u0 = build_field({"shear", 1.0, {}}, g);
    const double dt = 0.01;
    const ForwardRun run = run_direct(u0, p, 0.1, dt, u0);
    const double factor = (2.0 - 0.5 * 1.5 * dt) / (2.0 + 0.5 * 1.5 * dt);
    const std::size_t m = g->index_of({0, 1, 0});
    const double expected = std::abs(u0.at(0, m)) * std::pow(factor, 10);
    c.below("forward", "single-mode Crank-Nicolson decay", std::abs(std::abs(run.u.fields.back().at(0, m)) - expected),
            1e-12);
    c.below("forward", "divergence preserved", divergence_norm(run.u.fields.back()), 1e-12);
}

void inverse_suite(Collector& c)
{
    const GridPtr g = make_grid(2, 8);
    ProblemSetup s;
    s.params.mu0 = 1.5;
    s.params.mu1 = 1.0;
    s.params.mode = Mode::oseen;
    s.params.u_inf = build_field({"taylor_green", 1.0, {}}, g);
    s.u0 = build_field({"multi", 0.1, {}}, g);
    s.phi = build_field({"taylor_green", 1.0, {}}, g);
    const double dt = 0.005;
    s.measurement = synthesize_twin(s, zero_kernel(), 0.1, dt).measurement;
    const AssumptionReport rep = check_assumptions(s, Mode::oseen);
    c.below("inverse", "twin passes assumption checks", rep.passed() ? 0.0 : 1.0, 0.0);
    FixedPointConfig cfg;
    cfg.tau = 0.1;
    cfg.dt = dt;
    const FixedPointResult r = fixed_point_solve(s, cfg, Mode::oseen);
    c.below("inverse", "zero-kernel twin converges", r.converged ? 0.0 : 1.0, 0.0);
    c.below("inverse", "zero-kernel twin kernel norm", l2_norm(r.k), 1e-6);
    double worst = 0.0;
    for (double q : r.contraction_ratios) worst = std::max(worst, q);
    c.below("inverse", "contraction ratios", worst, 1.0 - 1e-12);
}

void continuation_suite(Collector& c)
{
    const GridPtr g = make_grid(2, 8);
    const std::size_t m = 20, d = 10;
    const double dt = 0.01;
    const SpectralField a = random_field(g, 11, 2, true);
    KernelTrace k_full{dt, {}};
    Trajectory v_full{dt, {}};
    for (std::size_t i = 0; i <= m + d; ++i) {
        const double t = dt * static_cast<double>(i);
        k_full.samples.push_back(std::exp(-t) * std::cos(3.0 * t));
        v_full.fields.push_back(std::sin(2.0 * t) * a);
    }
    KernelTrace k_hat{dt, {k_full.samples.begin(), k_full.samples.begin() + m + 1}};
    KernelTrace k_tau{dt, {k_full.samples.begin() + m, k_full.samples.end()}};
    Trajectory v_hat{dt, {v_full.fields.begin(), v_full.fields.begin() + m + 1}};
    Trajectory v_tau{dt, {v_full.fields.begin() + m, v_full.fields.end()}};
    double worst = 0.0;
    for (std::size_t j = 0; j <= d; ++j) {
        const auto s = split_convolution(k_hat, k_tau, v_hat, v_tau, j);
        const SpectralField split = s.early + s.late + s.tail;
        worst = std::max(worst, sobolev_norm(split - convolve_field(k_full, v_full, m + j), 0.0));
    }
    c.below("continuation", "split equals monolithic convolution", worst, 1e-13);
}

}  // namespace

std::vector<SelftestCase> run_selftest()
{
    std::vector<SelftestCase> out;
    Collector c(out);
    spectral_suite(c);
    memory_suite(c);
    forward_suite(c);
    inverse_suite(c);
    continuation_suite(c);
    return out;
}

}  // namespace kvmem
