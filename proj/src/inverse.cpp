#include "kvmem/inverse.hpp"

#include "kvmem/errors.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace kvmem {

namespace {

std::string assumption_name(Mode mode, int index)
{
    return std::string(mode == Mode::kv ? "A" : "H") + std::to_string(index);
}

double divergence_threshold(const SpectralField& f) { return 1e-10 * (1.0 + sobolev_norm(f, 1.0)); }

bool finite_field(const SpectralField& f)
{
    for (const Complex& c : f.data())
        if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) return false;
    return true;
}

const SpectralField& advecting_field(Mode mode, const SpectralField& u, const SpectralField& u_inf)
{
    return mode == Mode::kv ? u : u_inf;
}

ModelParams params_for(const ProblemSetup& setup, Mode mode)
{
    ModelParams p = setup.params;
    p.mode = mode;
    return p;
}

/// ‖a − b‖²_{H²}
double h2_distance_sq(const SpectralField& a, const SpectralField& b)
{
    const Grid& g = a.grid();
    double sum = 0.0;
    for (int c = 0; c < g.dim(); ++c) {
        auto x = a.component(c);
        auto y = b.component(c);
        for (std::size_t m = 0; m < g.size(); ++m) {
            const double w = (1.0 + g.k2(m)) * (1.0 + g.k2(m));
            sum += w * std::norm(x[m] - y[m]);
        }
    }
    return g.volume() * sum;
}

double h2_norm_sq(const SpectralField& a)
{
    const double n = sobolev_norm(a, 2.0);
    return n * n;
}

/// Terms of one sweep that depend on the frozen iterate ṽ only.
struct Frozen {
    std::vector<SpectralField> adv;  ///< unprojected advective part A(ṽ)
    std::vector<double> s;           ///< ⟨ṽ, Δφ⟩
};

Frozen freeze(const WindowProblem& w, const Trajectory& v_tilde)
{
    const std::size_t n = v_tilde.steps();
    if (v_tilde.fields.empty()) throw InvalidArgument("empty iterate");
    check_same_dt(v_tilde.dt, w.dt);
    if (w.r2.size() < n + 1) throw ShapeError("measurement is shorter than the iterate");
    Frozen f;
    f.adv.reserve(n + 1);
    f.s.resize(n + 1);
    ModelParams p;
    p.mode = w.mode;
    p.u_inf = w.u_inf;
    std::vector<SpectralField> primitive;
    if (w.mode == Mode::kv) primitive = cumulative_integral(v_tilde);
    for (std::size_t j = 0; j <= n; ++j) {
        const SpectralField& vj = v_tilde.fields[j];
        f.s[j] = l2_inner(w.lap_phi, vj);
        if (w.mode == Mode::kv) {
            SpectralField U = w.u_start + primitive[j];
            f.adv.push_back(advective_derivative(vj, U, p));
        } else {
            f.adv.push_back(advective_derivative(vj, vj, p));
        }
    }
    return f;
}

KernelTrace kernel_from_frozen(const WindowProblem& w, const Frozen& f, const KernelTrace& k_tilde)
{
    const std::size_t n = f.s.size() - 1;
    if (k_tilde.samples.size() != n + 1) throw ShapeError("kernel iterate and velocity iterate lengths differ");
    check_same_dt(k_tilde.dt, w.dt);
    KernelTrace k{w.dt, std::vector<double>(n + 1)};
    for (std::size_t j = 0; j <= n; ++j) {
        double memory = 0.0;
        if (w.history) {
            const auto split = split_convolution(w.history->k, k_tilde, w.history->s, f.s, j);
            memory = split.early + split.late + split.tail;
        } else {
            memory = convolve_scalar(k_tilde, f.s, j);
        }
        const double adv = l2_inner(w.phi, f.adv[j]);
        k.samples[j] = w.alpha * (w.r2[j] - w.mu0 * f.s[j] - memory + adv);
    }
    return k;
}

/// ∫₀^{offset+t_j} k(offset+t_j−s) ṽ(s) ds over the glued history and the current window.
SpectralField memory_field(const WindowProblem& w, const KernelTrace& k, const Trajectory& v_tilde, std::size_t j)
{
    if (!w.history) return convolve_field(k, v_tilde, j);
    const WindowHistory& h = *w.history;
    SpectralField out = h.tail.at(j);
    for (std::size_t i = 0; i <= j; ++i) {
        const double wt = w.dt * trapezoid_weight(i, j);
        if (k.samples[j - i] != 0.0) out.axpy(wt * k.samples[j - i], h.v.fields[i]);
        if (h.k.samples[j - i] != 0.0) out.axpy(wt * h.k.samples[j - i], v_tilde.fields[i]);
    }
    return out;
}

Trajectory ibvp_from_frozen(const WindowProblem& w, const Frozen& f, const KernelTrace& k, const Trajectory& v_tilde)
{
    const std::size_t n = v_tilde.steps();
    if (k.samples.size() != n + 1) throw ShapeError("kernel and velocity iterate lengths differ");
    check_same_dt(k.dt, w.dt);
    const SpectralField lap_u0 = laplacian(w.u0);

    std::vector<SpectralField> forcing;
    forcing.reserve(n + 1);
    for (std::size_t j = 0; j <= n; ++j) {
        SpectralField g = laplacian(memory_field(w, k, v_tilde, j));
        g.axpy(k.samples[j], lap_u0);
        g -= f.adv[j];
        forcing.push_back(leray_project(g));
    }

    const Grid& grid = w.v_start.grid();
    const double dt = w.dt;
    Trajectory v{dt, {}};
    v.fields.reserve(n + 1);
    v.fields.push_back(w.v_start);
    for (std::size_t j = 0; j < n; ++j) {
        const SpectralField& prev = v.fields.back();
        SpectralField next(prev.grid_ptr());
        for (int c = 0; c < grid.dim(); ++c) {
            auto pc = prev.component(c);
            auto g0 = forcing[j].component(c);
            auto g1 = forcing[j + 1].component(c);
            auto nc = next.component(c);
            for (std::size_t m = 0; m < grid.size(); ++m) {
                const double k2 = grid.k2(m);
                const double lhs = 1.0 + w.mu1 * k2 + 0.5 * w.mu0 * k2 * dt;
                const double rhs = 1.0 + w.mu1 * k2 - 0.5 * w.mu0 * k2 * dt;
                nc[m] = (rhs * pc[m] + 0.5 * dt * (g0[m] + g1[m])) / lhs;
            }
        }
        next.mark_solenoidal(true);
        if (!finite_field(next))
            throw DivergenceError(j, "linear solve produced non-finite values at step " + std::to_string(j));
        v.fields.push_back(std::move(next));
    }
    return v;
}

std::size_t window_steps(double tau, double dt)
{
    if (!(dt > 0.0) || !(tau > 0.0)) throw InvalidArgument("tau and dt must be positive");
    const double ratio = tau / dt;
    const auto steps = static_cast<std::size_t>(std::llround(ratio));
    if (steps == 0 || std::abs(ratio - static_cast<double>(steps)) > 1e-9 * ratio)
        throw InvalidArgument("tau must be an integer multiple of dt");
    return steps;
}

}  // namespace

// ---------------------------------------------------------------------------

bool AssumptionReport::passed() const { return first_failure() == nullptr; }

const AssumptionCheck* AssumptionReport::first_failure() const
{
    for (const auto& c : checks)
        if (!c.passed && !c.skipped) return &c;
    return nullptr;
}

double alpha_inverse(const ProblemSetup& setup) { return l2_inner(setup.phi, laplacian(setup.u0)); }

double alpha_floor(const ProblemSetup& setup)
{
    return setup.alpha_floor_rel * sobolev_norm(setup.phi, 0.0) * sobolev_norm(setup.u0, 2.0);
}

SpectralField compute_v0(const ProblemSetup& setup, Mode mode)
{
    const SpectralField& a = advecting_field(mode, setup.u0, setup.params.u_inf);
    SpectralField rhs = laplacian(setup.u0);
    rhs *= setup.params.mu0;
    rhs -= advect(a, setup.u0);
    SpectralField v0 = helmholtz_inverse(leray_project(rhs), setup.params.mu1);
    v0.mark_solenoidal(true);
    return v0;
}

PressureField initial_pressure(const ProblemSetup& setup, Mode mode)
{
    return recover_pressure(advecting_field(mode, setup.u0, setup.params.u_inf), setup.u0);
}

AssumptionReport check_assumptions(const ProblemSetup& setup, Mode mode)
{
    AssumptionReport report;
    auto divergence_check = [&](int index, const SpectralField& f, const char* name) {
        AssumptionCheck c;
        c.name = assumption_name(mode, index);
        if (f.empty()) {
            c.detail = std::string(name) + " is missing";
            report.checks.push_back(c);
            return false;
        }
        c.value = std::max(divergence_norm(f), mean_mode_norm(f));
        c.threshold = divergence_threshold(f);
        c.passed = finite_field(f) && c.value <= c.threshold;
        std::ostringstream os;
        os << name << ": max |xi.f(xi)| and mean mode = " << c.value << " (limit " << c.threshold << ")";
        c.detail = os.str();
        report.checks.push_back(c);
        return c.passed;
    };

    const bool u0_ok = divergence_check(1, setup.u0, "u0");
    const bool phi_ok = divergence_check(2, setup.phi, "phi");
    const bool shapes_ok = u0_ok && phi_ok && setup.u0.grid().n() == setup.phi.grid().n() &&
                           setup.u0.grid().dim() == setup.phi.grid().dim();

    AssumptionCheck a3;
    a3.name = assumption_name(mode, 3);
    if (shapes_ok) {
        a3.value = alpha_inverse(setup);
        a3.threshold = alpha_floor(setup);
        a3.passed = std::isfinite(a3.value) && std::abs(a3.value) > a3.threshold;
        std::ostringstream os;
        os << "alpha^-1 = <phi, lap u0> = " << a3.value << " (floor " << a3.threshold << ")";
        a3.detail = os.str();
    } else {
        a3.detail = "alpha^-1 not evaluated: u0 or phi invalid";
    }
    report.checks.push_back(a3);

    AssumptionCheck a4;
    a4.name = assumption_name(mode, 4);
    bool background_ok = true;
    if (mode == Mode::oseen) {
        const SpectralField& ui = setup.params.u_inf;
        background_ok = !ui.empty() && ui.grid().n() == setup.u0.grid().n() &&
                        ui.grid().dim() == setup.u0.grid().dim() && finite_field(ui) &&
                        divergence_norm(ui) <= divergence_threshold(ui);
    }
    if (!background_ok) {
        a4.detail = "background field u_inf missing, on another grid or not divergence-free";
    } else if (shapes_ok) {
        const SpectralField v0 = compute_v0(setup, mode);
        a4.value = sobolev_norm(v0, 1.0);
        a4.threshold = std::numeric_limits<double>::max();
        a4.passed = finite_field(v0) && setup.params.mu0 > 0.0 && setup.params.mu1 > 0.0;
        std::ostringstream os;
        os << "||v0||_H1 = " << a4.value;
        if (!(setup.params.mu0 > 0.0 && setup.params.mu1 > 0.0)) os << "; mu0 and mu1 must be positive";
        a4.detail = os.str();
    } else {
        a4.detail = "v0 not evaluated: u0 or phi invalid";
    }
    report.checks.push_back(a4);

    AssumptionCheck a5;
    a5.name = assumption_name(mode, 5);
    const MeasurementTrace& m = setup.measurement;
    if (m.r.empty()) {
        a5.skipped = true;
        a5.passed = true;
        a5.detail = "no measurement supplied";
    } else if (!shapes_ok || !background_ok) {
        a5.detail = "compatibility not evaluated: field data invalid";
    } else if (m.r1.size() != m.r.size() || m.r2.size() != m.r.size()) {
        a5.detail = "measurement columns r, r', r'' have different lengths";
    } else {
        bool finite = true;
        for (std::size_t n = 0; n < m.size(); ++n)
            finite = finite && std::isfinite(m.r[n]) && std::isfinite(m.r1[n]) && std::isfinite(m.r2[n]);
        const double r0_ref = measurement_functional(setup.phi, setup.u0, setup.params.mu1);
        const SpectralField& a = advecting_field(mode, setup.u0, setup.params.u_inf);
        const double r1_ref = setup.params.mu0 * alpha_inverse(setup) - l2_inner(setup.phi, advect_raw(a, setup.u0));
        const double e0 = std::abs(m.r[0] - r0_ref) / (1.0 + std::abs(r0_ref));
        const double e1 = std::abs(m.r1[0] - r1_ref) / (1.0 + std::abs(r1_ref));
        a5.value = std::max(e0, e1);
        a5.threshold = setup.compat_tol;
        a5.passed = finite && a5.value <= a5.threshold;
        std::ostringstream os;
        os << "r(0) = " << m.r[0] << " vs " << r0_ref << ", r'(0) = " << m.r1[0] << " vs " << r1_ref
           << " (relative mismatch " << a5.value << ", tolerance " << a5.threshold << ")";
        if (!finite) os << "; measurement contains non-finite values";
        a5.detail = os.str();
    }
    report.checks.push_back(a5);
    return report;
}

// ---------------------------------------------------------------------------

double WindowProblem::offset() const { return history ? history->k.duration() : 0.0; }

double combined_norm(const std::vector<SpectralField>& w, const std::vector<double>& kappa, double dt)
{
    const std::size_t n = w.empty() ? 0 : w.size() - 1;
    double value = 0.0;
    double slope = 0.0;
    for (std::size_t j = 0; j <= n && !w.empty(); ++j) {
        value += trapezoid_weight(j, n) * h2_norm_sq(w[j]);
        if (j < n) slope += h2_distance_sq(w[j + 1], w[j]) / (dt * dt);
    }
    return std::sqrt(dt * (value + slope)) + l2_norm(kappa, dt);
}

double combined_norm(const Trajectory& w, const KernelTrace& kappa)
{
    return combined_norm(w.fields, kappa.samples, w.dt);
}

WindowProblem make_window(const ProblemSetup& setup, Mode mode, std::size_t steps)
{
    const double a_inv = alpha_inverse(setup);
    if (!(std::abs(a_inv) > alpha_floor(setup)) || !std::isfinite(a_inv))
        throw AssumptionError(assumption_name(mode, 3), "alpha^-1 = <phi, lap u0> vanishes");
    const MeasurementTrace& m = setup.measurement;
    if (m.r2.size() < steps + 1) throw InvalidArgument("measurement does not cover the requested window");
    WindowProblem w;
    w.mode = mode;
    w.mu0 = setup.params.mu0;
    w.mu1 = setup.params.mu1;
    w.alpha = 1.0 / a_inv;
    w.u0 = setup.u0;
    w.phi = setup.phi;
    w.lap_phi = laplacian(setup.phi);
    w.u_inf = setup.params.u_inf;
    w.v_start = compute_v0(setup, mode);
    w.u_start = setup.u0;
    w.dt = m.dt;
    w.steps = steps;
    w.r2.assign(m.r2.begin(), m.r2.begin() + static_cast<std::ptrdiff_t>(steps + 1));
    return w;
}

KernelTrace kernel_update(const WindowProblem& w, const Trajectory& v_tilde, const KernelTrace& k_tilde)
{
    return kernel_from_frozen(w, freeze(w, v_tilde), k_tilde);
}

Trajectory solve_linear_ibvp(const WindowProblem& w, const KernelTrace& k, const Trajectory& v_tilde)
{
    return ibvp_from_frozen(w, freeze(w, v_tilde), k, v_tilde);
}

KernelTrace kernel_update_kv(const Trajectory& v_tilde, const KernelTrace& k_tilde, const ProblemSetup& setup)
{
    return kernel_update(make_window(setup, Mode::kv, v_tilde.steps()), v_tilde, k_tilde);
}

KernelTrace kernel_update_oseen(const Trajectory& v_tilde, const KernelTrace& k_tilde, const ProblemSetup& setup)
{
    return kernel_update(make_window(setup, Mode::oseen, v_tilde.steps()), v_tilde, k_tilde);
}

Trajectory solve_linear_ibvp_kv(const KernelTrace& k, const Trajectory& v_tilde, const ProblemSetup& setup,
                                const FixedPointConfig& cfg)
{
    check_same_dt(cfg.dt, v_tilde.dt);
    return solve_linear_ibvp(make_window(setup, Mode::kv, v_tilde.steps()), k, v_tilde);
}

Trajectory solve_linear_ibvp_oseen(const KernelTrace& k, const Trajectory& v_tilde, const ProblemSetup& setup,
                                   const FixedPointConfig& cfg)
{
    check_same_dt(cfg.dt, v_tilde.dt);
    return solve_linear_ibvp(make_window(setup, Mode::oseen, v_tilde.steps()), k, v_tilde);
}

FixedPointResult solve_window(WindowProblem w, const FixedPointConfig& cfg, std::size_t window_index)
{
    if (!(cfg.tol > 0.0)) throw InvalidArgument("tolerance must be positive");
    if (cfg.max_iter < 1) throw InvalidArgument("max_iter must be at least 1");
    if (cfg.stall_limit < 1) throw InvalidArgument("stall_limit must be at least 1");

    FixedPointResult result;
    std::ostringstream log;
    while (true) {
        const std::size_t n = w.steps;
        const double tau = w.dt * static_cast<double>(n);
        result.tau = tau;
        result.deltas.clear();
        result.contraction_ratios.clear();
        if (n < 4) {
            log << "window fell below 4 time steps; giving up";
            result.message = log.str();
            return result;
        }

        Trajectory v{w.dt, std::vector<SpectralField>(n + 1, w.v_start)};
        KernelTrace k{w.dt, std::vector<double>(n + 1, cfg.initial_kernel)};
        int streak = 0;
        std::string reason = "iteration limit reached";
        bool restart = false;
        for (int it = 1; it <= cfg.max_iter && !restart; ++it) {
            const Frozen frozen = freeze(w, v);
            KernelTrace k_new = kernel_from_frozen(w, frozen, k);
            Trajectory v_new = ibvp_from_frozen(w, frozen, k_new, v);

            std::vector<SpectralField> dv(n + 1);
            std::vector<double> dk(n + 1);
            for (std::size_t j = 0; j <= n; ++j) {
                dv[j] = v_new.fields[j] - v.fields[j];
                dk[j] = k_new.samples[j] - k.samples[j];
            }
            const double delta = combined_norm(dv, dk, w.dt);
            const double ratio = result.deltas.empty() ? 0.0 : delta / result.deltas.back();
            if (!result.deltas.empty()) result.contraction_ratios.push_back(ratio);
            result.deltas.push_back(delta);
            const double L = combined_norm(v_new, k_new);
            result.iterations = it;
            result.iterate_norm = L;
            v = std::move(v_new);
            k = std::move(k_new);
            if (cfg.on_iteration) cfg.on_iteration({window_index, it, tau, delta, ratio, L});

            if (!std::isfinite(delta)) {
                reason = "iterates became non-finite";
                restart = true;
            } else if (delta <= cfg.tol) {
                result.v = std::move(v);
                result.k = std::move(k);
                result.converged = true;
                log << "converged after " << it << " iterations on a window of length " << tau;
                result.message = log.str();
                return result;
            } else {
                streak = (it > 1 && ratio >= 1.0) ? streak + 1 : 0;
                if (streak >= cfg.stall_limit) {
                    reason = "contraction ratio >= 1 for " + std::to_string(streak) + " consecutive iterations";
                    restart = true;
                } else if (cfg.enforce_smallness && tau * (1.0 + L + L * L) > 1.0) {
                    std::ostringstream os;
                    os << "smallness condition violated: tau(1+L+L^2) = " << tau * (1.0 + L + L * L);
                    reason = os.str();
                    restart = true;
                }
            }
        }
        result.v = std::move(v);
        result.k = std::move(k);
        log << "window " << tau << ": " << reason << "; halving. ";
        w.steps = n / 2;
        ++result.halvings;
    }
}

FixedPointResult fixed_point_solve(const ProblemSetup& setup, const FixedPointConfig& cfg, Mode mode)
{
    const AssumptionReport report = check_assumptions(setup, mode);
    if (const AssumptionCheck* bad = report.first_failure()) throw AssumptionError(bad->name, bad->detail);
    if (setup.measurement.r.empty()) throw InvalidArgument("inversion requires a measurement");
    check_same_dt(cfg.dt, setup.measurement.dt);
    const std::size_t steps = window_steps(cfg.tau, cfg.dt);
    if (steps > setup.measurement.steps())
        throw InvalidArgument("window tau exceeds the measurement duration");
    return solve_window(make_window(setup, mode, steps), cfg);
}

Trajectory reconstruct_u(const Trajectory& v, const SpectralField& u0)
{
    Trajectory u{v.dt, cumulative_integral(v)};
    for (auto& f : u.fields) {
        f += u0;
        f.mark_solenoidal(u0.solenoidal());
    }
    return u;
}

ResidualReport residual_check(const Trajectory& u, const KernelTrace& k, const ProblemSetup& setup, Mode mode)
{
    ResidualReport r;
    if (u.fields.empty()) return r;
    const std::size_t M = u.steps();
    const double dt = u.dt;
    const ModelParams p = params_for(setup, mode);

    for (const auto& f : u.fields) r.divergence = std::max(r.divergence, divergence_norm(f));

    const MeasurementTrace& meas = setup.measurement;
    const std::size_t count = std::min(u.fields.size(), meas.r.size());
    for (std::size_t n = 0; n < count; ++n) {
        const double mf = measurement_functional(setup.phi, u.fields[n], p.mu1);
        r.overdetermination = std::max(r.overdetermination, std::abs(mf - meas.r[n]));
    }

    if (M < 2) return r;
    check_same_dt(k.dt, dt);
    if (k.samples.size() < u.fields.size()) throw ShapeError("kernel is shorter than the trajectory");
    double scale = 0.0;
    for (std::size_t n = 1; n < M; ++n) {
        SpectralField dudt = u.fields[n + 1] - u.fields[n - 1];
        dudt *= 1.0 / (2.0 * dt);
        SpectralField res = apply_helmholtz(dudt, p.mu1);
        scale = std::max(scale, sobolev_norm(res, 0.0));
        res.axpy(-p.mu0, laplacian(u.fields[n]));
        res += advect(advecting_field(mode, u.fields[n], p.u_inf), u.fields[n]);
        res -= laplacian(convolve_field(k, u, n));
        r.momentum = std::max(r.momentum, sobolev_norm(leray_project(res), 0.0));
    }
    r.momentum_relative = scale > 0.0 ? r.momentum / scale : r.momentum;
    return r;
}

}  // namespace kvmem
