#include "kvmem/forward.hpp"

#include "kvmem/errors.hpp"

#include <cmath>
#include <string>

namespace kvmem {

namespace {

std::size_t step_count(double T, double dt)
{
    if (!(dt > 0.0) || !(T > 0.0)) throw InvalidArgument("T and dt must be positive");
    const double ratio = T / dt;
    const auto steps = static_cast<std::size_t>(std::llround(ratio));
    if (steps == 0 || std::abs(ratio - static_cast<double>(steps)) > 1e-9 * ratio)
        throw InvalidArgument("T must be an integer multiple of dt");
    return steps;
}

/// Crank–Nicolson on the viscous term with explicit forcing f.
SpectralField imex_update(const SpectralField& u, const SpectralField& f, double mu0, double mu1, double dt)
{
    const Grid& g = u.grid();
    SpectralField out(u.grid_ptr());
    for (int c = 0; c < g.dim(); ++c) {
        auto uc = u.component(c);
        auto fc = f.component(c);
        auto oc = out.component(c);
        for (std::size_t m = 0; m < g.size(); ++m) {
            const double k2 = g.k2(m);
            const double lhs = 1.0 + mu1 * k2 + 0.5 * mu0 * k2 * dt;
            const double rhs = 1.0 + mu1 * k2 - 0.5 * mu0 * k2 * dt;
            oc[m] = (rhs * uc[m] + dt * fc[m]) / lhs;
        }
    }
    out.mark_solenoidal(u.solenoidal() && f.solenoidal());
    return out;
}

bool all_finite(const SpectralField& f)
{
    for (const Complex& c : f.data())
        if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) return false;
    return true;
}

void require_divergence_free(const SpectralField& f, const char* assumption, const char* name)
{
    const double scale = 1.0 + sobolev_norm(f, 1.0);
    if (divergence_norm(f) > 1e-10 * scale)
        throw AssumptionError(assumption, std::string(name) + " is not divergence-free");
}

}  // namespace

SpectralField explicit_terms(const Trajectory& history, std::size_t n, const KernelTrace& k,
                             const ModelParams& params)
{
    const SpectralField& u = history.fields.at(n);
    const SpectralField& a = params.mode == Mode::kv ? u : params.u_inf;
    SpectralField out = laplacian(convolve_field(k, history, n));
    out -= advect(a, u);
    out.mark_solenoidal(true);
    return out;
}

/// Start-up step: trapezoidal average of the explicit terms at u₀ and at the Euler predictor.
static SpectralField heun_correct(const Trajectory& history, const KernelTrace& k, const ModelParams& params,
                           const SpectralField& f0, const SpectralField& predicted, double dt)
{
    if (!all_finite(predicted)) return predicted;
    Trajectory trial{history.dt, {history.fields.front(), predicted}};
    SpectralField forcing = f0;
    forcing += explicit_terms(trial, 1, k, params);
    forcing *= 0.5;
    return imex_update(history.fields.front(), forcing, params.mu0, params.mu1, dt);
}

SpectralField step_direct(const SpectralField& u_n, const Trajectory& history, const KernelTrace& k,
                          const ModelParams& params, double dt)
{
    if (history.fields.empty()) throw InvalidArgument("step_direct: empty history");
    check_same_dt(history.dt, dt);
    const std::size_t n = history.steps();
    SpectralField forcing = explicit_terms(history, n, k, params);
    if (n > 0) {
        forcing *= 1.5;
        forcing.axpy(-0.5, explicit_terms(history, n - 1, k, params));
    }
    SpectralField next = imex_update(u_n, forcing, params.mu0, params.mu1, dt);
    if (n == 0) next = heun_correct(history, k, params, forcing, next, dt);
    if (!all_finite(next))
        throw DivergenceError(n, "non-finite coefficients after step " + std::to_string(n));
    return next;
}

SpectralField advective_derivative(const SpectralField& v, const SpectralField& u, const ModelParams& params)
{
    if (params.mode == Mode::oseen) return advect_raw(params.u_inf, v);
    return advect_raw(v, u) + advect_raw(u, v);
}

ForwardRun run_direct(const SpectralField& u0, const ModelParams& params, double T, double dt,
                      const SpectralField& phi, const ForwardOptions& opts)
{
    validate(params);
    require_divergence_free(u0, params.mode == Mode::kv ? "A1" : "H1", "u0");
    require_divergence_free(phi, params.mode == Mode::kv ? "A2" : "H2", "phi");
    if (opts.substeps < 1) throw InvalidArgument("substeps must be at least 1");

    const std::size_t steps = step_count(T, dt);
    const std::size_t sub = static_cast<std::size_t>(opts.substeps);
    const std::size_t fine_steps = steps * sub;
    const double h = dt / static_cast<double>(sub);
    const double mu0 = params.mu0;
    const double mu1 = params.mu1;

    const KernelTrace k = sample_kernel(params.kernel, h, fine_steps);

    Trajectory u{h, {}};
    Trajectory v{h, {}};
    u.fields.reserve(fine_steps + 1);
    v.fields.reserve(fine_steps + 1);
    u.fields.push_back(leray_project(u0));

    const double initial = sobolev_norm(u0, 0.0);
    SpectralField previous;
    for (std::size_t n = 0; n <= fine_steps; ++n) {
        const SpectralField& un = u.fields[n];
        SpectralField nn = explicit_terms(u, n, k, params);
        SpectralField rhs = nn;
        rhs.axpy(mu0, laplacian(un));
        v.fields.push_back(helmholtz_inverse(rhs, mu1));
        v.fields.back().mark_solenoidal(true);
        if (n == fine_steps) break;

        SpectralField forcing = nn;
        if (n > 0) {
            forcing *= 1.5;
            forcing.axpy(-0.5, previous);
        }
        SpectralField next = imex_update(un, forcing, mu0, mu1, h);
        if (n == 0) next = heun_correct(u, k, params, nn, next, h);
        const double norm = sobolev_norm(next, 0.0);
        if (!all_finite(next))
            throw DivergenceError(n, "forward solve produced non-finite values at step " + std::to_string(n));
        if (initial > 0.0 && norm > opts.growth_limit * initial)
            throw DivergenceError(n, "forward solve norm grew beyond " + std::to_string(opts.growth_limit) +
                                         " times its initial value at step " + std::to_string(n));
        previous = std::move(nn);
        u.fields.push_back(std::move(next));
    }

    // Measurement and its two derivatives on the fine grid.
    const SpectralField lap_phi = laplacian(phi);
    const double a0 = l2_inner(lap_phi, u.fields.front());
    std::vector<double> q(fine_steps + 1), s(fine_steps + 1);
    for (std::size_t n = 0; n <= fine_steps; ++n) {
        q[n] = l2_inner(lap_phi, u.fields[n]);
        s[n] = l2_inner(lap_phi, v.fields[n]);
    }

    ForwardRun run;
    run.u.dt = dt;
    run.v.dt = dt;
    run.measurement.dt = dt;
    run.kernel = sample_kernel(params.kernel, dt, steps);
    for (std::size_t c = 0; c <= steps; ++c) {
        const std::size_t n = c * sub;
        const SpectralField& un = u.fields[n];
        const SpectralField& vn = v.fields[n];
        const SpectralField& a = params.mode == Mode::kv ? un : params.u_inf;
        const double r = measurement_functional(phi, un, mu1);
        const double r1 = mu0 * q[n] - l2_inner(phi, advect_raw(a, un)) + convolve_scalar(k, q, n);
        const double r2 = mu0 * s[n] + k.samples[n] * a0 + convolve_scalar(k, s, n) -
                          l2_inner(phi, advective_derivative(vn, un, params));
        run.measurement.r.push_back(r);
        run.measurement.r1.push_back(r1);
        run.measurement.r2.push_back(r2);
        run.u.fields.push_back(un);
        run.v.fields.push_back(vn);
    }
    return run;
}

TwinDataset synthesize_twin(const ProblemSetup& setup, const KernelSpec& k_true, double T, double dt,
                            const ForwardOptions& opts)
{
    ModelParams params = setup.params;
    params.kernel = k_true;
    ForwardRun run = run_direct(setup.u0, params, T, dt, setup.phi, opts);
    TwinDataset twin;
    twin.measurement = std::move(run.measurement);
    twin.k_true = std::move(run.kernel);
    twin.u = std::move(run.u);
    twin.v = std::move(run.v);
    return twin;
}

}  // namespace kvmem
