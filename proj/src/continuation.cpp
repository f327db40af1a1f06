#include "kvmem/continuation.hpp"

#include "kvmem/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace kvmem {

namespace {

std::size_t steps_for(double length, double dt, const char* what)
{
    if (!(dt > 0.0) || !(length > 0.0)) throw InvalidArgument(std::string(what) + " and dt must be positive");
    const double ratio = length / dt;
    const auto steps = static_cast<std::size_t>(std::llround(ratio));
    if (steps == 0 || std::abs(ratio - static_cast<double>(steps)) > 1e-9 * ratio)
        throw InvalidArgument(std::string(what) + " must be an integer multiple of dt");
    return steps;
}

WindowDiagnostics describe(const FixedPointResult& r, double offset, double mismatch)
{
    WindowDiagnostics d;
    d.offset = offset;
    d.length = r.tau;
    d.iterations = r.iterations;
    d.halvings = r.halvings;
    d.converged = r.converged;
    d.final_delta = r.deltas.empty() ? 0.0 : r.deltas.back();
    d.norm = r.converged ? combined_norm(r.v, r.k) : 0.0;
    d.junction_mismatch = mismatch;
    d.contraction_ratios = r.contraction_ratios;
    return d;
}

}  // namespace

WindowState initial_state(const FixedPointResult& first)
{
    if (first.v.fields.empty() || first.k.samples.size() != first.v.fields.size())
        throw InvalidArgument("initial_state: first window solution is empty or inconsistent");
    WindowState s;
    s.offset = first.v.duration();
    s.v_hat = first.v;
    s.k_hat = first.k;
    s.u_tau = first.v.fields.back();
    s.glued_v = first.v;
    s.glued_k = first.k;
    return s;
}

WindowProblem shift_problem(const WindowState& state, const ProblemSetup& setup, Mode mode, std::size_t delta_steps)
{
    const std::size_t m = state.glued_k.steps();
    if (state.glued_v.fields.size() != m + 1)
        throw ShapeError("shift_problem: glued velocity and kernel lengths differ");
    if (delta_steps > m)
        throw InvalidArgument("shift_problem: continuation window longer than the solved history (delta > tau)");
    const MeasurementTrace& meas = setup.measurement;
    check_same_dt(meas.dt, state.glued_k.dt);
    if (meas.r2.size() < m + delta_steps + 1)
        throw InvalidArgument("shift_problem: measurement does not cover the continuation window");

    WindowProblem w = make_window(setup, mode, 0);
    w.v_start = state.u_tau;
    if (mode == Mode::kv) {
        const auto primitive = cumulative_integral(state.glued_v);
        w.u_start = setup.u0 + primitive.back();
    }
    w.steps = delta_steps;
    w.r2.assign(meas.r2.begin() + static_cast<std::ptrdiff_t>(m),
                meas.r2.begin() + static_cast<std::ptrdiff_t>(m + delta_steps + 1));

    auto history = std::make_shared<WindowHistory>();
    history->k = state.glued_k;
    history->v = state.glued_v;
    history->s.reserve(m + 1);
    for (const auto& f : state.glued_v.fields) history->s.push_back(l2_inner(w.lap_phi, f));
    history->tail.reserve(delta_steps + 1);
    for (std::size_t j = 0; j <= delta_steps; ++j)
        history->tail.push_back(convolution_tail(state.glued_k, state.glued_v, j));
    w.history = std::move(history);
    return w;
}

double junction_mismatch(const WindowState& state, const Trajectory& v_tau, const KernelTrace& k_tau)
{
    if (v_tau.fields.empty() || k_tau.samples.empty()) throw InvalidArgument("junction_mismatch: empty window");
    const SpectralField dv = v_tau.fields.front() - state.glued_v.fields.back();
    return sobolev_norm(dv, 2.0) + std::abs(k_tau.samples.front() - state.glued_k.samples.back());
}

WindowState glue(const WindowState& state, const Trajectory& v_tau, const KernelTrace& k_tau, double tol)
{
    check_same_dt(v_tau.dt, state.glued_v.dt);
    check_same_dt(k_tau.dt, state.glued_k.dt);
    if (v_tau.fields.size() != k_tau.samples.size())
        throw ShapeError("glue: window velocity and kernel lengths differ");
    const double mismatch = junction_mismatch(state, v_tau, k_tau);
    if (!(mismatch <= 100.0 * tol)) {
        std::ostringstream os;
        os << "junction mismatch " << mismatch << " exceeds 100*tol = " << 100.0 * tol;
        throw GlueError(os.str());
    }

    WindowState next = state;
    SpectralField& junction_v = next.glued_v.fields.back();
    junction_v += v_tau.fields.front();
    junction_v *= 0.5;
    junction_v.mark_solenoidal(true);
    double& junction_k = next.glued_k.samples.back();
    junction_k = 0.5 * (junction_k + k_tau.samples.front());
    for (std::size_t j = 1; j < v_tau.fields.size(); ++j) {
        next.glued_v.fields.push_back(v_tau.fields[j]);
        next.glued_k.samples.push_back(k_tau.samples[j]);
    }
    next.offset = next.glued_k.duration();
    next.v_hat = v_tau;
    next.k_hat = k_tau;
    next.u_tau = next.glued_v.fields.back();
    return next;
}

double MarchResult::monitor_growth() const
{
    if (windows.empty() || !(windows.front().norm > 0.0)) return 0.0;
    double worst = 0.0;
    for (const auto& w : windows) worst = std::max(worst, w.norm);
    return worst / windows.front().norm;
}

MarchResult march_global(const ProblemSetup& setup, const FixedPointConfig& cfg, double T, Mode mode)
{
    const AssumptionReport report = check_assumptions(setup, mode);
    if (const AssumptionCheck* bad = report.first_failure()) throw AssumptionError(bad->name, bad->detail);
    if (setup.measurement.r.empty()) throw InvalidArgument("marching requires a measurement");
    check_same_dt(cfg.dt, setup.measurement.dt);
    const std::size_t total = steps_for(T, cfg.dt, "T");
    const std::size_t window = steps_for(cfg.tau, cfg.dt, "tau");
    if (total > setup.measurement.steps()) throw InvalidArgument("T exceeds the measurement duration");

    MarchResult out;
    out.experimental = mode == Mode::kv;
    std::ostringstream log;

    const FixedPointResult first = solve_window(make_window(setup, mode, std::min(window, total)), cfg, 0);
    out.windows.push_back(describe(first, 0.0, 0.0));
    if (!first.converged) {
        out.solution = first;
        out.message = "first window failed: " + first.message;
        return out;
    }
    WindowState state = initial_state(first);
    int iterations = first.iterations;

    while (state.glued_k.steps() < total) {
        const std::size_t m = state.glued_k.steps();
        const std::size_t delta = std::min({m, total - m, window});
        const WindowProblem w = shift_problem(state, setup, mode, delta);
        const FixedPointResult r = solve_window(w, cfg, out.windows.size());
        iterations += r.iterations;
        if (!r.converged) {
            out.windows.push_back(describe(r, state.offset, 0.0));
            log << "window at offset " << state.offset << " failed: " << r.message;
            break;
        }
        const double mismatch = junction_mismatch(state, r.v, r.k);
        out.windows.push_back(describe(r, state.offset, mismatch));
        try {
            state = glue(state, r.v, r.k, cfg.tol);
        } catch (const GlueError& e) {
            log << "window at offset " << state.offset << ": " << e.what();
            break;
        }
    }

    out.reached = state.offset;
    out.completed = state.glued_k.steps() == total;
    if (out.completed) log << "reached T = " << out.reached << " in " << out.windows.size() << " windows";
    out.solution.v = state.glued_v;
    out.solution.k = state.glued_k;
    out.solution.converged = out.completed;
    out.solution.tau = out.reached;
    out.solution.iterations = iterations;
    out.solution.deltas = first.deltas;
    out.solution.contraction_ratios.clear();
    for (const auto& w : out.windows)
        out.solution.contraction_ratios.insert(out.solution.contraction_ratios.end(), w.contraction_ratios.begin(),
                                               w.contraction_ratios.end());
    out.solution.iterate_norm = combined_norm(out.solution.v, out.solution.k);
    out.message = log.str();
    out.solution.message = out.message;
    return out;
}

}  // namespace kvmem
