/// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "kvmem/config.hpp"
#include "kvmem/errors.hpp"

#include "test_support.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <sstream>

using namespace kvmem;
using json = nlohmann::json;

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

/// Collects the individual checks of one criterion.
class Criterion {
public:
    void expect(bool ok, const std::string& what)
    {
        if (!ok) failures_.push_back(what);
        notes_.push_back(what);
    }
    /// value ≤ limit, recorded with both numbers
    void below(double value, double limit, const std::string& what)
    {
        std::ostringstream os;
        os << what << " " << value << " <= " << limit;
        expect(std::isfinite(value) && value <= limit, os.str());
    }
    void above(double value, double limit, const std::string& what)
    {
        std::ostringstream os;
        os << what << " " << value << " >= " << limit;
        expect(std::isfinite(value) && value >= limit, os.str());
    }
    bool passed() const { return failures_.empty(); }
    const std::vector<std::string>& failures() const { return failures_; }
    const std::vector<std::string>& notes() const { return notes_; }

private:
    std::vector<std::string> failures_;
    std::vector<std::string> notes_;
};

double rel_kernel_error(const KernelTrace& k, const KernelTrace& truth)
{
    const std::size_t n = k.samples.size();
    KernelTrace ref{truth.dt, {truth.samples.begin(), truth.samples.begin() + n}};
    KernelTrace d = ref;
    for (std::size_t i = 0; i < n; ++i) d.samples[i] = k.samples[i] - ref.samples[i];
    return l2_norm(d) / l2_norm(ref);
}

double rel(const SpectralField& d, const SpectralField& ref) { return sobolev_norm(d, 0.0) / sobolev_norm(ref, 0.0); }

// 1 ─ operator invariants on 100 random fields per grid
void operator_suite(Criterion& c)
{
    for (auto [dim, n] : {std::pair{2, 16}, std::pair{3, 8}}) {
        const GridPtr g = make_grid(dim, n);
        double idem = 0, div = 0, grad = 0, helm = 0, skew = 0;
        for (std::uint64_t seed = 1; seed <= 100; ++seed) {
            const SpectralField f = random_field(g, seed, n / 2, false);
            const SpectralField p = leray_project(f);
            idem = std::max(idem, rel(leray_project(p) - p, f));
            div = std::max(div, divergence_norm(p) / sobolev_norm(f, 0.0));
            const SpectralField s = random_field(g, seed + 1000, n / 2, false);
            grad = std::max(grad, sobolev_norm(leray_project(gradient({g, {s.component(0).begin(), s.component(0).end()}})),
                                               0.0) /
                                      sobolev_norm(s, 1.0));
            helm = std::max(helm, rel(apply_helmholtz(helmholtz_inverse(f, 1.0), 1.0) - f, f));
            const SpectralField a = random_field(g, seed + 2000, n / 3, true);
            const SpectralField b = random_field(g, seed + 3000, n / 3, true);
            skew = std::max(skew, std::abs(l2_inner(advect(a, b), b)) /
                                      (sobolev_norm(a, 1.0) * sobolev_norm(b, 1.0) * sobolev_norm(b, 1.0)));
        }
        const std::string tag = std::to_string(dim) + "D N=" + std::to_string(n);
        c.below(idem, 1e-12, tag + " idempotency");
        c.below(div, 1e-12, tag + " divergence");
        c.below(grad, 1e-12, tag + " gradient");
        c.below(helm, 1e-12, tag + " helmholtz");
        c.below(skew, 1e-10, tag + " skew");
    }
}

// 2 ─ quadrature bounds, order and splitting
void quadrature_suite(Criterion& c)
{
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    double young = 0.0, prim = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 40 + trial;
        const double dt = 1.0 / static_cast<double>(n);
        KernelTrace k{dt, std::vector<double>(n + 1)};
        std::vector<double> f(n + 1);
        KernelTrace z{dt, std::vector<double>(n + 1)};
        double acc = 0.0;
        for (std::size_t i = 0; i <= n; ++i) {
            k.samples[i] = unit(rng);
            f[i] = unit(rng);
            if (i > 0) acc += dt * unit(rng);
            z.samples[i] = acc;  // random walk primitive, z(0) = 0
        }
        young = std::max(young, check_young_bound(k, f).ratio / (1.0 + 5.0 * dt));
        const PrimitiveReport p = check_time_primitive_bound(z);
        prim = std::max(prim, std::max(p.sup_ratio, p.l2_ratio) / (1.0 + 5.0 * dt));
    }
    c.below(young, 1.0, "Young ratio / (1+5dt)");
    c.below(prim, 1.0, "primitive ratio / (1+5dt)");

    const double exact = 0.5 * (std::sin(1.0) + std::cos(1.0) - std::exp(-1.0));
    std::vector<double> errs;
    for (std::size_t n : {25u, 50u, 100u}) {
        const double dt = 1.0 / static_cast<double>(n);
        const KernelTrace k = sample_kernel(exponential_kernel(1.0, 1.0), dt, n);
        std::vector<double> f(n + 1);
        for (std::size_t i = 0; i <= n; ++i) f[i] = std::cos(dt * static_cast<double>(i));
        errs.push_back(std::abs(convolve_scalar(k, f, n) - exact));
    }
    for (std::size_t i = 1; i < errs.size(); ++i) c.above(std::log2(errs[i - 1] / errs[i]), 1.9, "convolution order");

    const GridPtr g = make_grid(2, 16);
    const SpectralField a = random_field(g, 77, 5, true);
    const double dt = 0.01;
    const std::size_t m = 50, d = 50;
    KernelTrace k_full{dt, {}};
    Trajectory v_full{dt, {}};
    for (std::size_t i = 0; i <= m + d; ++i) {
        const double t = dt * static_cast<double>(i);
        k_full.samples.push_back(0.5 * std::exp(-0.5 * t));
        v_full.fields.push_back(std::cos(4 * t) * a);
    }
    const KernelTrace k_hat{dt, {k_full.samples.begin(), k_full.samples.begin() + m + 1}};
    const KernelTrace k_tau{dt, {k_full.samples.begin() + m, k_full.samples.end()}};
    const Trajectory v_hat{dt, {v_full.fields.begin(), v_full.fields.begin() + m + 1}};
    const Trajectory v_tau{dt, {v_full.fields.begin() + m, v_full.fields.end()}};
    double split = 0.0;
    for (std::size_t j = 0; j <= d; ++j) {
        const auto s = split_convolution(k_hat, k_tau, v_hat, v_tau, j);
        split = std::max(split, rel(s.early + s.late + s.tail - convolve_field(k_full, v_full, m + j), a));
    }
    c.below(split, 2.0 * dt, "splitting identity (relative)");
}

// 3 ─ forward exactness and self-convergence
void forward_suite(Criterion& c)
{
    const GridPtr g = make_grid(2, 16);
    ModelParams lin;
    lin.mu0 = 1.5;
    lin.mu1 = 1.0;
    lin.mode = Mode::oseen;
    lin.u_inf = SpectralField(g);
    const SpectralField u0 = build_field({"shear", 1.0, {}}, g);
    const double T = 0.25;
    const ForwardRun run = run_direct(u0, lin, T, 5e-5, u0);
    const std::size_t m = g->index_of({0, 1, 0});
    const double rate = lin.mu0 / (1.0 + lin.mu1);
    c.below(std::abs(run.u.fields.back().at(0, m) - u0.at(0, m) * std::exp(-rate * T)), 1e-10,
            "single-mode decay vs exp(-mu0 t/(1+mu1))");

    const ProblemSetup s = kvtest::twin_setup(Mode::kv, 16, 1.0);
    ModelParams kv;
    kv.mu0 = 1.5;
    kv.mu1 = 1.0;
    kv.kernel = exponential_kernel(0.5, 0.5);
    const double dt_min = T / 40;
    ForwardOptions ref_opts;
    ref_opts.substeps = 16;
    const SpectralField ref = run_direct(s.u0, kv, T, dt_min, s.phi, ref_opts).u.fields.back();
    std::vector<double> errs;
    for (double dt : {T / 10, T / 20, T / 40}) errs.push_back(rel(run_direct(s.u0, kv, T, dt, s.phi).u.fields.back() - ref, ref));
    for (std::size_t i = 1; i < errs.size(); ++i) c.above(std::log2(errs[i - 1] / errs[i]), 1.9, "KV temporal order");
}

json run_cli_json(Criterion& c, const std::string& args, const std::filesystem::path& dir, int expected_exit)
{
    std::filesystem::create_directories(dir);
    const auto r = kvtest::run_cli(args + " --output \"" + dir.string() + "\"", dir);
    c.expect(r.exit_code == expected_exit,
             "exit code " + std::to_string(r.exit_code) + " (expected " + std::to_string(expected_exit) + ")");
    try {
        return json::parse(kvtest::read_file(dir / "diagnostics.json"));
    } catch (const std::exception& e) {
        c.expect(false, std::string("diagnostics unreadable: ") + e.what());
        return json::object();
    }
}

double max_ratio(const json& ratios)
{
    double q = 0.0;
    for (const auto& r : ratios) q = std::max(q, r.get<double>());
    return q;
}

/// Copy of a shipped config with the time step replaced.
std::string config_with_dt(const std::string& name, double dt, const std::filesystem::path& dir)
{
    json j = json::parse(kvtest::read_file(kvtest::config_path(name)));
    j["time"]["dt"] = dt;
    const auto path = dir / ("dt_" + name);
    kvtest::write_file(path, j.dump(2));
    return path.string();
}

// 4 ─ Oseen local twin through the CLI
void oseen_twin(Criterion& c)
{
    const auto dir = kvtest::scratch_dir("acc_oseen");
    std::vector<double> errs;
    for (double dt : {1e-3, 5e-4}) {
        const json d = run_cli_json(c, "twin --config \"" + config_with_dt("oseen_twin.json", dt, dir) + "\"",
                                    dir / std::to_string(errs.size()), 0);
        const double err = d.value("kernel_error_relative", nan);
        c.below(err, 0.05, "dt=" + std::to_string(dt) + " relative kernel error");
        c.below(max_ratio(d.value("contraction_ratios", json::array())), 1.0 - 1e-12, "max contraction ratio");
        c.expect(std::abs(d.value("tau", 0.0) - 0.25) < 1e-12, "full window solved");
        errs.push_back(err);
    }
    c.below(errs[1], errs[0], "error after dt-halving");
}

// 5 ─ KV local twin under the smallness heuristic
void kv_twin(Criterion& c)
{
    const auto dir = kvtest::scratch_dir("acc_kv");
    const json d = run_cli_json(c, "twin --config \"" + kvtest::config_path("kv_twin.json") + "\"", dir, 0);
    c.expect(d.value("converged", false), "converged");
    c.below(d.value("kernel_error_relative", nan), 0.10, "relative kernel error");
    const double tol = 1e-8;
    c.below(d["residuals"].value("overdetermination", nan), 10 * tol, "overdetermination residual");
    const double tau = d.value("tau", nan), L = d.value("iterate_norm", nan);
    c.below(tau * (1 + L + L * L), 1.0, "tau(1+L+L^2)");
}

// 6 ─ global Oseen march
void oseen_march(Criterion& c)
{
    const auto dir = kvtest::scratch_dir("acc_march");
    const json d = run_cli_json(c, "twin --config \"" + kvtest::config_path("oseen_march.json") + "\"", dir, 0);
    c.expect(d.value("completed", false), "march completed");
    c.expect(std::abs(d.value("reached", 0.0) - 1.0) < 1e-12, "reached T = 1");
    c.below(d.value("kernel_error_relative", nan), 0.05, "glued relative kernel error");
    double junction = 0.0;
    for (const auto& w : d.value("windows", json::array())) junction = std::max(junction, w.value("junction_mismatch", nan));
    c.below(junction, 100 * 1e-8, "max junction mismatch");
    c.below(d.value("monitor_growth", nan), 10.0, "monitor growth");
}

ProblemSetup oseen_twin_setup(double dt, TwinDataset* twin_out)
{
    const RunConfig rc = parse_config(kvtest::config_path("oseen_twin.json"));
    ProblemSetup s = make_setup(rc);
    ForwardOptions opts;
    opts.substeps = rc.substeps;
    TwinDataset twin = synthesize_twin(s, rc.kernel, rc.T, dt, opts);
    s.measurement = twin.measurement;
    if (twin_out) *twin_out = std::move(twin);
    return s;
}

// 7 ─ distinct initial guesses reach the same kernel
void uniqueness(Criterion& c)
{
    const ProblemSetup s = oseen_twin_setup(1e-3, nullptr);
    FixedPointConfig cfg;
    cfg.tau = 0.25;
    cfg.dt = 1e-3;
    const FixedPointResult a = fixed_point_solve(s, cfg, Mode::oseen);
    cfg.initial_kernel = 1.0;
    const FixedPointResult b = fixed_point_solve(s, cfg, Mode::oseen);
    c.expect(a.converged && b.converged, "both guesses converge");
    KernelTrace d = a.k;
    for (std::size_t i = 0; i < d.samples.size(); ++i) d.samples[i] -= b.k.samples[i];
    c.below(l2_norm(d), 10 * cfg.tol, "||k_a - k_b||");
}

// 8 ─ equivalence with the direct problem, both directions
void equivalence(Criterion& c)
{
    std::vector<double> momentum, reverse;
    for (double dt : {1e-3, 5e-4}) {
        TwinDataset twin;
        const ProblemSetup s = oseen_twin_setup(dt, &twin);
        FixedPointConfig cfg;
        cfg.tau = 0.25;
        cfg.dt = dt;
        const FixedPointResult r = fixed_point_solve(s, cfg, Mode::oseen);
        c.expect(r.converged, "inverse converged at dt=" + std::to_string(dt));
        const ResidualReport res = residual_check(reconstruct_u(r.v, s.u0), r.k, s, Mode::oseen);
        c.below(res.overdetermination, 10 * cfg.tol, "dt=" + std::to_string(dt) + " measurement residual");
        c.below(res.divergence, 1e-12, "divergence");
        momentum.push_back(res.momentum_relative);
        const KernelTrace k_back = kernel_update_oseen(twin.v, twin.k_true, s);
        reverse.push_back(rel_kernel_error(k_back, twin.k_true));
    }
    c.below(momentum[0], 1e-5, "relative momentum residual");
    c.above(momentum[0] / momentum[1], 3.0, "momentum residual reduction under dt-halving");
    c.below(reverse[0], 1e-4, "reverse-direction kernel error");
    c.above(reverse[0] / reverse[1], 3.0, "reverse-direction reduction under dt-halving");
}

// 9 ─ violated assumptions exit 3 and name the assumption
void assumption_gate(Criterion& c)
{
    const auto dir = kvtest::scratch_dir("acc_gate");
    auto named = [&](const kvtest::RunOutcome& r, const std::string& name) {
        c.expect(r.exit_code == 3, name + ": exit " + std::to_string(r.exit_code));
        c.expect(r.err.find(name) != std::string::npos, name + ": named in message");
    };
    named(kvtest::run_cli("check --config \"" + kvtest::config_path("compressible_u0.json") + "\"", dir), "A1");
    named(kvtest::run_cli("twin --config \"" + kvtest::config_path("compressible_u0.json") + "\" --output \"" +
                              (dir / "a1").string() + "\"",
                          dir),
          "A1");
    named(kvtest::run_cli("check --config \"" + kvtest::config_path("degenerate_phi.json") + "\"", dir), "A3");

    const std::string cfg = kvtest::config_path("kv_twin.json");
    auto r = kvtest::run_cli("forward --config \"" + cfg + "\" --output \"" + (dir / "fwd").string() + "\"", dir);
    c.expect(r.exit_code == 0, "forward run for A5 data");
    MeasurementTrace m = ingest_measurement((dir / "fwd" / "measurement.csv").string());
    m.r[0] *= 1.0 + 1e-4;
    write_measurement_csv((dir / "bad.csv").string(), m);
    named(kvtest::run_cli("invert --config \"" + cfg + "\" --measurement \"" + (dir / "bad.csv").string() +
                              "\" --output \"" + (dir / "inv").string() + "\"",
                          dir),
          "A5");
}

}  // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<void(Criterion&)>>> criteria = {
        {"operator invariants (2D N=16, 3D N=8, 100 fields)", operator_suite},
        {"quadrature bounds, order and splitting", quadrature_suite},
        {"forward exact decay and KV temporal order", forward_suite},
        {"Oseen local twin", oseen_twin},
        {"KV local twin", kv_twin},
        {"global Oseen march to T=1", oseen_march},
        {"uniqueness from distinct initial guesses", uniqueness},
        {"equivalence with the direct problem", equivalence},
        {"assumption gate", assumption_gate},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Criterion c;
        const auto start = std::chrono::steady_clock::now();
        try {
            criteria[i].second(c);
        } catch (const std::exception& e) {
            c.expect(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s criterion %zu: %s (%.1f s)\n", c.passed() ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    secs);
        for (const auto& note : c.notes()) std::printf("      %s\n", note.c_str());
        for (const auto& f : c.failures()) std::printf("    failed: %s\n", f.c_str());
        std::fflush(stdout);
        failed += c.passed() ? 0 : 1;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
