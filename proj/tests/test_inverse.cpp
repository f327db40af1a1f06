#include "kvmem/errors.hpp"
#include "kvmem/fields.hpp"
#include "kvmem/inverse.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace kvmem;

namespace {

constexpr double pi = 3.14159265358979323846;

const AssumptionCheck& find(const AssumptionReport& r, const std::string& name)
{
    for (const auto& c : r.checks)
        if (c.name == name) return c;
    throw std::runtime_error("no check named " + name);
}

double relative_error(const KernelTrace& k, const KernelTrace& ref)
{
    KernelTrace d = ref;
    for (std::size_t i = 0; i < d.samples.size(); ++i) d.samples[i] = k.samples[i] - ref.samples[i];
    return l2_norm(d) / l2_norm(ref);
}

/// Small, fast twin: N = 8, dt = 5e-3, window 0.1.
struct SmallTwin {
    ProblemSetup setup;
    TwinDataset twin;
    FixedPointConfig cfg;

    SmallTwin(Mode mode, const KernelSpec& k, double amp = 0.1)
        : setup(kvtest::twin_setup(mode, 8, amp))
    {
        ForwardOptions opts;
        opts.substeps = 4;
        twin = synthesize_twin(setup, k, 0.1, 5e-3, opts);
        setup.measurement = twin.measurement;
        cfg.tau = 0.1;
        cfg.dt = 5e-3;
    }
};

}  // namespace

TEST(Assumptions, NamesFollowTheModel)
{
    const ProblemSetup kv = kvtest::twin_setup(Mode::kv, 8);
    const AssumptionReport a = check_assumptions(kv, Mode::kv);
    ASSERT_EQ(a.checks.size(), 5u);
    for (int i = 0; i < 5; ++i) EXPECT_EQ(a.checks[i].name, "A" + std::to_string(i + 1));
    EXPECT_TRUE(a.passed());
    EXPECT_TRUE(find(a, "A5").skipped);
    EXPECT_EQ(a.first_failure(), nullptr);

    const ProblemSetup os = kvtest::twin_setup(Mode::oseen, 8);
    const AssumptionReport h = check_assumptions(os, Mode::oseen);
    for (int i = 0; i < 5; ++i) EXPECT_EQ(h.checks[i].name, "H" + std::to_string(i + 1));
    EXPECT_TRUE(h.passed());
}

TEST(Assumptions, DetectsViolations)
{
    ProblemSetup s = kvtest::twin_setup(Mode::kv, 8);
    const GridPtr g = s.u0.grid_ptr();
    s.u0 = build_field({"shear", 1.0, {}}, g);  // Δu₀ ⊥ Taylor-Green φ
    AssumptionReport r = check_assumptions(s, Mode::kv);
    ASSERT_NE(r.first_failure(), nullptr);
    EXPECT_EQ(r.first_failure()->name, "A3");

    FieldSpec bad;
    bad.modes.push_back({{1, 1, 0}, {1.0, 0.0, 0.0}, {0.0, 0.0, 0.0}});
    s = kvtest::twin_setup(Mode::kv, 8);
    s.phi = build_field(bad, g);
    r = check_assumptions(s, Mode::kv);
    EXPECT_FALSE(find(r, "A2").passed);

    s = kvtest::twin_setup(Mode::oseen, 8);
    s.params.u_inf = build_field(bad, g);
    EXPECT_FALSE(find(check_assumptions(s, Mode::oseen), "H4").passed);

    SmallTwin t(Mode::kv, zero_kernel());
    EXPECT_TRUE(check_assumptions(t.setup, Mode::kv).passed());
    t.setup.measurement.r[0] *= 1.0 + 1e-3;
    r = check_assumptions(t.setup, Mode::kv);
    ASSERT_NE(r.first_failure(), nullptr);
    EXPECT_EQ(r.first_failure()->name, "A5");
    try {
        fixed_point_solve(t.setup, t.cfg, Mode::kv);
        FAIL() << "expected an assumption failure";
    } catch (const AssumptionError& e) {
        EXPECT_EQ(e.assumption(), "A5");
    }
}

TEST(Assumptions, AlphaClosedForm)
{
    ProblemSetup s = kvtest::twin_setup(Mode::kv, 8);
    s.u0 = build_field({"taylor_green", 0.3, {}}, s.u0.grid_ptr());
    // ⟨φ, Δu₀⟩ = −2·0.3·‖TG‖² = −0.6·2π²
    EXPECT_NEAR(alpha_inverse(s), -1.2 * pi * pi, 1e-12);
    EXPECT_GT(alpha_floor(s), 0.0);
}

TEST(Inverse, InitialVelocityOfRestingOseenFlow)
{
    ProblemSetup s = kvtest::twin_setup(Mode::oseen, 8);
    s.params.u_inf = SpectralField(s.u0.grid_ptr());
    s.u0 = build_field({"taylor_green", 1.0, {}}, s.u0.grid_ptr());
    // (I − μ₁Δ)v₀ = μ₀Δu₀ with |ξ|² = 2
    const SpectralField expected = (-2.0 * s.params.mu0 / (1.0 + 2.0 * s.params.mu1)) * s.u0;
    EXPECT_LT(sobolev_norm(compute_v0(s, Mode::oseen) - expected, 0.0), 1e-14);
}

TEST(Inverse, ZeroKernelTwin)
{
    SmallTwin t(Mode::oseen, zero_kernel());
    const FixedPointResult r = fixed_point_solve(t.setup, t.cfg, Mode::oseen);
    EXPECT_TRUE(r.converged);
    EXPECT_LE(l2_norm(r.k), 1e-6);
    EXPECT_EQ(r.k.samples.size(), 21u);
}

TEST(Inverse, ContractionAndGeometricDecay)
{
    SmallTwin t(Mode::oseen, exponential_kernel(0.5, 0.5));
    std::vector<IterationInfo> seen;
    t.cfg.on_iteration = [&](const IterationInfo& it) { seen.push_back(it); };
    const FixedPointResult r = fixed_point_solve(t.setup, t.cfg, Mode::oseen);
    ASSERT_TRUE(r.converged);
    EXPECT_EQ(static_cast<int>(seen.size()), r.iterations);
    EXPECT_EQ(r.contraction_ratios.size() + 1, r.deltas.size());
    for (double q : r.contraction_ratios) EXPECT_LT(q, 1.0);
    EXPECT_LE(r.deltas.back(), t.cfg.tol * (1.0 + r.iterate_norm));
    EXPECT_LT(relative_error(r.k, t.twin.k_true), 1e-4);
}

TEST(Inverse, ReverseDirectionIsSecondOrder)
{
    // Data generated at the solver's own step is a fixed point of the kernel map to rounding.
    {
        ProblemSetup s = kvtest::twin_setup(Mode::oseen, 8, 0.1);
        const TwinDataset twin = synthesize_twin(s, exponential_kernel(0.5, 0.5), 0.1, 0.01);
        s.measurement = twin.measurement;
        EXPECT_LT(relative_error(kernel_update_oseen(twin.v, twin.k_true, s), twin.k_true), 1e-12);
    }
    // Data from a finer forward solve recovers the true kernel with an O(dt²) defect.
    ForwardOptions fine;
    fine.substeps = 4;
    double prev = 0.0;
    for (int level = 0; level < 3; ++level) {
        const double dt = 0.01 / (1 << level);
        ProblemSetup s = kvtest::twin_setup(Mode::oseen, 8, 0.1);
        const TwinDataset twin = synthesize_twin(s, exponential_kernel(0.5, 0.5), 0.1, dt, fine);
        s.measurement = twin.measurement;
        const double err = relative_error(kernel_update_oseen(twin.v, twin.k_true, s), twin.k_true);
        EXPECT_LT(err, 1e-5);
        if (level > 0) {
            EXPECT_GE(prev / err, 3.0) << "dt = " << dt;
        }
        prev = err;
    }
}

TEST(Inverse, UniqueFixedPoint)
{
    SmallTwin t(Mode::oseen, exponential_kernel(0.5, 0.5));
    const FixedPointResult a = fixed_point_solve(t.setup, t.cfg, Mode::oseen);
    t.cfg.initial_kernel = 2.0;
    const FixedPointResult b = fixed_point_solve(t.setup, t.cfg, Mode::oseen);
    ASSERT_TRUE(a.converged && b.converged);
    KernelTrace d = a.k;
    for (std::size_t i = 0; i < d.samples.size(); ++i) d.samples[i] -= b.k.samples[i];
    EXPECT_LE(l2_norm(d), 10 * t.cfg.tol);
}

TEST(Inverse, NonlinearWindowShrinksUnderSmallness)
{
    SmallTwin t(Mode::kv, exponential_kernel(0.5, 0.5), 0.3);
    t.cfg.enforce_smallness = true;
    const FixedPointResult r = fixed_point_solve(t.setup, t.cfg, Mode::kv);
    ASSERT_TRUE(r.converged) << r.message;
    EXPECT_LE(r.tau * (1.0 + r.iterate_norm + r.iterate_norm * r.iterate_norm), 1.0);
    EXPECT_LT(relative_error(r.k, KernelTrace{t.twin.k_true.dt, {t.twin.k_true.samples.begin(),
                                                                 t.twin.k_true.samples.begin() + r.k.samples.size()}}),
              1e-3);
}

TEST(Inverse, Preconditions)
{
    SmallTwin t(Mode::oseen, zero_kernel());
    FixedPointConfig cfg = t.cfg;
    cfg.tau = 0.2;
    EXPECT_THROW(fixed_point_solve(t.setup, cfg, Mode::oseen), InvalidArgument);
    cfg = t.cfg;
    cfg.dt = 1e-3;
    EXPECT_THROW(fixed_point_solve(t.setup, cfg, Mode::oseen), ShapeError);
    ProblemSetup empty = t.setup;
    empty.measurement = {};
    EXPECT_THROW(fixed_point_solve(empty, t.cfg, Mode::oseen), InvalidArgument);
}

TEST(Inverse, GiveUpReportsNonConvergence)
{
    SmallTwin t(Mode::oseen, exponential_kernel(0.5, 0.5));
    t.cfg.max_iter = 1;
    const FixedPointResult r = fixed_point_solve(t.setup, t.cfg, Mode::oseen);
    EXPECT_FALSE(r.converged);
    EXPECT_GT(r.halvings, 0);
    EXPECT_FALSE(r.message.empty());
}

TEST(Inverse, CombinedNormAndReconstruction)
{
    const GridPtr g = make_grid(2, 8);
    const SpectralField a = random_field(g, 2, 2, true);
    Trajectory v{0.01, std::vector<SpectralField>(11, a)};
    KernelTrace k{0.01, std::vector<double>(11, 0.0)};
    // Constant in time: ‖a‖_{H²} over a window of length 0.1.
    EXPECT_NEAR(combined_norm(v, k), std::sqrt(0.1) * sobolev_norm(a, 2.0), 1e-12);
    Trajectory w = v;
    for (auto& f : w.fields) f *= 3.0;
    k.samples.assign(11, 0.0);
    EXPECT_NEAR(combined_norm(w, k), 3.0 * combined_norm(v, k), 1e-12);

    const SpectralField u0 = random_field(g, 3, 2, true);
    const Trajectory u = reconstruct_u(v, u0);
    for (std::size_t n = 0; n <= 10; ++n) EXPECT_LT(sobolev_norm(u.fields[n] - u0 - (0.01 * n) * a, 0.0), 1e-14);
}

TEST(Residuals, ForwardTrajectoryIsConsistent)
{
    ProblemSetup s = kvtest::twin_setup(Mode::kv, 8, 0.5);
    std::vector<double> rel;
    for (double dt : {4e-3, 2e-3}) {
        const TwinDataset twin = synthesize_twin(s, exponential_kernel(0.5, 0.5), 0.1, dt);
        s.measurement = twin.measurement;
        const ResidualReport r = residual_check(twin.u, twin.k_true, s, Mode::kv);
        EXPECT_LT(r.divergence, 1e-13);
        EXPECT_LT(r.overdetermination, 1e-11);
        rel.push_back(r.momentum_relative);
    }
    EXPECT_LT(rel[1], 1e-4);
    EXPECT_GE(rel[0] / rel[1], 3.0);
}
