#include "kvmem.h"

#include "kvmem/config.hpp"
#include "kvmem/errors.hpp"
#include "kvmem/selftest.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <new>

struct kvm_config {
    kvmem::RunConfig cfg;
};

struct kvm_measurement {
    kvmem::MeasurementTrace trace;
};

struct kvm_result {
    kvmem::KernelTrace k;
    bool converged = false;
    std::string diagnostics;
};

namespace {

using json = nlohmann::json;

thread_local std::string last_error;
thread_local std::string last_assumption;

char* dup_string(const std::string& s)
{
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

kvm_status fail(kvm_status status, const std::string& message)
{
    last_error = message;
    return status;
}

/// Runs body and translates library exceptions into status codes.
template <typename F>
kvm_status guarded(F&& body)
{
    last_error.clear();
    last_assumption.clear();
    try {
        return body();
    } catch (const kvmem::AssumptionError& e) {
        last_assumption = e.assumption();
        return fail(KVM_ASSUMPTION, "assumption " + e.assumption() + " violated: " + e.what());
    } catch (const kvmem::IoError& e) {
        return fail(KVM_ERR_IO, e.what());
    } catch (const kvmem::DivergenceError& e) {
        return fail(KVM_ERR_NUMERICAL, std::string(e.what()) + " (step " + std::to_string(e.step()) + ")");
    } catch (const kvmem::GlueError& e) {
        return fail(KVM_ERR_NUMERICAL, e.what());
    } catch (const kvmem::ConfigError& e) {
        return fail(KVM_ERR_USAGE, e.what());
    } catch (const kvmem::InvalidArgument& e) {
        return fail(KVM_ERR_USAGE, e.what());
    } catch (const kvmem::ShapeError& e) {
        return fail(KVM_ERR_USAGE, e.what());
    } catch (const std::bad_alloc&) {
        return fail(KVM_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(KVM_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(KVM_ERR_INTERNAL, "unknown error");
    }
}

kvm_status require(bool ok, const char* message)
{
    return ok ? KVM_OK : fail(KVM_ERR_USAGE, message);
}

kvmem::FixedPointConfig solver_with_callback(const kvmem::RunConfig& rc, kvm_line_callback cb, void* user)
{
    kvmem::FixedPointConfig fp = rc.solver;
    if (cb) {
        fp.on_iteration = [cb, user](const kvmem::IterationInfo& it) {
            const json line = {{"window", it.window},     {"iteration", it.iteration}, {"tau", it.tau},
                               {"delta", it.delta},       {"ratio", it.ratio},         {"iterate_norm", it.iterate_norm}};
            cb(line.dump().c_str(), user);
        };
    }
    return fp;
}

/// Assumption failures abort before any iteration.
void require_assumptions(const kvmem::ProblemSetup& setup, kvmem::Mode mode)
{
    const kvmem::AssumptionReport report = kvmem::check_assumptions(setup, mode);
    if (const kvmem::AssumptionCheck* bad = report.first_failure()) throw kvmem::AssumptionError(bad->name, bad->detail);
}

struct Outcome {
    kvmem::KernelTrace k;
    bool converged = false;
    json diagnostics;
};

Outcome invert_local(const kvmem::RunConfig& rc, const kvmem::ProblemSetup& setup, kvm_line_callback cb, void* user)
{
    require_assumptions(setup, rc.mode);
    const kvmem::FixedPointResult r = kvmem::fixed_point_solve(setup, solver_with_callback(rc, cb, user), rc.mode);
    const kvmem::ResidualReport res =
        kvmem::residual_check(kvmem::reconstruct_u(r.v, setup.u0), r.k, setup, rc.mode);
    const kvmem::AssumptionReport report = kvmem::check_assumptions(setup, rc.mode);
    json d = json::parse(kvmem::fixed_point_json(r, &res, &report));
    d["command"] = "invert";
    return {r.k, r.converged, std::move(d)};
}

Outcome invert_march(const kvmem::RunConfig& rc, const kvmem::ProblemSetup& setup, kvm_line_callback cb, void* user)
{
    require_assumptions(setup, rc.mode);
    const kvmem::MarchResult r = kvmem::march_global(setup, solver_with_callback(rc, cb, user), rc.T, rc.mode);
    const kvmem::AssumptionReport report = kvmem::check_assumptions(setup, rc.mode);
    json d;
    if (!r.solution.v.fields.empty()) {
        const kvmem::ResidualReport res =
            kvmem::residual_check(kvmem::reconstruct_u(r.solution.v, setup.u0), r.solution.k, setup, rc.mode);
        d = json::parse(kvmem::march_json(r, &res, &report));
    } else {
        d = json::parse(kvmem::march_json(r, nullptr, &report));
    }
    d["command"] = "march";
    return {r.solution.k, r.completed, std::move(d)};
}

kvm_status finish(Outcome o, const kvmem::RunConfig& rc, kvm_result** out)
{
    o.diagnostics["mode"] = kvmem::mode_name(rc.mode);
    o.diagnostics["dt"] = rc.dt;
    auto* r = new kvm_result{std::move(o.k), o.converged, o.diagnostics.dump(2)};
    *out = r;
    return r->converged ? KVM_OK : fail(KVM_NOT_CONVERGED, "reconstruction did not converge");
}

}  // namespace

extern "C" {

const char* kvm_version(void) { return "1.0.0"; }

const char* kvm_status_string(kvm_status status)
{
    switch (status) {
    case KVM_OK: return "ok";
    case KVM_ERR_USAGE: return "usage error";
    case KVM_NOT_CONVERGED: return "not converged";
    case KVM_ASSUMPTION: return "assumption violated";
    case KVM_ERR_IO: return "i/o error";
    case KVM_ERR_NUMERICAL: return "numerical failure";
    case KVM_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* kvm_last_error(void) { return last_error.c_str(); }
const char* kvm_last_assumption(void) { return last_assumption.c_str(); }
void kvm_string_free(char* s) { std::free(s); }

kvm_status kvm_config_load(const char* path, kvm_config** out)
{
    return guarded([&] {
        if (auto s = require(path && out, "kvm_config_load: null argument")) return s;
        *out = new kvm_config{kvmem::parse_config(path)};
        return KVM_OK;
    });
}

kvm_status kvm_config_parse(const char* json_text, const char* base_dir, kvm_config** out)
{
    return guarded([&] {
        if (auto s = require(json_text && out, "kvm_config_parse: null argument")) return s;
        *out = new kvm_config{kvmem::parse_config_text(json_text, base_dir ? base_dir : ".")};
        return KVM_OK;
    });
}

void kvm_config_free(kvm_config* cfg) { delete cfg; }

kvm_status kvm_config_set_output_dir(kvm_config* cfg, const char* dir)
{
    return guarded([&] {
        if (auto s = require(cfg && dir && *dir, "kvm_config_set_output_dir: null or empty argument")) return s;
        cfg->cfg.io.output_dir = dir;
        return KVM_OK;
    });
}

kvm_status kvm_config_output_path(const kvm_config* cfg, const char* which, char** out)
{
    return guarded([&] {
        if (auto s = require(cfg && which && out, "kvm_config_output_path: null argument")) return s;
        const kvmem::IoPaths& io = cfg->cfg.io;
        const std::string w = which;
        std::string name;
        if (w == "measurement") name = io.measurement;
        else if (w == "kernel") name = io.kernel;
        else if (w == "diagnostics") name = io.diagnostics;
        else if (w == "trajectory") name = io.trajectory;
        else return fail(KVM_ERR_USAGE, "unknown output '" + w + "'");
        *out = dup_string(name.empty() ? std::string() : cfg->cfg.output_path(name));
        return KVM_OK;
    });
}

kvm_status kvm_measurement_load(const char* path, const kvm_config* cfg, kvm_measurement** out)
{
    return guarded([&] {
        if (auto s = require(path && out, "kvm_measurement_load: null argument")) return s;
        const kvmem::SmoothingOptions sm = cfg ? cfg->cfg.smoothing : kvmem::SmoothingOptions{};
        *out = new kvm_measurement{kvmem::ingest_measurement(path, sm)};
        return KVM_OK;
    });
}

kvm_status kvm_measurement_save(const kvm_measurement* m, const char* path)
{
    return guarded([&] {
        if (auto s = require(m && path, "kvm_measurement_save: null argument")) return s;
        kvmem::write_measurement_csv(path, m->trace);
        return KVM_OK;
    });
}

kvm_status kvm_measurement_samples(const kvm_measurement* m, size_t* count, double* dt)
{
    return guarded([&] {
        if (auto s = require(m != nullptr, "kvm_measurement_samples: null measurement")) return s;
        if (count) *count = m->trace.size();
        if (dt) *dt = m->trace.dt;
        return KVM_OK;
    });
}

void kvm_measurement_free(kvm_measurement* m) { delete m; }

kvm_status kvm_forward(const kvm_config* cfg, kvm_measurement** measurement, char** summary_json)
{
    return guarded([&] {
        if (auto s = require(cfg != nullptr, "kvm_forward: null config")) return s;
        const kvmem::RunConfig& rc = cfg->cfg;
        const kvmem::ProblemSetup setup = kvmem::make_setup(rc);
        kvmem::ForwardOptions opts;
        opts.substeps = rc.substeps;
        const kvmem::ForwardRun run = kvmem::run_direct(setup.u0, setup.params, rc.T, rc.dt, setup.phi, opts);

        double max_div = 0.0, max_norm = 0.0;
        for (const auto& u : run.u.fields) {
            max_div = std::max(max_div, kvmem::divergence_norm(u));
            max_norm = std::max(max_norm, kvmem::sobolev_norm(u, 0.0));
        }
        json summary = {{"command", "forward"},
                        {"mode", kvmem::mode_name(rc.mode)},
                        {"T", rc.T},
                        {"dt", rc.dt},
                        {"substeps", rc.substeps},
                        {"samples", run.u.fields.size()},
                        {"kernel_l2", kvmem::l2_norm(run.kernel)},
                        {"initial_l2", kvmem::sobolev_norm(run.u.fields.front(), 0.0)},
                        {"final_l2", kvmem::sobolev_norm(run.u.fields.back(), 0.0)},
                        {"max_l2", max_norm},
                        {"max_divergence", max_div},
                        {"r_initial", run.measurement.r.front()},
                        {"r_final", run.measurement.r.back()}};
        if (!rc.io.trajectory.empty()) {
            const std::string path = rc.output_path(rc.io.trajectory);
            kvmem::write_trajectory(path, run.u);
            summary["trajectory"] = path;
        }
        if (summary_json) *summary_json = dup_string(summary.dump(2));
        if (measurement) *measurement = new kvm_measurement{run.measurement};
        return KVM_OK;
    });
}

kvm_status kvm_check(const kvm_config* cfg, const kvm_measurement* measurement, char** report_json)
{
    return guarded([&] {
        if (auto s = require(cfg != nullptr, "kvm_check: null config")) return s;
        kvmem::ProblemSetup setup = kvmem::make_setup(cfg->cfg);
        if (measurement) setup.measurement = measurement->trace;
        const kvmem::AssumptionReport report = kvmem::check_assumptions(setup, cfg->cfg.mode);
        if (report_json) *report_json = dup_string(kvmem::assumption_report_json(report));
        if (const kvmem::AssumptionCheck* bad = report.first_failure()) {
            last_assumption = bad->name;
            return fail(KVM_ASSUMPTION, "assumption " + bad->name + " violated: " + bad->detail);
        }
        return KVM_OK;
    });
}

kvm_status kvm_invert(const kvm_config* cfg, const kvm_measurement* measurement, kvm_line_callback cb, void* user,
                      kvm_result** out)
{
    return guarded([&] {
        if (auto s = require(cfg && measurement && out, "kvm_invert: null argument")) return s;
        kvmem::ProblemSetup setup = kvmem::make_setup(cfg->cfg);
        setup.measurement = measurement->trace;
        return finish(invert_local(cfg->cfg, setup, cb, user), cfg->cfg, out);
    });
}

kvm_status kvm_march(const kvm_config* cfg, const kvm_measurement* measurement, kvm_line_callback cb, void* user,
                     kvm_result** out)
{
    return guarded([&] {
        if (auto s = require(cfg && measurement && out, "kvm_march: null argument")) return s;
        kvmem::ProblemSetup setup = kvmem::make_setup(cfg->cfg);
        setup.measurement = measurement->trace;
        return finish(invert_march(cfg->cfg, setup, cb, user), cfg->cfg, out);
    });
}

kvm_status kvm_twin(const kvm_config* cfg, kvm_line_callback cb, void* user, kvm_result** out)
{
    return guarded([&] {
        if (auto s = require(cfg && out, "kvm_twin: null argument")) return s;
        const kvmem::RunConfig& rc = cfg->cfg;
        kvmem::ProblemSetup setup = kvmem::make_setup(rc);
        kvmem::ForwardOptions opts;
        opts.substeps = rc.substeps;
        const kvmem::TwinDataset twin = kvmem::synthesize_twin(setup, rc.kernel, rc.T, rc.dt, opts);
        setup.measurement = twin.measurement;

        Outcome o = rc.T > rc.tau + 0.5 * rc.dt ? invert_march(rc, setup, cb, user) : invert_local(rc, setup, cb, user);
        o.diagnostics["command"] = "twin";

        const std::size_t n = o.k.samples.size();
        kvmem::KernelTrace truth{rc.dt, {twin.k_true.samples.begin(), twin.k_true.samples.begin() + n}};
        kvmem::KernelTrace diff = truth;
        for (std::size_t i = 0; i < n; ++i) diff.samples[i] = o.k.samples[i] - truth.samples[i];
        const double err = kvmem::l2_norm(diff);
        const double ref = kvmem::l2_norm(truth);
        o.diagnostics["kernel_error_l2"] = err;
        o.diagnostics["true_kernel_l2"] = ref;
        o.diagnostics["kernel_error_relative"] = ref > 0.0 ? json(err / ref) : json(nullptr);
        return finish(std::move(o), rc, out);
    });
}

int kvm_result_converged(const kvm_result* r) { return r && r->converged ? 1 : 0; }

kvm_status kvm_result_kernel(const kvm_result* r, const double** samples, size_t* count, double* dt)
{
    return guarded([&] {
        if (auto s = require(r != nullptr, "kvm_result_kernel: null result")) return s;
        if (samples) *samples = r->k.samples.data();
        if (count) *count = r->k.samples.size();
        if (dt) *dt = r->k.dt;
        return KVM_OK;
    });
}

kvm_status kvm_result_diagnostics_json(const kvm_result* r, char** out)
{
    return guarded([&] {
        if (auto s = require(r && out, "kvm_result_diagnostics_json: null argument")) return s;
        *out = dup_string(r->diagnostics);
        return KVM_OK;
    });
}

kvm_status kvm_result_write_kernel_csv(const kvm_result* r, const char* path)
{
    return guarded([&] {
        if (auto s = require(r && path, "kvm_result_write_kernel_csv: null argument")) return s;
        kvmem::write_kernel_csv(path, r->k);
        return KVM_OK;
    });
}

void kvm_result_free(kvm_result* r) { delete r; }

kvm_status kvm_selftest(char** report_json, int* failures)
{
    return guarded([&] {
        const auto cases = kvmem::run_selftest();
        json arr = json::array();
        int bad = 0;
        for (const auto& c : cases) {
            bad += c.passed ? 0 : 1;
            arr.push_back({{"suite", c.suite}, {"name", c.name}, {"passed", c.passed}, {"value", c.value},
                           {"limit", c.limit}});
        }
        if (failures) *failures = bad;
        if (report_json) *report_json = dup_string(json{{"failures", bad}, {"cases", arr}}.dump(2));
        return bad == 0 ? KVM_OK : fail(KVM_ERR_NUMERICAL, std::to_string(bad) + " self-test checks failed");
    });
}

}  // extern "C"
