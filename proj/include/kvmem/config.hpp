#pragma once

/// @file config.hpp
/// @brief JSON run configuration, measurement ingestion and result emission.

#include "kvmem/continuation.hpp"
#include "kvmem/fields.hpp"

#include <optional>
#include <string>

namespace kvmem {

/// Local polynomial (Savitzky–Golay type) differentiation of noisy traces.
struct SmoothingOptions {
    bool enabled = false;
    int half_window = 3;  ///< fit uses 2·half_window + 1 samples
    int order = 3;
};

struct IoPaths {
    std::string output_dir = ".";
    std::string measurement = "measurement.csv";
    std::string kernel = "kernel.csv";
    std::string diagnostics = "diagnostics.json";
    std::string trajectory;  ///< empty: no trajectory dump
};

struct RunConfig {
    Mode mode = Mode::oseen;
    int dim = 2;
    int n = 16;
    double mu0 = 0.0;
    double mu1 = 0.0;
    std::optional<PhysicalParameters> physical;
    std::optional<DerivedParameters> derived;
    KernelSpec kernel = zero_kernel();
    FieldSpec u0;
    FieldSpec phi;
    std::optional<FieldSpec> u_inf;
    double T = 0.25;
    double dt = 1e-3;
    double tau = 0.25;
    int substeps = 1;  ///< forward internal steps per sample
    FixedPointConfig solver;
    double alpha_floor_rel = 1e-8;
    double compat_tol = 1e-6;
    SmoothingOptions smoothing;
    IoPaths io;
    std::string base_dir = ".";  ///< relative paths in the file resolve against this

    /// Path under io.output_dir (absolute paths pass through).
    std::string output_path(const std::string& name) const;
};

/// Throws ConfigError on malformed, contradictory or unknown keys and
/// IoError when the file cannot be read.
RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& json_text, const std::string& base_dir = ".");

GridPtr make_grid(const RunConfig& cfg);
ModelParams make_params(const RunConfig& cfg, const GridPtr& grid);
/// Fields, model and tolerances; the measurement is left empty.
ProblemSetup make_setup(const RunConfig& cfg);

/// Reads `t,r[,rp[,rpp]]`.  Missing derivative columns are filled by centered
/// differences with second-order one-sided formulas at the ends, or by local
/// polynomial fits when smoothing is enabled.  Throws IoError on malformed
/// files, non-uniform sampling (1e−9 relative) or fewer than 4 samples.
MeasurementTrace ingest_measurement(const std::string& path, const SmoothingOptions& smoothing = {});

/// Derivative estimate of uniformly sampled data (order 1 or 2).
std::vector<double> differentiate(const std::vector<double>& f, double dt, int order,
                                  const SmoothingOptions& smoothing = {});

std::string assumption_report_json(const AssumptionReport& report);
std::string fixed_point_json(const FixedPointResult& result, const ResidualReport* residuals,
                             const AssumptionReport* report);
std::string march_json(const MarchResult& result, const ResidualReport* residuals, const AssumptionReport* report);

/// Flat little-endian complex128 arrays [step][component][mode] plus a JSON
/// sidecar `<path>.json` describing the layout.
void write_trajectory(const std::string& path, const Trajectory& traj);

}  // namespace kvmem
