#include "kvmem/config.hpp"

#include "csv.hpp"
#include "kvmem/errors.hpp"

#include <json.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace kvmem {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void require_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed)
{
    if (!obj.is_object()) throw ConfigError("'" + where + "' must be a JSON object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (!ok.count(key)) throw ConfigError("unknown key '" + key + "' in '" + where + "'");
    }
}

double number(const json& obj, const char* key, const std::string& where)
{
    const json& v = obj.at(key);
    if (!v.is_number()) throw ConfigError("'" + where + "." + key + "' must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError("'" + where + "." + key + "' must be finite");
    return x;
}

double number_or(const json& obj, const char* key, const std::string& where, double fallback)
{
    return obj.contains(key) ? number(obj, key, where) : fallback;
}

int integer(const json& obj, const char* key, const std::string& where)
{
    const json& v = obj.at(key);
    if (!v.is_number_integer()) throw ConfigError("'" + where + "." + key + "' must be an integer");
    return v.get<int>();
}

int integer_or(const json& obj, const char* key, const std::string& where, int fallback)
{
    return obj.contains(key) ? integer(obj, key, where) : fallback;
}

std::string text(const json& obj, const char* key, const std::string& where)
{
    const json& v = obj.at(key);
    if (!v.is_string()) throw ConfigError("'" + where + "." + key + "' must be a string");
    return v.get<std::string>();
}

bool boolean_or(const json& obj, const char* key, const std::string& where, bool fallback)
{
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_boolean()) throw ConfigError("'" + where + "." + key + "' must be true or false");
    return v.get<bool>();
}

std::string resolve(const std::string& base_dir, const std::string& path)
{
    const fs::path p(path);
    if (p.is_absolute()) return path;
    return (fs::path(base_dir) / p).lexically_normal().string();
}

json load_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
}

std::array<double, 3> vec3(const json& v, const std::string& where)
{
    if (!v.is_array() || v.size() > 3) throw ConfigError("'" + where + "' must be an array of up to 3 numbers");
    std::array<double, 3> out{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) throw ConfigError("'" + where + "' must contain numbers");
        out[i] = v[i].get<double>();
    }
    return out;
}

std::vector<ModeTerm> parse_modes(const json& arr, const std::string& where)
{
    if (!arr.is_array()) throw ConfigError("'" + where + "' must be an array");
    std::vector<ModeTerm> modes;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string w = where + "[" + std::to_string(i) + "]";
        require_keys(arr[i], w, {"xi", "cos", "sin"});
        if (!arr[i].contains("xi")) throw ConfigError("'" + w + "' needs a wavevector 'xi'");
        ModeTerm m;
        const json& xi = arr[i].at("xi");
        if (!xi.is_array() || xi.size() > 3) throw ConfigError("'" + w + ".xi' must be an array of up to 3 integers");
        for (std::size_t a = 0; a < xi.size(); ++a) {
            if (!xi[a].is_number_integer()) throw ConfigError("'" + w + ".xi' must contain integers");
            m.xi[a] = xi[a].get<int>();
        }
        if (arr[i].contains("cos")) m.a_cos = vec3(arr[i].at("cos"), w + ".cos");
        if (arr[i].contains("sin")) m.a_sin = vec3(arr[i].at("sin"), w + ".sin");
        modes.push_back(m);
    }
    return modes;
}

FieldSpec parse_field(const json& obj, const std::string& where, const std::string& base_dir)
{
    require_keys(obj, where, {"preset", "amplitude", "modes", "file"});
    const int sources = static_cast<int>(obj.contains("preset")) + static_cast<int>(obj.contains("modes")) +
                        static_cast<int>(obj.contains("file"));
    if (sources != 1) throw ConfigError("'" + where + "' needs exactly one of 'preset', 'modes' or 'file'");
    FieldSpec f;
    f.amplitude = number_or(obj, "amplitude", where, 1.0);
    if (obj.contains("preset")) {
        f.preset = text(obj, "preset", where);
    } else if (obj.contains("modes")) {
        f.modes = parse_modes(obj.at("modes"), where + ".modes");
        if (f.modes.empty()) throw ConfigError("'" + where + ".modes' is empty");
    } else {
        const std::string path = resolve(base_dir, text(obj, "file", where));
        const json doc = load_json_file(path);
        require_keys(doc, path, {"modes"});
        if (!doc.contains("modes")) throw ConfigError("'" + path + "' needs a 'modes' array");
        f.modes = parse_modes(doc.at("modes"), path + ".modes");
        if (f.modes.empty()) throw ConfigError("'" + path + "' lists no modes");
    }
    return f;
}

void make_dirs_for(const std::string& path)
{
    const fs::path parent = fs::path(path).parent_path();
    if (parent.empty()) return;
    std::error_code ec;
    fs::create_directories(parent, ec);
    if (ec) throw IoError("cannot create directory '" + parent.string() + "': " + ec.message());
}

/// Polynomial least-squares derivative of order `deriv` at sample n.
double local_fit_derivative(const std::vector<double>& f, double dt, std::size_t n, int deriv,
                            const SmoothingOptions& s)
{
    const std::size_t size = f.size();
    const std::size_t width = static_cast<std::size_t>(2 * s.half_window + 1);
    std::size_t lo = n >= static_cast<std::size_t>(s.half_window) ? n - s.half_window : 0;
    if (lo + width > size) lo = size - width;
    Eigen::MatrixXd V(width, s.order + 1);
    Eigen::VectorXd y(width);
    for (std::size_t i = 0; i < width; ++i) {
        const double x = static_cast<double>(lo + i) - static_cast<double>(n);
        double p = 1.0;
        for (int c = 0; c <= s.order; ++c) {
            V(static_cast<Eigen::Index>(i), c) = p;
            p *= x;
        }
        y(static_cast<Eigen::Index>(i)) = f[lo + i];
    }
    const Eigen::VectorXd c = V.colPivHouseholderQr().solve(y);
    return deriv == 1 ? c(1) / dt : 2.0 * c(2) / (dt * dt);
}

json assumption_json(const AssumptionReport& report)
{
    json arr = json::array();
    for (const auto& c : report.checks) {
        arr.push_back({{"name", c.name},
                       {"passed", c.passed},
                       {"skipped", c.skipped},
                       {"value", c.value},
                       {"threshold", c.threshold},
                       {"detail", c.detail}});
    }
    return arr;
}

json residual_json(const ResidualReport& r)
{
    return {{"momentum", r.momentum},
            {"momentum_relative", r.momentum_relative},
            {"divergence", r.divergence},
            {"overdetermination", r.overdetermination}};
}

json result_json(const FixedPointResult& r)
{
    return {{"converged", r.converged},
            {"iterations", r.iterations},
            {"tau", r.tau},
            {"halvings", r.halvings},
            {"deltas", r.deltas},
            {"contraction_ratios", r.contraction_ratios},
            {"iterate_norm", r.iterate_norm},
            {"kernel_l2", l2_norm(r.k)},
            {"message", r.message}};
}

}  // namespace

std::string RunConfig::output_path(const std::string& name) const
{
    if (fs::path(name).is_absolute()) return name;
    return (fs::path(io.output_dir) / name).lexically_normal().string();
}

RunConfig parse_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const fs::path dir = fs::path(path).parent_path();
    return parse_config_text(ss.str(), dir.empty() ? "." : dir.string());
}

RunConfig parse_config_text(const std::string& json_text, const std::string& base_dir)
{
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    require_keys(root, "config", {"description", "mode", "grid", "model", "kernel", "fields", "time", "solver", "io"});
    for (const char* key : {"mode", "grid", "model", "fields", "time"})
        if (!root.contains(key)) throw ConfigError(std::string("config is missing '") + key + "'");

    RunConfig cfg;
    cfg.base_dir = base_dir;

    const std::string mode = text(root, "mode", "config");
    if (mode == "kv") cfg.mode = Mode::kv;
    else if (mode == "oseen") cfg.mode = Mode::oseen;
    else throw ConfigError("'mode' must be \"kv\" or \"oseen\"");

    const json& grid = root.at("grid");
    require_keys(grid, "grid", {"dim", "N"});
    cfg.dim = integer_or(grid, "dim", "grid", 2);
    cfg.n = integer_or(grid, "N", "grid", 16);
    if (cfg.dim != 2 && cfg.dim != 3) throw ConfigError("'grid.dim' must be 2 or 3");
    if (cfg.n < 4 || cfg.n % 2 != 0) throw ConfigError("'grid.N' must be an even integer >= 4");

    const json& model = root.at("model");
    require_keys(model, "model", {"mu0", "mu1", "lambda", "kappa1", "kappa2", "nu"});
    const bool direct = model.contains("mu0") || model.contains("mu1");
    const bool physical = model.contains("lambda") || model.contains("kappa1") || model.contains("kappa2") ||
                          model.contains("nu");
    if (direct && physical)
        throw ConfigError("'model' takes either mu0/mu1 or lambda/kappa1/kappa2/nu, not both");
    if (direct) {
        if (!model.contains("mu0") || !model.contains("mu1"))
            throw ConfigError("'model' needs both mu0 and mu1");
        cfg.mu0 = number(model, "mu0", "model");
        cfg.mu1 = number(model, "mu1", "model");
        if (!(cfg.mu0 > 0.0) || !(cfg.mu1 > 0.0)) throw ConfigError("'model.mu0' and 'model.mu1' must be positive");
    } else if (physical) {
        for (const char* key : {"lambda", "kappa1", "kappa2", "nu"})
            if (!model.contains(key)) throw ConfigError(std::string("'model' is missing '") + key + "'");
        PhysicalParameters p{number(model, "lambda", "model"), number(model, "kappa1", "model"),
                             number(model, "kappa2", "model"), number(model, "nu", "model")};
        try {
            cfg.derived = derive_parameters(p);
        } catch (const InvalidArgument& e) {
            throw ConfigError(std::string("model: ") + e.what());
        }
        cfg.physical = p;
        cfg.mu0 = cfg.derived->mu0;
        cfg.mu1 = cfg.derived->mu1;
    } else {
        throw ConfigError("'model' needs mu0/mu1 or lambda/kappa1/kappa2/nu");
    }

    std::string ktype = cfg.physical ? "physical" : "zero";
    json kernel = root.value("kernel", json::object());
    require_keys(kernel, "kernel", {"type", "gamma", "delta", "file"});
    if (kernel.contains("type")) ktype = text(kernel, "type", "kernel");
    if (ktype == "zero") {
        cfg.kernel = zero_kernel();
    } else if (ktype == "exponential") {
        if (!kernel.contains("gamma") || !kernel.contains("delta"))
            throw ConfigError("exponential kernel needs 'gamma' and 'delta'");
        cfg.kernel = exponential_kernel(number(kernel, "gamma", "kernel"), number(kernel, "delta", "kernel"));
    } else if (ktype == "physical") {
        if (!cfg.physical) throw ConfigError("kernel type 'physical' needs lambda/kappa1/kappa2/nu in 'model'");
        cfg.kernel = physical_kernel(*cfg.physical);
    } else if (ktype == "tabulated") {
        if (!kernel.contains("file")) throw ConfigError("tabulated kernel needs 'file'");
        cfg.kernel = tabulated_kernel(read_kernel_csv(resolve(base_dir, text(kernel, "file", "kernel"))));
    } else {
        throw ConfigError("unknown kernel type '" + ktype + "'");
    }

    const json& fields = root.at("fields");
    require_keys(fields, "fields", {"u0", "phi", "u_inf"});
    if (!fields.contains("u0") || !fields.contains("phi")) throw ConfigError("'fields' needs 'u0' and 'phi'");
    cfg.u0 = parse_field(fields.at("u0"), "fields.u0", base_dir);
    cfg.phi = parse_field(fields.at("phi"), "fields.phi", base_dir);
    if (fields.contains("u_inf")) cfg.u_inf = parse_field(fields.at("u_inf"), "fields.u_inf", base_dir);
    if (cfg.mode == Mode::oseen && !cfg.u_inf) throw ConfigError("oseen mode needs 'fields.u_inf'");

    const json& time = root.at("time");
    require_keys(time, "time", {"T", "dt", "tau", "substeps"});
    if (!time.contains("T") || !time.contains("dt")) throw ConfigError("'time' needs 'T' and 'dt'");
    cfg.T = number(time, "T", "time");
    cfg.dt = number(time, "dt", "time");
    cfg.tau = number_or(time, "tau", "time", cfg.T);
    cfg.substeps = integer_or(time, "substeps", "time", 1);
    if (!(cfg.dt > 0.0 && cfg.tau > cfg.dt && cfg.T >= cfg.tau))
        throw ConfigError("time parameters must satisfy T >= tau > dt > 0");
    if (cfg.substeps < 1) throw ConfigError("'time.substeps' must be at least 1");
    for (double len : {cfg.T, cfg.tau}) {
        const double ratio = len / cfg.dt;
        if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
            throw ConfigError("T and tau must be integer multiples of dt");
    }

    cfg.solver.tau = cfg.tau;
    cfg.solver.dt = cfg.dt;
    if (root.contains("solver")) {
        const json& s = root.at("solver");
        require_keys(s, "solver", {"tol", "max_iter", "enforce_smallness", "initial_kernel", "stall_limit",
                                   "alpha_floor_rel", "compat_tol", "smoothing"});
        cfg.solver.tol = number_or(s, "tol", "solver", cfg.solver.tol);
        cfg.solver.max_iter = integer_or(s, "max_iter", "solver", cfg.solver.max_iter);
        cfg.solver.enforce_smallness = boolean_or(s, "enforce_smallness", "solver", cfg.solver.enforce_smallness);
        cfg.solver.initial_kernel = number_or(s, "initial_kernel", "solver", cfg.solver.initial_kernel);
        cfg.solver.stall_limit = integer_or(s, "stall_limit", "solver", cfg.solver.stall_limit);
        cfg.alpha_floor_rel = number_or(s, "alpha_floor_rel", "solver", cfg.alpha_floor_rel);
        cfg.compat_tol = number_or(s, "compat_tol", "solver", cfg.compat_tol);
        if (s.contains("smoothing")) {
            const json& sm = s.at("smoothing");
            require_keys(sm, "solver.smoothing", {"enabled", "half_window", "order"});
            cfg.smoothing.enabled = boolean_or(sm, "enabled", "solver.smoothing", false);
            cfg.smoothing.half_window = integer_or(sm, "half_window", "solver.smoothing", cfg.smoothing.half_window);
            cfg.smoothing.order = integer_or(sm, "order", "solver.smoothing", cfg.smoothing.order);
            if (cfg.smoothing.half_window < 1 || cfg.smoothing.order < 2 ||
                cfg.smoothing.order >= 2 * cfg.smoothing.half_window + 1)
                throw ConfigError("smoothing needs half_window >= 1 and 2 <= order < 2*half_window+1");
        }
    }
    if (!(cfg.solver.tol > 0.0)) throw ConfigError("'solver.tol' must be positive");
    if (cfg.solver.max_iter < 1) throw ConfigError("'solver.max_iter' must be at least 1");
    if (cfg.solver.stall_limit < 1) throw ConfigError("'solver.stall_limit' must be at least 1");
    if (!(cfg.alpha_floor_rel >= 0.0) || !(cfg.compat_tol > 0.0))
        throw ConfigError("'solver.alpha_floor_rel' must be >= 0 and 'solver.compat_tol' > 0");

    if (root.contains("io")) {
        const json& io = root.at("io");
        require_keys(io, "io", {"output_dir", "measurement", "kernel", "diagnostics", "trajectory"});
        if (io.contains("output_dir")) cfg.io.output_dir = text(io, "output_dir", "io");
        if (io.contains("measurement")) cfg.io.measurement = text(io, "measurement", "io");
        if (io.contains("kernel")) cfg.io.kernel = text(io, "kernel", "io");
        if (io.contains("diagnostics")) cfg.io.diagnostics = text(io, "diagnostics", "io");
        if (io.contains("trajectory")) cfg.io.trajectory = text(io, "trajectory", "io");
    }
    return cfg;
}

GridPtr make_grid(const RunConfig& cfg) { return make_grid(cfg.dim, cfg.n); }

ModelParams make_params(const RunConfig& cfg, const GridPtr& grid)
{
    ModelParams p;
    p.mu0 = cfg.mu0;
    p.mu1 = cfg.mu1;
    p.kernel = cfg.kernel;
    p.mode = cfg.mode;
    if (cfg.u_inf) p.u_inf = build_field(*cfg.u_inf, grid);
    return p;
}

ProblemSetup make_setup(const RunConfig& cfg)
{
    const GridPtr grid = make_grid(cfg);
    ProblemSetup s;
    s.params = make_params(cfg, grid);
    s.u0 = build_field(cfg.u0, grid);
    s.phi = build_field(cfg.phi, grid);
    s.alpha_floor_rel = cfg.alpha_floor_rel;
    s.compat_tol = cfg.compat_tol;
    return s;
}

std::vector<double> differentiate(const std::vector<double>& f, double dt, int order, const SmoothingOptions& smoothing)
{
    const std::size_t n = f.size();
    if (n < 4) throw InvalidArgument("differentiation needs at least 4 samples");
    if (order != 1 && order != 2) throw InvalidArgument("only first and second derivatives are supported");
    std::vector<double> d(n);
    if (smoothing.enabled) {
        if (static_cast<std::size_t>(2 * smoothing.half_window + 1) > n)
            throw InvalidArgument("smoothing window is longer than the trace");
        for (std::size_t i = 0; i < n; ++i) d[i] = local_fit_derivative(f, dt, i, order, smoothing);
        return d;
    }
    if (order == 1) {
        for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - f[i - 1]) / (2.0 * dt);
        d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dt);
        d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * dt);
    } else {
        const double h2 = dt * dt;
        for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / h2;
        d[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2;
        d[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / h2;
    }
    return d;
}

MeasurementTrace ingest_measurement(const std::string& path, const SmoothingOptions& smoothing)
{
    const auto table = detail::read_csv(path);
    const auto& h = table.header;
    const bool ok = (h.size() >= 2 && h[0] == "t" && h[1] == "r") && (h.size() < 3 || h[2] == "rp") &&
                    (h.size() < 4 || h[3] == "rpp") && h.size() <= 4;
    if (!ok) throw IoError("'" + path + "': expected header 't,r[,rp[,rpp]]'");
    const auto& t = table.columns[0];
    if (t.size() < 4) throw IoError("'" + path + "': need at least 4 samples");
    MeasurementTrace m;
    m.dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
    if (!(m.dt > 0.0)) throw IoError("'" + path + "': time samples must increase");
    if (std::abs(t.front()) > 1e-9 * m.dt) throw IoError("'" + path + "': samples must start at t = 0");
    for (std::size_t n = 1; n < t.size(); ++n)
        if (std::abs((t[n] - t[n - 1]) - m.dt) > 1e-9 * m.dt)
            throw IoError("'" + path + "': time samples are not uniformly spaced");
    m.r = table.columns[1];
    m.r1 = h.size() >= 3 ? table.columns[2] : differentiate(m.r, m.dt, 1, smoothing);
    if (h.size() >= 4) m.r2 = table.columns[3];
    else if (h.size() == 3) m.r2 = differentiate(m.r1, m.dt, 1, smoothing);
    else m.r2 = differentiate(m.r, m.dt, 2, smoothing);
    return m;
}

std::string assumption_report_json(const AssumptionReport& report)
{
    json j = {{"passed", report.passed()}, {"checks", assumption_json(report)}};
    return j.dump(2);
}

std::string fixed_point_json(const FixedPointResult& result, const ResidualReport* residuals,
                             const AssumptionReport* report)
{
    json j = result_json(result);
    if (residuals) j["residuals"] = residual_json(*residuals);
    if (report) j["assumptions"] = assumption_json(*report);
    return j.dump(2);
}

std::string march_json(const MarchResult& result, const ResidualReport* residuals, const AssumptionReport* report)
{
    json windows = json::array();
    for (const auto& w : result.windows) {
        windows.push_back({{"offset", w.offset},
                           {"length", w.length},
                           {"iterations", w.iterations},
                           {"halvings", w.halvings},
                           {"converged", w.converged},
                           {"final_delta", w.final_delta},
                           {"norm", w.norm},
                           {"junction_mismatch", w.junction_mismatch},
                           {"contraction_ratios", w.contraction_ratios}});
    }
    json j = {{"completed", result.completed},
              {"reached", result.reached},
              {"experimental", result.experimental},
              {"monitor_growth", result.monitor_growth()},
              {"message", result.message},
              {"kernel_l2", l2_norm(result.solution.k)},
              {"windows", windows}};
    if (residuals) j["residuals"] = residual_json(*residuals);
    if (report) j["assumptions"] = assumption_json(*report);
    return j.dump(2);
}

void write_trajectory(const std::string& path, const Trajectory& traj)
{
    if (traj.fields.empty()) throw InvalidArgument("cannot write an empty trajectory");
    make_dirs_for(path);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    auto put = [&out](double x) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, sizeof bits);
        unsigned char bytes[8];
        for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
        out.write(reinterpret_cast<const char*>(bytes), 8);
    };
    for (const auto& f : traj.fields)
        for (const Complex& c : f.data()) {
            put(c.real());
            put(c.imag());
        }
    if (!out) throw IoError("write to '" + path + "' failed");

    const Grid& g = traj.fields.front().grid();
    json side = {{"format", "complex128-le"},
                 {"layout", "[sample][component][mode]"},
                 {"mode_order", "row-major over axes, wavenumber i for i < N/2 and i - N otherwise"},
                 {"dim", g.dim()},
                 {"N", g.n()},
                 {"samples", traj.fields.size()},
                 {"dt", traj.dt}};
    std::ofstream meta(path + ".json");
    if (!meta) throw IoError("cannot open '" + path + ".json' for writing");
    meta << side.dump(2) << '\n';
}

}  // namespace kvmem
