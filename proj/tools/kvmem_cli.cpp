/// Command-line front end over the C interface.
///
/// Exit codes: 0 success, 1 usage/configuration error, 2 not converged or
/// numerical failure, 3 assumption violated, 4 I/O failure.

#include "kvmem.h"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

namespace {

struct Options {
    std::string config;
    std::string measurement;
    std::string output;
    bool verbose = false;
};

int exit_code(kvm_status s)
{
    switch (s) {
    case KVM_OK: return 0;
    case KVM_NOT_CONVERGED:
    case KVM_ERR_NUMERICAL: return 2;
    case KVM_ASSUMPTION: return 3;
    case KVM_ERR_IO: return 4;
    case KVM_ERR_USAGE:
    case KVM_ERR_INTERNAL: return 1;
    }
    return 1;
}

int report_failure(kvm_status s)
{
    std::cerr << "kvmem: " << kvm_status_string(s);
    if (*kvm_last_error()) std::cerr << ": " << kvm_last_error();
    std::cerr << '\n';
    return exit_code(s);
}

struct ConfigDeleter {
    void operator()(kvm_config* c) const { kvm_config_free(c); }
};
struct MeasurementDeleter {
    void operator()(kvm_measurement* m) const { kvm_measurement_free(m); }
};
struct ResultDeleter {
    void operator()(kvm_result* r) const { kvm_result_free(r); }
};
struct StringDeleter {
    void operator()(char* s) const { kvm_string_free(s); }
};
using ConfigPtr = std::unique_ptr<kvm_config, ConfigDeleter>;
using MeasurementPtr = std::unique_ptr<kvm_measurement, MeasurementDeleter>;
using ResultPtr = std::unique_ptr<kvm_result, ResultDeleter>;
using StringPtr = std::unique_ptr<char, StringDeleter>;

/// Error from a step that already printed its own message.
struct Exit {
    int code;
};

void check(kvm_status s)
{
    if (s != KVM_OK) throw Exit{report_failure(s)};
}

ConfigPtr load_config(const Options& o)
{
    kvm_config* raw = nullptr;
    check(kvm_config_load(o.config.c_str(), &raw));
    ConfigPtr cfg(raw);
    if (!o.output.empty()) check(kvm_config_set_output_dir(cfg.get(), o.output.c_str()));
    return cfg;
}

MeasurementPtr load_measurement(const std::string& path, const kvm_config* cfg)
{
    kvm_measurement* raw = nullptr;
    check(kvm_measurement_load(path.c_str(), cfg, &raw));
    return MeasurementPtr(raw);
}

std::string output_path(const kvm_config* cfg, const char* which)
{
    char* raw = nullptr;
    check(kvm_config_output_path(cfg, which, &raw));
    StringPtr s(raw);
    return s.get();
}

void write_text(const std::string& path, const std::string& text)
{
    std::error_code ec;
    const std::filesystem::path parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent, ec);
    std::ofstream out(path);
    out << text << '\n';
    if (!out) {
        std::cerr << "kvmem: i/o error: cannot write '" << path << "'\n";
        throw Exit{4};
    }
}

void prepare_output_dir(const kvm_config* cfg)
{
    const std::filesystem::path parent = std::filesystem::path(output_path(cfg, "diagnostics")).parent_path();
    std::error_code ec;
    if (!parent.empty()) std::filesystem::create_directories(parent, ec);
    if (ec) {
        std::cerr << "kvmem: i/o error: cannot create '" << parent.string() << "': " << ec.message() << '\n';
        throw Exit{4};
    }
}

void print_line(const char* line, void*) { std::cout << line << '\n' << std::flush; }

int cmd_forward(const Options& o)
{
    const ConfigPtr cfg = load_config(o);
    prepare_output_dir(cfg.get());
    kvm_measurement* raw = nullptr;
    char* summary_raw = nullptr;
    check(kvm_forward(cfg.get(), &raw, &summary_raw));
    const MeasurementPtr meas(raw);
    const StringPtr summary(summary_raw);
    const std::string mpath = output_path(cfg.get(), "measurement");
    check(kvm_measurement_save(meas.get(), mpath.c_str()));
    write_text(output_path(cfg.get(), "diagnostics"), summary.get());
    if (o.verbose) std::cout << summary.get() << '\n';
    std::cout << "measurement written to " << mpath << '\n';
    return 0;
}

/// Writes the kernel and diagnostics of a finished reconstruction.
int emit_result(const kvm_config* cfg, kvm_status status, ResultPtr result)
{
    if (!result) return report_failure(status);
    const std::string kpath = output_path(cfg, "kernel");
    const std::string dpath = output_path(cfg, "diagnostics");
    check(kvm_result_write_kernel_csv(result.get(), kpath.c_str()));
    char* diag_raw = nullptr;
    check(kvm_result_diagnostics_json(result.get(), &diag_raw));
    write_text(dpath, StringPtr(diag_raw).get());
    std::cout << (kvm_result_converged(result.get()) ? "converged" : "not converged") << "; kernel written to " << kpath
              << ", diagnostics to " << dpath << '\n';
    return status == KVM_OK ? 0 : report_failure(status);
}

int cmd_reconstruct(const Options& o, const std::string& which)
{
    const ConfigPtr cfg = load_config(o);
    prepare_output_dir(cfg.get());
    kvm_line_callback cb = o.verbose ? print_line : nullptr;
    kvm_result* raw = nullptr;
    kvm_status s;
    if (which == "twin") {
        s = kvm_twin(cfg.get(), cb, nullptr, &raw);
    } else {
        const MeasurementPtr meas = load_measurement(o.measurement, cfg.get());
        s = which == "invert" ? kvm_invert(cfg.get(), meas.get(), cb, nullptr, &raw)
                              : kvm_march(cfg.get(), meas.get(), cb, nullptr, &raw);
    }
    return emit_result(cfg.get(), s, ResultPtr(raw));
}

int cmd_check(const Options& o)
{
    const ConfigPtr cfg = load_config(o);
    MeasurementPtr meas;
    if (!o.measurement.empty()) meas = load_measurement(o.measurement, cfg.get());
    char* raw = nullptr;
    const kvm_status s = kvm_check(cfg.get(), meas.get(), &raw);
    const StringPtr report(raw);
    if (report) std::cout << report.get() << '\n';
    return s == KVM_OK ? 0 : report_failure(s);
}

int cmd_selftest(const Options& o)
{
    char* raw = nullptr;
    int failures = 0;
    const kvm_status s = kvm_selftest(&raw, &failures);
    const StringPtr report(raw);
    if (report && (o.verbose || failures > 0)) std::cout << report.get() << '\n';
    std::cout << "selftest: " << failures << " failing checks\n";
    return s == KVM_OK ? 0 : report_failure(s);
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Kelvin-Voigt fluid solver with memory-kernel reconstruction"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config,-c", o.config, "run configuration (JSON)")->required();
        sub->add_option("--output,-o", o.output, "output directory (overrides io.output_dir)");
        sub->add_flag("--verbose,-v", o.verbose, "stream per-iteration diagnostics as JSON lines");
    };

    CLI::App* forward = app.add_subcommand("forward", "direct solve, writes the measurement trace");
    add_common(forward);
    CLI::App* invert = app.add_subcommand("invert", "local kernel reconstruction from a measurement");
    add_common(invert);
    invert->add_option("--measurement,-m", o.measurement, "measurement CSV (t,r[,rp[,rpp]])")->required();
    CLI::App* march = app.add_subcommand("march", "windowed reconstruction on [0,T]");
    add_common(march);
    march->add_option("--measurement,-m", o.measurement, "measurement CSV (t,r[,rp[,rpp]])")->required();
    CLI::App* twin = app.add_subcommand("twin", "synthesize data, reconstruct and report the kernel error");
    add_common(twin);
    CLI::App* chk = app.add_subcommand("check", "assumption report only");
    add_common(chk);
    chk->add_option("--measurement,-m", o.measurement, "optional measurement CSV for the compatibility check");
    CLI::App* selftest = app.add_subcommand("selftest", "run the built-in invariant suites");
    selftest->add_flag("--verbose,-v", o.verbose, "print every check");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (forward->parsed()) return cmd_forward(o);
        if (invert->parsed()) return cmd_reconstruct(o, "invert");
        if (march->parsed()) return cmd_reconstruct(o, "march");
        if (twin->parsed()) return cmd_reconstruct(o, "twin");
        if (chk->parsed()) return cmd_check(o);
        if (selftest->parsed()) return cmd_selftest(o);
    } catch (const Exit& e) {
        return e.code;
    } catch (const std::exception& e) {
        std::cerr << "kvmem: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
