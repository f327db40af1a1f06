#include "kvmem.h"

#include "test_support.hpp"

#include <json.hpp>

#include <gtest/gtest.h>

#include <string>
#include <thread>
#include <vector>

using json = nlohmann::json;

namespace {

const char* small_twin = R"({
  "mode": "oseen",
  "grid": {"dim": 2, "N": 8},
  "model": {"mu0": 1.5, "mu1": 1.0},
  "kernel": {"type": "exponential", "gamma": 0.5, "delta": 0.5},
  "fields": {"u0": {"preset": "multi", "amplitude": 0.1},
             "phi": {"preset": "taylor_green"},
             "u_inf": {"preset": "taylor_green"}},
  "time": {"T": 0.1, "dt": 0.005, "substeps": 4}
})";

kvm_config* parse_or_die(const std::string& text)
{
    kvm_config* cfg = nullptr;
    EXPECT_EQ(kvm_config_parse(text.c_str(), ".", &cfg), KVM_OK) << kvm_last_error();
    return cfg;
}

void collect(const char* line, void* user) { static_cast<std::vector<std::string>*>(user)->push_back(line); }

}  // namespace

TEST(CApi, StatusStrings)
{
    EXPECT_STREQ(kvm_status_string(KVM_OK), "ok");
    EXPECT_STREQ(kvm_status_string(KVM_ASSUMPTION), "assumption violated");
    EXPECT_STREQ(kvm_status_string(static_cast<kvm_status>(42)), "unknown status");
    EXPECT_NE(std::string(kvm_version()), "");
}

TEST(CApi, NullArgumentsAreUsageErrors)
{
    kvm_config* cfg = nullptr;
    EXPECT_EQ(kvm_config_parse(nullptr, nullptr, &cfg), KVM_ERR_USAGE);
    EXPECT_NE(std::string(kvm_last_error()), "");
    EXPECT_EQ(kvm_config_load(nullptr, &cfg), KVM_ERR_USAGE);
    EXPECT_EQ(kvm_forward(nullptr, nullptr, nullptr), KVM_ERR_USAGE);
    EXPECT_EQ(kvm_invert(nullptr, nullptr, nullptr, nullptr, nullptr), KVM_ERR_USAGE);
    EXPECT_EQ(kvm_result_kernel(nullptr, nullptr, nullptr, nullptr), KVM_ERR_USAGE);
    EXPECT_EQ(kvm_result_converged(nullptr), 0);
    kvm_config_free(nullptr);
    kvm_result_free(nullptr);
    kvm_measurement_free(nullptr);
    kvm_string_free(nullptr);
}

TEST(CApi, ConfigErrorsCarryMessages)
{
    kvm_config* cfg = nullptr;
    EXPECT_EQ(kvm_config_parse("{\"mode\": \"oseen\", \"bogus\": 1}", ".", &cfg), KVM_ERR_USAGE);
    EXPECT_NE(std::string(kvm_last_error()).find("bogus"), std::string::npos);
    EXPECT_EQ(cfg, nullptr);
    EXPECT_EQ(kvm_config_load("/nonexistent/run.json", &cfg), KVM_ERR_IO);
}

TEST(CApi, OutputPaths)
{
    kvm_config* cfg = parse_or_die(small_twin);
    ASSERT_EQ(kvm_config_set_output_dir(cfg, "results/a"), KVM_OK);
    char* path = nullptr;
    ASSERT_EQ(kvm_config_output_path(cfg, "kernel", &path), KVM_OK);
    EXPECT_STREQ(path, "results/a/kernel.csv");
    kvm_string_free(path);
    ASSERT_EQ(kvm_config_output_path(cfg, "trajectory", &path), KVM_OK);
    EXPECT_STREQ(path, "");
    kvm_string_free(path);
    EXPECT_EQ(kvm_config_output_path(cfg, "logs", &path), KVM_ERR_USAGE);
    EXPECT_EQ(kvm_config_set_output_dir(cfg, ""), KVM_ERR_USAGE);
    kvm_config_free(cfg);
}

TEST(CApi, ForwardThenInvert)
{
    const auto dir = kvtest::scratch_dir("capi_pipeline");
    kvm_config* cfg = parse_or_die(small_twin);
    kvm_measurement* m = nullptr;
    char* summary = nullptr;
    ASSERT_EQ(kvm_forward(cfg, &m, &summary), KVM_OK) << kvm_last_error();
    const json s = json::parse(summary);
    kvm_string_free(summary);
    EXPECT_EQ(s["samples"], 21);
    EXPECT_LT(s["max_divergence"].get<double>(), 1e-12);

    const std::string csv = (dir / "m.csv").string();
    ASSERT_EQ(kvm_measurement_save(m, csv.c_str()), KVM_OK);
    kvm_measurement_free(m);
    ASSERT_EQ(kvm_measurement_load(csv.c_str(), cfg, &m), KVM_OK);
    size_t count = 0;
    double dt = 0.0;
    ASSERT_EQ(kvm_measurement_samples(m, &count, &dt), KVM_OK);
    EXPECT_EQ(count, 21u);
    EXPECT_NEAR(dt, 0.005, 1e-15);

    char* report = nullptr;
    EXPECT_EQ(kvm_check(cfg, m, &report), KVM_OK);
    EXPECT_TRUE(json::parse(report)["passed"].get<bool>());
    kvm_string_free(report);

    std::vector<std::string> lines;
    kvm_result* r = nullptr;
    ASSERT_EQ(kvm_invert(cfg, m, collect, &lines, &r), KVM_OK) << kvm_last_error();
    EXPECT_EQ(kvm_result_converged(r), 1);
    ASSERT_FALSE(lines.empty());
    EXPECT_TRUE(json::parse(lines.front()).contains("delta"));
    const double* k = nullptr;
    ASSERT_EQ(kvm_result_kernel(r, &k, &count, &dt), KVM_OK);
    EXPECT_EQ(count, 21u);
    EXPECT_NEAR(k[0], 0.5, 1e-4);
    char* diag = nullptr;
    ASSERT_EQ(kvm_result_diagnostics_json(r, &diag), KVM_OK);
    const json d = json::parse(diag);
    kvm_string_free(diag);
    EXPECT_EQ(d["command"], "invert");
    EXPECT_EQ(d["mode"], "oseen");
    EXPECT_EQ(static_cast<int>(lines.size()), d["iterations"].get<int>());
    ASSERT_EQ(kvm_result_write_kernel_csv(r, (dir / "k.csv").string().c_str()), KVM_OK);
    EXPECT_EQ(kvtest::read_file(dir / "k.csv").substr(0, 4), "t,k\n");
    kvm_result_free(r);
    kvm_measurement_free(m);
    kvm_config_free(cfg);
}

TEST(CApi, TwinReportsKernelError)
{
    kvm_config* cfg = parse_or_die(small_twin);
    kvm_result* r = nullptr;
    ASSERT_EQ(kvm_twin(cfg, nullptr, nullptr, &r), KVM_OK) << kvm_last_error();
    char* diag = nullptr;
    ASSERT_EQ(kvm_result_diagnostics_json(r, &diag), KVM_OK);
    const json d = json::parse(diag);
    kvm_string_free(diag);
    EXPECT_EQ(d["command"], "twin");
    EXPECT_LT(d["kernel_error_relative"].get<double>(), 1e-4);
    kvm_result_free(r);
    kvm_config_free(cfg);
}

TEST(CApi, AssumptionFailureIsNamed)
{
    json j = json::parse(small_twin);
    j["mode"] = "kv";
    j["fields"].erase("u_inf");
    j["fields"]["u0"] = {{"preset", "shear"}};
    kvm_config* cfg = parse_or_die(j.dump());
    char* report = nullptr;
    EXPECT_EQ(kvm_check(cfg, nullptr, &report), KVM_ASSUMPTION);
    EXPECT_STREQ(kvm_last_assumption(), "A3");
    EXPECT_FALSE(json::parse(report)["passed"].get<bool>());
    kvm_string_free(report);
    kvm_result* r = nullptr;
    EXPECT_EQ(kvm_twin(cfg, nullptr, nullptr, &r), KVM_ASSUMPTION);
    EXPECT_EQ(r, nullptr);
    EXPECT_STREQ(kvm_last_assumption(), "A3");
    kvm_config_free(cfg);
}

TEST(CApi, NonConvergenceStillReturnsResult)
{
    json j = json::parse(small_twin);
    j["solver"] = {{"max_iter", 1}};
    kvm_config* cfg = parse_or_die(j.dump());
    kvm_result* r = nullptr;
    EXPECT_EQ(kvm_twin(cfg, nullptr, nullptr, &r), KVM_NOT_CONVERGED);
    ASSERT_NE(r, nullptr);
    EXPECT_EQ(kvm_result_converged(r), 0);
    kvm_result_free(r);
    kvm_config_free(cfg);
}

TEST(CApi, ErrorStateIsPerThread)
{
    kvm_config* cfg = nullptr;
    EXPECT_EQ(kvm_config_parse("{", ".", &cfg), KVM_ERR_USAGE);
    std::string other;
    std::thread t([&] { other = kvm_last_error(); });
    t.join();
    EXPECT_EQ(other, "");
    EXPECT_NE(std::string(kvm_last_error()), "");
}

TEST(CApi, Selftest)
{
    char* report = nullptr;
    int failures = -1;
    EXPECT_EQ(kvm_selftest(&report, &failures), KVM_OK);
    EXPECT_EQ(failures, 0);
    const json r = json::parse(report);
    kvm_string_free(report);
    EXPECT_GT(r["cases"].size(), 10u);
}
