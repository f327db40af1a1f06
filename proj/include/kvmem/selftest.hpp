#pragma once

/// @file selftest.hpp
/// @brief Fast invariant checks of every module, for installation sanity checks.

#include <string>
#include <vector>

namespace kvmem {

struct SelftestCase {
    std::string suite;
    std::string name;
    bool passed = false;
    double value = 0.0;  ///< measured quantity
    double limit = 0.0;  ///< bound it is compared against
};

std::vector<SelftestCase> run_selftest();

}  // namespace kvmem
