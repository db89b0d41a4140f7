// SPDX-License-Identifier: Apache-2.0
//
// Fast built-in consistency checks exposed by `csiloc selftest`.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace csiloc::selftest {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

CheckResult check_param_count();
CheckResult check_feature_length();
CheckResult check_invariance(std::size_t trials, std::uint64_t seed);
CheckResult check_parseval(std::size_t trials, std::uint64_t seed);
CheckResult check_gradients(std::size_t trials, std::uint64_t seed);

std::vector<CheckResult> run_all(std::uint64_t seed = 1);

}  // namespace csiloc::selftest
