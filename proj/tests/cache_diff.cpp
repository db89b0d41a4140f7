// SPDX-License-Identifier: Apache-2.0
//
// cache_diff A B TOL: exit 0 if both feature caches have the same layout and
// labels and every value agrees within TOL (relative, floor 1).

#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "csiloc/dataset.hpp"

int main(int argc, char** argv) {
    if (argc != 4) {
        std::fprintf(stderr, "usage: cache_diff A B TOL\n");
        return 2;
    }
    const auto a = csiloc::data::read_feature_cache(argv[1]);
    const auto b = csiloc::data::read_feature_cache(argv[2]);
    a.check_compatible(b);
    if (a.rows() != b.rows()) return 1;
    for (std::size_t i = 0; i < a.rows(); ++i)
        if (!(a.labels[i].position == b.labels[i].position) || a.labels[i].timestamp != b.labels[i].timestamp) return 1;
    double worst = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        worst = std::max(worst, std::abs(double(a.values[i]) - double(b.values[i])) / std::max(1.0, std::abs(double(a.values[i]))));
    std::printf("max relative difference %.3g over %zu values\n", worst, a.values.size());
    return worst <= std::atof(argv[3]) ? 0 : 1;
}
