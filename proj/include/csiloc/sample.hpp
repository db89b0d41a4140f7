// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "csiloc/core.hpp"

namespace csiloc {

// One geo-tagged CSI capture. The floor label, when present, lives in
// position.floor_index.
struct GeoTaggedSample {
    double timestamp = 0.0;
    Position position;
    CsiTensor csi;
};

}  // namespace csiloc
