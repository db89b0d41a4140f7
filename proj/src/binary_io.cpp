// SPDX-License-Identifier: Apache-2.0

#include "csiloc/binary_io.hpp"

#include <zlib.h>

#include <algorithm>

namespace csiloc::io {

std::uint32_t crc32(std::uint32_t crc, const void* data, std::size_t size) {
    const auto* p = static_cast<const Bytef*>(data);
    uLong c = crc;
    while (size > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
        c = ::crc32(c, p, chunk);
        p += chunk;
        size -= chunk;
    }
    return static_cast<std::uint32_t>(c);
}

}  // namespace csiloc::io
