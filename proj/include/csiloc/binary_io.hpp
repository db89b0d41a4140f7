// SPDX-License-Identifier: Apache-2.0
//
// Little-endian primitives and CRC bookkeeping shared by the dataset,
// feature-cache and checkpoint formats.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <string_view>
#include <type_traits>

#include "csiloc/errors.hpp"

namespace csiloc::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

std::uint32_t crc32(std::uint32_t crc, const void* data, std::size_t size);

// Append-only byte buffer used to assemble headers before writing them.
class ByteBuffer {
public:
    template <class T>
        requires std::is_arithmetic_v<T>
    void put(T value) {
        char raw[sizeof(T)];
        std::memcpy(raw, &value, sizeof(T));
        bytes_.append(raw, sizeof(T));
    }
    void put_bytes(std::string_view s) { bytes_.append(s.data(), s.size()); }
    void put_string(std::string_view s) {
        put(static_cast<std::uint32_t>(s.size()));
        put_bytes(s);
    }
    const std::string& bytes() const { return bytes_; }
    std::string& bytes() { return bytes_; }

private:
    std::string bytes_;
};

// Sequential reader over an input stream with byte accounting.
class Reader {
public:
    Reader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

    template <class T>
        requires std::is_arithmetic_v<T>
    T get() {
        T value{};
        read_raw(&value, sizeof(T));
        return value;
    }
    std::string get_bytes(std::size_t n) {
        std::string s(n, '\0');
        read_raw(s.data(), n);
        return s;
    }
    std::string get_string(std::size_t max_len = 1 << 24) {
        const auto n = get<std::uint32_t>();
        if (n > max_len) throw FormatError(FormatError::Kind::corrupt, what_ + ": string length field is implausible");
        return get_bytes(n);
    }
    void read_raw(void* dst, std::size_t n) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            throw FormatError(FormatError::Kind::truncated, what_ + ": unexpected end of file in header");
        if (track_) crc_ = crc32(crc_, dst, n);
        consumed_ += n;
    }

    void start_crc() { track_ = true; crc_ = 0; }
    std::uint32_t stop_crc() { track_ = false; return crc_; }
    std::size_t consumed() const { return consumed_; }

private:
    std::istream& in_;
    std::string what_;
    bool track_ = false;
    std::uint32_t crc_ = 0;
    std::size_t consumed_ = 0;
};

}  // namespace csiloc::io
