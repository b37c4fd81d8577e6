#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "taxoenrich/common.hpp"

namespace taxoenrich::io {

// Little-endian primitives shared by the TXE1 and TXM1 formats.

template <typename UInt>
void write_uint(std::ostream& out, UInt value) {
    char bytes[sizeof(UInt)];
    for (std::size_t i = 0; i < sizeof(UInt); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
    out.write(bytes, sizeof(UInt));
}

template <typename UInt>
UInt read_uint(std::istream& in, const char* what) {
    unsigned char bytes[sizeof(UInt)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(UInt))) throw FormatError(std::string("truncated stream reading ") + what);
    UInt value = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) value |= static_cast<UInt>(bytes[i]) << (8 * i);
    return value;
}

inline void write_f32(std::ostream& out, float v) { write_uint(out, std::bit_cast<std::uint32_t>(v)); }
inline void write_f64(std::ostream& out, double v) { write_uint(out, std::bit_cast<std::uint64_t>(v)); }
inline float read_f32(std::istream& in, const char* what) { return std::bit_cast<float>(read_uint<std::uint32_t>(in, what)); }
inline double read_f64(std::istream& in, const char* what) {
    return std::bit_cast<double>(read_uint<std::uint64_t>(in, what));
}

inline void write_string(std::ostream& out, const std::string& s) {
    write_uint<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in, const char* what, std::size_t max_len = (1u << 30)) {
    auto len = read_uint<std::uint32_t>(in, what);
    if (len > max_len) throw FormatError(std::string("implausible length reading ") + what);
    std::string s(len, '\0');
    if (len && !in.read(s.data(), len)) throw FormatError(std::string("truncated stream reading ") + what);
    return s;
}

inline void expect_magic(std::istream& in, const char (&magic)[5]) {
    char got[4];
    if (!in.read(got, 4)) throw FormatError("truncated stream reading magic");
    if (std::memcmp(got, magic, 4) != 0) throw FormatError(std::string("bad magic, expected ") + magic);
}

}  // namespace taxoenrich::io
