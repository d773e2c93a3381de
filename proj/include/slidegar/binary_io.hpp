#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

namespace slidegar::io {

inline void write_u32(std::ostream &out, std::uint32_t v)
{
    std::array<char, 4> b{static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                          static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
    out.write(b.data(), b.size());
}

inline bool read_u32(std::istream &in, std::uint32_t &v)
{
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char *>(b.data()), b.size())) {
        return false;
    }
    v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8)
        | (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    return true;
}

inline void write_f32(std::ostream &out, float f) { write_u32(out, std::bit_cast<std::uint32_t>(f)); }

inline bool read_f32(std::istream &in, float &f)
{
    std::uint32_t v = 0;
    if (!read_u32(in, v)) {
        return false;
    }
    f = std::bit_cast<float>(v);
    return true;
}

}  // namespace slidegar::io
