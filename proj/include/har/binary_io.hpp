#pragma once

// Little-endian primitive serialization shared by the store and checkpoint
// formats.

#include "har/error.hpp"

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

namespace har::binio {

template <class U>
    requires std::is_unsigned_v<U>
void put_uint(std::ostream& os, U v) {
    char bytes[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os.write(bytes, sizeof(U));
}

template <class U>
    requires std::is_unsigned_v<U>
U get_uint(std::istream& is) {
    unsigned char bytes[sizeof(U)];
    if (!is.read(reinterpret_cast<char*>(bytes), sizeof(U)))
        throw InputError("unexpected end of file");
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
    return v;
}

inline void put_i32(std::ostream& os, std::int32_t v) { put_uint(os, static_cast<std::uint32_t>(v)); }
inline std::int32_t get_i32(std::istream& is) { return static_cast<std::int32_t>(get_uint<std::uint32_t>(is)); }

inline void put_f32(std::ostream& os, float v) { put_uint(os, std::bit_cast<std::uint32_t>(v)); }
inline float get_f32(std::istream& is) { return std::bit_cast<float>(get_uint<std::uint32_t>(is)); }

inline void put_f64(std::ostream& os, double v) { put_uint(os, std::bit_cast<std::uint64_t>(v)); }
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_uint<std::uint64_t>(is)); }

inline void put_string16(std::ostream& os, const std::string& s) {
    if (s.size() > 0xFFFF) throw InputError("string too long for u16 length prefix");
    put_uint(os, static_cast<std::uint16_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string16(std::istream& is) {
    const auto n = get_uint<std::uint16_t>(is);
    std::string s(n, '\0');
    if (n > 0 && !is.read(s.data(), n)) throw InputError("unexpected end of file");
    return s;
}

inline void put_magic(std::ostream& os, const char (&magic)[5]) { os.write(magic, 4); }

inline void expect_magic(std::istream& is, const char (&magic)[5], const char* what) {
    char buf[4];
    if (!is.read(buf, 4) || std::string(buf, 4) != std::string(magic, 4))
        throw InputError(std::string("not a ") + what + " file (bad magic)");
}

} // namespace har::binio
