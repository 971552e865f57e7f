#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>

namespace vadkd {

// Error taxonomy for the binary file formats (CKPT, AMAP): a missing or
// unreadable file, a wrong magic, and a payload shorter than its header
// promises are distinct failures.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};
class MagicError : public std::runtime_error {
public:
    explicit MagicError(const std::string& what) : std::runtime_error(what) {}
};
class TruncationError : public std::runtime_error {
public:
    explicit TruncationError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

// Little-endian cursor over an in-memory file image.
struct ByteReader {
    std::string buf;
    size_t pos = 0;
    std::string path;
    const char* format = "";

    void need(size_t n, const char* what) const {
        if (pos + n > buf.size())
            throw TruncationError(std::string(format) + ": truncated file " + path + " while reading " + what);
    }
    uint8_t u8(const char* what) {
        need(1, what);
        return static_cast<uint8_t>(buf[pos++]);
    }
    uint16_t u16(const char* what) {
        need(2, what);
        uint16_t v = static_cast<uint8_t>(buf[pos]) |
                     (static_cast<uint16_t>(static_cast<uint8_t>(buf[pos + 1])) << 8);
        pos += 2;
        return v;
    }
    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    float f32(const char* what) {
        const uint32_t bits = u32(what);
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::string bytes(size_t n, const char* what) {
        need(n, what);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

std::string read_file(const std::string& path, const char* format);
void write_file(const std::string& path, const std::string& buf, const char* format);

}  // namespace detail
}  // namespace vadkd
