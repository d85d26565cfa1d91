#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <type_traits>

#include "auwgcn/feature_io.hpp"

namespace auwgcn::binio {

// little-endian scalar encode/decode, independent of host byte order

template <typename T>
void put_le(std::string& out, T v) {
    static_assert(std::is_integral_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
    }
}

inline void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_le(out, bits);
}

class Reader {
public:
    Reader(const std::string& buf, std::string path) : buf_(buf), path_(std::move(path)) {}

    template <typename T>
    T get_le() {
        need(sizeof(T));
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(T);
        return static_cast<T>(v);
    }

    float get_f32() {
        const std::uint32_t bits = get_le<std::uint32_t>();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    void need(std::size_t n) const {
        if (pos_ + n > buf_.size()) {
            throw IoError(IoErrorKind::truncated, path_ + ": truncated payload");
        }
    }

    void skip(std::size_t n) {
        need(n);
        pos_ += n;
    }

    std::size_t remaining() const { return buf_.size() - pos_; }
    const std::string& path() const { return path_; }

private:
    const std::string& buf_;
    std::string path_;
    std::size_t pos_ = 0;
};

}  // namespace auwgcn::binio
