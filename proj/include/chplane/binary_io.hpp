#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chplane/error.hpp"

namespace chplane::bin {

class Writer {
public:
    void magic(std::string_view m) { buf_.insert(buf_.end(), m.begin(), m.end()); }
    void u16(std::uint16_t v) { put(v); }
    void u32(std::uint32_t v) { put(v); }
    void f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }
    void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
    [[nodiscard]] const std::vector<std::uint8_t>& data() const noexcept { return buf_; }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    template <class T>
    void put(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> buf_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : b_(bytes) {}

    void expect_magic(std::string_view m) {
        need(m.size());
        if (std::memcmp(b_.data() + pos_, m.data(), m.size()) != 0)
            throw FormatError("bad magic, expected " + std::string(m));
        pos_ += m.size();
    }
    std::uint16_t u16() { return get<std::uint16_t>(); }
    std::uint32_t u32() { return get<std::uint32_t>(); }
    float f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    [[nodiscard]] std::size_t remaining() const noexcept { return b_.size() - pos_; }
    void expect_end() const {
        if (remaining() != 0) throw FormatError("trailing bytes after payload");
    }

private:
    void need(std::size_t n) const {
        if (remaining() < n) throw FormatError("truncated file");
    }
    template <class T>
    T get() {
        need(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(T(b_[pos_ + i]) << (8 * i));
        pos_ += sizeof(T);
        return v;
    }
    std::span<const std::uint8_t> b_;
    std::size_t pos_ = 0;
};

}  // namespace chplane::bin
