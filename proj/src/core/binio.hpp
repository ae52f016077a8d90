#pragma once

// Little-endian binary stream helpers shared by the checkpoint formats.
// Every read is bounds-checked; running off the end raises ErrorCode::Corrupt.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "core/error.hpp"

namespace qzero {

static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");

class BinaryWriter {
public:
    template <typename T>
        requires std::is_arithmetic_v<T>
    void put(T v) {
        const auto* p = reinterpret_cast<const char*>(&v);
        buf_.insert(buf_.end(), p, p + sizeof(T));
    }

    void put_string(std::string_view s) {
        put<uint64_t>(s.size());
        buf_.insert(buf_.end(), s.begin(), s.end());
    }

    template <typename T>
        requires std::is_arithmetic_v<T>
    void put_array(std::span<const T> values) {
        put<uint64_t>(values.size());
        const auto* p = reinterpret_cast<const char*>(values.data());
        buf_.insert(buf_.end(), p, p + values.size_bytes());
    }

    void put_raw(std::string_view bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

    const std::string& bytes() const { return buf_; }
    std::string take() { return std::move(buf_); }

private:
    std::string buf_;
};

class BinaryReader {
public:
    explicit BinaryReader(std::string_view data) : data_(data) {}

    template <typename T>
        requires std::is_arithmetic_v<T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    std::string get_string() {
        const auto n = get<uint64_t>();
        need(n);
        std::string s(data_.substr(pos_, n));
        pos_ += n;
        return s;
    }

    template <typename T>
        requires std::is_arithmetic_v<T>
    std::vector<T> get_array() {
        const auto n = get<uint64_t>();
        if (n > (data_.size() - pos_) / sizeof(T)) fail(ErrorCode::Corrupt, "truncated stream: array length exceeds remaining bytes");
        std::vector<T> out(n);
        std::memcpy(out.data(), data_.data() + pos_, n * sizeof(T));
        pos_ += n * sizeof(T);
        return out;
    }

    std::string_view get_raw(size_t n) {
        need(n);
        auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    size_t position() const { return pos_; }
    size_t remaining() const { return data_.size() - pos_; }
    bool at_end() const { return pos_ == data_.size(); }

private:
    void need(size_t n) const {
        if (n > data_.size() - pos_) fail(ErrorCode::Corrupt, "truncated stream");
    }

    std::string_view data_;
    size_t pos_ = 0;
};

/// FNV-1a over a byte range; used as a trailing integrity check.
inline uint64_t fnv1a(std::string_view bytes) {
    uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace qzero
