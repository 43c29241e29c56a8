#pragma once

// Little-endian primitive readers/writers shared by the binary file formats.

#include "padc/errors.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>

namespace padc::io {

class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream& out) : out_(out) {}

    void magic(std::string_view tag) { out_.write(tag.data(), static_cast<std::streamsize>(tag.size())); }

    template <typename T>
    void put(T value) {
        static_assert(std::is_arithmetic_v<T>);
        std::array<char, sizeof(T)> bytes;
        std::memcpy(bytes.data(), &value, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) {
            std::reverse(bytes.begin(), bytes.end());
        }
        out_.write(bytes.data(), sizeof(T));
    }

    void check() const {
        if (!out_) {
            throw IoError("write failed");
        }
    }

private:
    std::ostream& out_;
};

class BinaryReader {
public:
    explicit BinaryReader(std::istream& in) : in_(in) {}

    std::uint64_t offset() const { return offset_; }

    void expect_magic(std::string_view tag, std::string_view format_name) {
        std::string got(tag.size(), '\0');
        in_.read(got.data(), static_cast<std::streamsize>(tag.size()));
        if (in_.gcount() != static_cast<std::streamsize>(tag.size()) || got != tag) {
            throw FormatError("bad magic: not a " + std::string(format_name) + " file", offset_);
        }
        offset_ += tag.size();
    }

    template <typename T>
    T get(std::string_view field) {
        static_assert(std::is_arithmetic_v<T>);
        std::array<char, sizeof(T)> bytes;
        in_.read(bytes.data(), sizeof(T));
        if (in_.gcount() != static_cast<std::streamsize>(sizeof(T))) {
            throw FormatError("truncated input while reading " + std::string(field), offset_);
        }
        if constexpr (std::endian::native == std::endian::big) {
            std::reverse(bytes.begin(), bytes.end());
        }
        T value;
        std::memcpy(&value, bytes.data(), sizeof(T));
        offset_ += sizeof(T);
        return value;
    }

    void expect_end() {
        if (in_.peek() != std::char_traits<char>::eof()) {
            throw FormatError("trailing bytes after end of data", offset_);
        }
    }

private:
    std::istream& in_;
    std::uint64_t offset_ = 0;
};

} // namespace padc::io
