#pragma once

// Little-endian encode/decode over in-memory byte buffers.

#include "sepsearch/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

namespace sepsearch::detail {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class ByteWriter {
  public:
    void bytes(std::string_view s) { buf_.append(s); }

    template <typename T>
    void put(T value) {
        char raw[sizeof(T)];
        std::memcpy(raw, &value, sizeof(T));
        buf_.append(raw, sizeof(T));
    }

    std::string& buffer() noexcept { return buf_; }

  private:
    std::string buf_;
};

class ByteReader {
  public:
    ByteReader(std::string_view data, ErrorCode truncation_error)
        : data_(data), truncation_error_(truncation_error) {}

    std::size_t remaining() const noexcept { return data_.size() - pos_; }

    std::string_view bytes(std::size_t n) {
        require(n);
        auto out = data_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    template <typename T>
    T get() {
        require(sizeof(T));
        T value;
        std::memcpy(&value, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }

  private:
    void require(std::size_t n) const {
        if (remaining() < n) throw Error(truncation_error_, "unexpected end of data");
    }

    std::string_view data_;
    std::size_t pos_ = 0;
    ErrorCode truncation_error_;
};

} // namespace sepsearch::detail
