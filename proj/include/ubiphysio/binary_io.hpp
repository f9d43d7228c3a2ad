#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "ubiphysio/errors.hpp"

// Little-endian primitive encoding shared by the pose, feature and
// checkpoint containers.
namespace ubiphysio::binio {

static_assert(std::endian::native == std::endian::little,
              "binary containers assume a little-endian host");

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

inline void put_bytes(std::string& out, std::string_view bytes) { out.append(bytes); }

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  template <typename T>
  T get() {
    require(sizeof(T));
    T value;
    std::memcpy(&value, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string_view bytes(std::size_t n) {
    require(n);
    auto v = data_.substr(pos_, n);
    pos_ += n;
    return v;
  }

  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void require(std::size_t n) const {
    if (data_.size() - pos_ < n) throw ParseError("unexpected end of binary data");
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace ubiphysio::binio
