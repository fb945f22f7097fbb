#pragma once

// Little-endian fixed-width readers/writers shared by the on-disk formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "poiact/error.hpp"

namespace poiact::binio {

static_assert(std::endian::native == std::endian::little, "on-disk formats assume a little-endian host");

template <class T>
void put(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <class T>
void put_array(std::ostream& out, const std::vector<T>& v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

class Reader {
 public:
  Reader(std::istream& in, ErrorCode code) : in_(in), code_(code) {}

  template <class T>
  T get() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof v);
    if (in_.gcount() != sizeof v) throw Error(code_, "truncated input");
    return v;
  }

  std::string get_string(std::uint32_t max_len = 1u << 20) {
    const auto n = get<std::uint32_t>();
    if (n > max_len) throw Error(code_, "string length out of range");
    std::string s(n, '\0');
    in_.read(s.data(), n);
    if (static_cast<std::uint32_t>(in_.gcount()) != n) throw Error(code_, "truncated input");
    return s;
  }

  template <class T>
  std::vector<T> get_array(std::uint64_t n) {
    if (n > (std::uint64_t{1} << 34) / sizeof(T)) throw Error(code_, "array length out of range");
    std::vector<T> v(n);
    in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
    if (static_cast<std::uint64_t>(in_.gcount()) != n * sizeof(T)) throw Error(code_, "truncated input");
    return v;
  }

  void expect_magic(const char (&magic)[9]) {
    char buf[8];
    in_.read(buf, 8);
    if (in_.gcount() != 8 || std::memcmp(buf, magic, 8) != 0) throw Error(code_, "bad magic");
  }

 private:
  std::istream& in_;
  ErrorCode code_;
};

}  // namespace poiact::binio
