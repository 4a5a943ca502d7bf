#pragma once

#include <cstdint>
#include <cstring>
#include <string_view>

namespace numeraire {

// 64-bit FNV-1a.
class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  void text(std::string_view s) {
    bytes(s.data(), s.size());
    const char sep = '\0';
    bytes(&sep, 1);
  }
  void number(double x) {
    if (x == 0.0) x = 0.0;  // fold -0
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    bytes(&bits, sizeof bits);
  }
  void integer(std::uint64_t x) { bytes(&x, sizeof x); }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t fnv1a(std::string_view s) {
  Fnv1a h;
  h.bytes(s.data(), s.size());
  return h.value();
}

}  // namespace numeraire
