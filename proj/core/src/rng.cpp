#include "persrep/rng.hpp"

#include <array>

namespace persrep {

std::string hex_digest(uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::array<char, 16> out;
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return std::string(out.data(), out.size());
}

}  // namespace persrep
