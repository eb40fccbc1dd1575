#pragma once

#include <sodium.h>

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace wmr {

inline void crypto_init() {
  static const int rc = sodium_init();
  if (rc < 0) throw std::runtime_error("sodium_init failed");
}

// SHA-256 digest rendered as lowercase hex. This is the one digest primitive
// used for input canonicalization, content pinning, and lineage identity.
inline std::string sha256_hex(std::string_view data) {
  crypto_init();
  std::array<unsigned char, crypto_hash_sha256_BYTES> out{};
  crypto_hash_sha256(out.data(),
                     reinterpret_cast<const unsigned char*>(data.data()),
                     data.size());
  static const char* hex = "0123456789abcdef";
  std::string s;
  s.reserve(out.size() * 2);
  for (unsigned char b : out) {
    s.push_back(hex[b >> 4]);
    s.push_back(hex[b & 0xf]);
  }
  return s;
}

}  // namespace wmr
