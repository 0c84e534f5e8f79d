#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace dndx {

/// 64-bit FNV-1a, used for artifact fingerprints (not for security).
class Fnv1a {
 public:
  void update(std::span<const std::uint8_t> bytes) {
    for (auto b : bytes) {
      state_ ^= b;
      state_ *= 0x100000001B3ULL;
    }
  }
  void update(std::string_view s) {
    update(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xCBF29CE484222325ULL;
};

std::string hex64(std::uint64_t v);
/// Hash of a file's bytes, as 16 hex digits.
std::string file_hash(const std::string& path);

}  // namespace dndx
