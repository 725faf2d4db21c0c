#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace cprobe {

/// SHA-256 digest value.
struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  std::string hex() const;
  /// First eight bytes, big-endian. Used to seed per-text generators.
  std::uint64_t prefix64() const noexcept;

  friend bool operator==(const Digest&, const Digest&) = default;
  friend auto operator<=>(const Digest&, const Digest&) = default;
};

Digest sha256(std::string_view data);
Digest sha256(std::span<const std::uint8_t> data);

/// Incremental hashing with unambiguous field framing: every field is
/// prefixed by its length so ("ab","c") and ("a","bc") differ.
class Sha256Builder {
 public:
  Sha256Builder();
  ~Sha256Builder();
  Sha256Builder(const Sha256Builder&) = delete;
  Sha256Builder& operator=(const Sha256Builder&) = delete;

  Sha256Builder& field(std::string_view value);
  Sha256Builder& raw(std::span<const std::uint8_t> bytes);
  Digest finish();

 private:
  struct Impl;
  Impl* impl_;
};

std::string read_file_bytes(const std::string& path);

}  // namespace cprobe
