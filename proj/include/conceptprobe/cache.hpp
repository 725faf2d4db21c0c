#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "conceptprobe/hashing.hpp"

namespace cprobe {

/// Content address of a cached model output.
struct CacheKey {
  Digest digest;

  static CacheKey make(std::string_view model_id, std::string_view role,
                       const Digest& template_digest, std::string_view text);

  friend bool operator==(const CacheKey&, const CacheKey&) = default;
};

enum class CacheKind { hidden_state, generation };

struct CachedVector {
  std::vector<float> values;
  std::int64_t chunks = 1;
};

struct CacheStats {
  std::size_t hits = 0;
  std::size_t misses = 0;
  std::size_t corrupt = 0;
};

/// Content-addressed store on disk.
///
/// Layout under the root directory:
///   index.jsonl          append-only, one {"digest","kind","dim","checksum","chunks"} per line
///   blobs/<digest>.bin   float32 little-endian values (hidden states) or UTF-8 bytes (generations)
///
/// The last index line for a digest wins. Blobs are written to a temporary file
/// and renamed into place, so readers never observe partial blobs. Distinct keys
/// may be written concurrently; racing writers of one key store identical bytes.
class ContentCache {
 public:
  explicit ContentCache(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }

  /// Returns the cached vector, or runs `producer`, stores its output and
  /// returns the stored (float32-rounded) value. A corrupt entry is logged,
  /// discarded and recomputed.
  CachedVector get_or_compute(const CacheKey& key,
                              const std::function<CachedVector()>& producer);

  std::string get_or_compute_text(const CacheKey& key,
                                  const std::function<std::string()>& producer);

  bool contains(const CacheKey& key) const;
  CacheStats stats() const;

 private:
  struct Entry {
    CacheKind kind;
    std::int64_t dim = 0;
    std::int64_t chunks = 1;
    std::string checksum;
  };

  std::filesystem::path blob_path(const CacheKey& key) const;
  std::optional<std::string> read_valid_blob(const CacheKey& key, CacheKind kind);
  void store(const CacheKey& key, CacheKind kind, std::int64_t dim, std::int64_t chunks,
             const std::string& bytes);
  void load_index();

  std::filesystem::path root_;
  mutable std::mutex mutex_;
  std::map<Digest, Entry> index_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
  std::atomic<std::size_t> corrupt_{0};
};

std::string encode_float32_le(const std::vector<float>& values);
std::vector<float> decode_float32_le(std::string_view bytes);

}  // namespace cprobe
