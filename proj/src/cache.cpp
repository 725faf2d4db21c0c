#include "conceptprobe/cache.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "conceptprobe/error.hpp"

namespace cprobe {

namespace fs = std::filesystem;
using nlohmann::json;

CacheKey CacheKey::make(std::string_view model_id, std::string_view role,
                        const Digest& template_digest, std::string_view text) {
  Sha256Builder b;
  b.field("conceptprobe.cache/1").field(model_id).field(role).field(template_digest.hex()).field(text);
  return CacheKey{b.finish()};
}

std::string encode_float32_le(const std::vector<float>& values) {
  std::string out(values.size() * 4, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int k = 0; k < 4; ++k) out[i * 4 + k] = static_cast<char>((bits >> (8 * k)) & 0xff);
  }
  return out;
}

std::vector<float> decode_float32_le(std::string_view bytes) {
  if (bytes.size() % 4 != 0) throw DataError("float32 blob length is not a multiple of 4");
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k)
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + k])) << (8 * k);
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

namespace {

const char* kind_name(CacheKind k) {
  return k == CacheKind::hidden_state ? "hidden_state" : "generation";
}

}  // namespace

ContentCache::ContentCache(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_ / "blobs", ec);
  if (ec) throw IoError("cannot create cache directory " + root_.string() + ": " + ec.message());
  load_index();
}

void ContentCache::load_index() {
  std::ifstream in(root_ / "index.jsonl");
  if (!in) return;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = json::parse(line);
      const auto hex = j.at("digest").get<std::string>();
      if (hex.size() != 64) throw std::runtime_error("bad digest length");
      Digest d;
      for (std::size_t i = 0; i < 32; ++i)
        d.bytes[i] = static_cast<std::uint8_t>(std::stoul(hex.substr(2 * i, 2), nullptr, 16));
      Entry e;
      e.kind = j.at("kind").get<std::string>() == "generation" ? CacheKind::generation
                                                                : CacheKind::hidden_state;
      e.dim = j.at("dim").get<std::int64_t>();
      e.chunks = j.value("chunks", std::int64_t{1});
      e.checksum = j.at("checksum").get<std::string>();
      index_[d] = std::move(e);
    } catch (const std::exception& ex) {
      // A torn final line from an interrupted writer is expected; skip it.
      spdlog::warn("cache index {}:{} unreadable, skipped ({})", (root_ / "index.jsonl").string(),
                   line_no, ex.what());
    }
  }
}

fs::path ContentCache::blob_path(const CacheKey& key) const {
  return root_ / "blobs" / (key.digest.hex() + ".bin");
}

bool ContentCache::contains(const CacheKey& key) const {
  std::lock_guard lock(mutex_);
  return index_.count(key.digest) != 0;
}

CacheStats ContentCache::stats() const {
  return CacheStats{hits_.load(), misses_.load(), corrupt_.load()};
}

std::optional<std::string> ContentCache::read_valid_blob(const CacheKey& key, CacheKind kind) {
  Entry entry;
  {
    std::lock_guard lock(mutex_);
    auto it = index_.find(key.digest);
    if (it == index_.end()) return std::nullopt;
    entry = it->second;
  }
  std::ifstream in(blob_path(key), std::ios::binary);
  std::string bytes;
  if (in) {
    std::ostringstream ss;
    ss << in.rdbuf();
    bytes = ss.str();
  }
  const auto expected_len = kind == CacheKind::hidden_state ? entry.dim * 4 : entry.dim;
  const bool ok = in && entry.kind == kind &&
                  static_cast<std::int64_t>(bytes.size()) == expected_len &&
                  sha256(bytes).hex() == entry.checksum;
  if (!ok) {
    ++corrupt_;
    spdlog::warn("cache entry {} failed its checksum; discarding and recomputing",
                 key.digest.hex());
    std::lock_guard lock(mutex_);
    index_.erase(key.digest);
    return std::nullopt;
  }
  return bytes;
}

void ContentCache::store(const CacheKey& key, CacheKind kind, std::int64_t dim,
                         std::int64_t chunks, const std::string& bytes) {
  const auto final_path = blob_path(key);
  std::ostringstream tmp_name;
  tmp_name << final_path.string() << ".tmp." << std::this_thread::get_id();
  {
    std::ofstream out(tmp_name.str(), std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write cache blob " + tmp_name.str());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to cache blob " + tmp_name.str());
  }
  std::error_code ec;
  fs::rename(tmp_name.str(), final_path, ec);
  if (ec) throw IoError("cannot publish cache blob " + final_path.string() + ": " + ec.message());

  Entry e{kind, dim, chunks, sha256(bytes).hex()};
  json line = {{"digest", key.digest.hex()},
               {"kind", kind_name(kind)},
               {"dim", dim},
               {"checksum", e.checksum},
               {"chunks", chunks}};
  std::lock_guard lock(mutex_);
  std::ofstream idx(root_ / "index.jsonl", std::ios::app | std::ios::binary);
  if (!idx) throw IoError("cannot append to cache index in " + root_.string());
  idx << line.dump() << '\n';
  idx.flush();
  index_[key.digest] = std::move(e);
}

CachedVector ContentCache::get_or_compute(const CacheKey& key,
                                          const std::function<CachedVector()>& producer) {
  if (auto bytes = read_valid_blob(key, CacheKind::hidden_state)) {
    ++hits_;
    CachedVector v;
    v.values = decode_float32_le(*bytes);
    std::lock_guard lock(mutex_);
    v.chunks = index_.at(key.digest).chunks;
    return v;
  }
  ++misses_;
  CachedVector fresh = producer();
  const auto bytes = encode_float32_le(fresh.values);
  store(key, CacheKind::hidden_state, static_cast<std::int64_t>(fresh.values.size()), fresh.chunks,
        bytes);
  return fresh;
}

std::string ContentCache::get_or_compute_text(const CacheKey& key,
                                              const std::function<std::string()>& producer) {
  if (auto bytes = read_valid_blob(key, CacheKind::generation)) {
    ++hits_;
    return *bytes;
  }
  ++misses_;
  std::string fresh = producer();
  store(key, CacheKind::generation, static_cast<std::int64_t>(fresh.size()), 1, fresh);
  return fresh;
}

}  // namespace cprobe
