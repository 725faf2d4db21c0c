#include "conceptprobe/hashing.hpp"

#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "conceptprobe/error.hpp"

namespace cprobe {

std::string Digest::hex() const {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (auto b : bytes) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0x0f]);
  }
  return out;
}

std::uint64_t Digest::prefix64() const noexcept {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | bytes[i];
  return v;
}

struct Sha256Builder::Impl {
  EVP_MD_CTX* ctx = nullptr;
};

Sha256Builder::Sha256Builder() : impl_(new Impl) {
  impl_->ctx = EVP_MD_CTX_new();
  if (impl_->ctx == nullptr || EVP_DigestInit_ex(impl_->ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(impl_->ctx);
    delete impl_;
    throw std::runtime_error("sha256: digest init failed");
  }
}

Sha256Builder::~Sha256Builder() {
  EVP_MD_CTX_free(impl_->ctx);
  delete impl_;
}

Sha256Builder& Sha256Builder::raw(std::span<const std::uint8_t> bytes) {
  EVP_DigestUpdate(impl_->ctx, bytes.data(), bytes.size());
  return *this;
}

Sha256Builder& Sha256Builder::field(std::string_view value) {
  std::uint8_t len[8];
  std::uint64_t n = value.size();
  for (int i = 7; i >= 0; --i) {
    len[i] = static_cast<std::uint8_t>(n & 0xff);
    n >>= 8;
  }
  raw(len);
  EVP_DigestUpdate(impl_->ctx, value.data(), value.size());
  return *this;
}

Digest Sha256Builder::finish() {
  Digest d;
  unsigned int len = 0;
  EVP_DigestFinal_ex(impl_->ctx, d.bytes.data(), &len);
  return d;
}

Digest sha256(std::span<const std::uint8_t> data) {
  Sha256Builder b;
  b.raw(data);
  return b.finish();
}

Digest sha256(std::string_view data) {
  return sha256(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace cprobe
