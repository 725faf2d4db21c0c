#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "conceptprobe/provider.hpp"

namespace httplib {
class Server;
}

namespace cprobe {

/// Serves a Backend over the inference-service wire protocol on localhost.
/// Hidden states are requested with the unified role since the wire format
/// carries only the prompt text.
class WireServer {
 public:
  explicit WireServer(std::shared_ptr<Backend> backend);
  ~WireServer();
  WireServer(const WireServer&) = delete;
  WireServer& operator=(const WireServer&) = delete;

  /// Binds to 127.0.0.1 (port 0 picks a free port) and serves on a thread.
  int start(int port = 0);
  void stop();
  std::string endpoint() const;

  /// Makes the next `n` requests fail with HTTP 500.
  void inject_failures(int n);

 private:
  std::shared_ptr<Backend> backend_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> failures_{0};
};

struct ConformanceCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Protocol conformance suite for any inference service: response shapes,
/// hidden_state determinism, dimension agreement with /v1/info, 400/413
/// error codes and chunk counts.
std::vector<ConformanceCheck> run_conformance(const std::string& endpoint);

}  // namespace cprobe
