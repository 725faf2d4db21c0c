#include "conceptprobe/error.hpp"

namespace cprobe {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::usage: return "usage";
    case ErrorKind::config: return "config";
    case ErrorKind::provider: return "provider";
    case ErrorKind::data: return "data";
    case ErrorKind::io: return "io";
    case ErrorKind::numeric: return "numeric";
  }
  return "unknown";
}

}  // namespace cprobe
