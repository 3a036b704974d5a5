#include "lumiswap/error.hpp"

namespace lumiswap {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNotFound: return "not_found";
    case ErrorKind::kDecode: return "decode";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kDimension: return "dimension";
    case ErrorKind::kConfiguration: return "configuration";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kIntegrity: return "integrity";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kArgument: return "argument";
  }
  return "unknown";
}

}  // namespace lumiswap
