#pragma once

#include <stdexcept>
#include <string>

namespace lumiswap {

enum class ErrorKind {
  kNotFound,
  kDecode,
  kIo,
  kDimension,
  kConfiguration,
  kFormat,
  kIntegrity,
  kNumeric,
  kArgument,
};

const char* to_string(ErrorKind kind);

// Base of every exception thrown by the library. The kind is stable and is
// what the CLI prints in its machine-readable error line.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define LUMISWAP_DEFINE_ERROR(Name, Kind)                                      \
  class Name : public Error {                                                  \
   public:                                                                     \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {}   \
  };

LUMISWAP_DEFINE_ERROR(NotFoundError, kNotFound)
LUMISWAP_DEFINE_ERROR(DecodeError, kDecode)
LUMISWAP_DEFINE_ERROR(IoError, kIo)
LUMISWAP_DEFINE_ERROR(DimensionError, kDimension)
LUMISWAP_DEFINE_ERROR(ConfigurationError, kConfiguration)
LUMISWAP_DEFINE_ERROR(FormatError, kFormat)
LUMISWAP_DEFINE_ERROR(IntegrityError, kIntegrity)
LUMISWAP_DEFINE_ERROR(NumericError, kNumeric)
LUMISWAP_DEFINE_ERROR(ArgumentError, kArgument)

#undef LUMISWAP_DEFINE_ERROR

}  // namespace lumiswap
