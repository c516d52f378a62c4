#pragma once

#include <stdexcept>
#include <string>

namespace v7w {

enum class ErrorKind {
  dimension,
  domain,
  index,
  numerics,
  parse,
  validation,
  format,
  storage,
  usage,
};

/// Base for every error raised by the library. The kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define V7W_DEFINE_ERROR(Name, Kind)                                   \
  class Name : public Error {                                          \
   public:                                                             \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

V7W_DEFINE_ERROR(DimensionError, dimension)
V7W_DEFINE_ERROR(DomainError, domain)
V7W_DEFINE_ERROR(IndexError, index)
V7W_DEFINE_ERROR(NumericsError, numerics)
V7W_DEFINE_ERROR(ParseError, parse)
V7W_DEFINE_ERROR(ValidationError, validation)
V7W_DEFINE_ERROR(FormatError, format)
V7W_DEFINE_ERROR(StorageError, storage)
V7W_DEFINE_ERROR(UsageError, usage)

#undef V7W_DEFINE_ERROR

}  // namespace v7w
