#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fusion_mammo {

enum class ErrorKind {
  dimension,
  argument,
  numeric,
  state,
  format,
  data,
  ingestion,
  construction,
};

std::string_view to_string(ErrorKind kind);

/// Base of every error thrown by the library. The kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define FUSION_MAMMO_DEFINE_ERROR(Name, Kind)                                \
  class Name : public Error {                                                \
   public:                                                                   \
    explicit Name(const std::string& message) : Error(ErrorKind::Kind, message) {} \
  };

FUSION_MAMMO_DEFINE_ERROR(DimensionError, dimension)
FUSION_MAMMO_DEFINE_ERROR(ArgumentError, argument)
FUSION_MAMMO_DEFINE_ERROR(NumericError, numeric)
FUSION_MAMMO_DEFINE_ERROR(StateError, state)
FUSION_MAMMO_DEFINE_ERROR(FormatError, format)
FUSION_MAMMO_DEFINE_ERROR(DataError, data)
FUSION_MAMMO_DEFINE_ERROR(IngestionError, ingestion)
FUSION_MAMMO_DEFINE_ERROR(ConstructionError, construction)

#undef FUSION_MAMMO_DEFINE_ERROR

}  // namespace fusion_mammo
