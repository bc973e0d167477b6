#pragma once

#include <stdexcept>
#include <string>

namespace ncl {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define NCL_DEFINE_ERROR(Name)          \
  class Name : public Error {           \
   public:                              \
    using Error::Error;                 \
  }

NCL_DEFINE_ERROR(DimensionError);
NCL_DEFINE_ERROR(DomainError);
NCL_DEFINE_ERROR(ShapeError);
NCL_DEFINE_ERROR(MissingClassError);
NCL_DEFINE_ERROR(EmptyBatchError);
NCL_DEFINE_ERROR(EmptyPrototypeError);
NCL_DEFINE_ERROR(DegenerateAnchorError);
NCL_DEFINE_ERROR(DegenerateClassError);
NCL_DEFINE_ERROR(ConfigError);
NCL_DEFINE_ERROR(CacheError);
NCL_DEFINE_ERROR(ProtocolError);
NCL_DEFINE_ERROR(IncompleteMatrixError);
NCL_DEFINE_ERROR(UndefinedMetricError);
NCL_DEFINE_ERROR(FormatError);

#undef NCL_DEFINE_ERROR

}  // namespace ncl
