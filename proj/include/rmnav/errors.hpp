#pragma once

#include <stdexcept>
#include <string>

namespace rmnav {

// Every failure the library reports derives from Error so callers can catch
// one type at the boundary (CLI, HTTP handlers) and still branch on the
// concrete kind where it matters.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define RMNAV_DEFINE_ERROR(Name) \
  class Name : public Error {    \
   public:                       \
    using Error::Error;          \
  }

RMNAV_DEFINE_ERROR(InvalidSpec);
RMNAV_DEFINE_ERROR(GridTooLarge);
RMNAV_DEFINE_ERROR(InvalidPatch);
RMNAV_DEFINE_ERROR(MaskShapeMismatch);
RMNAV_DEFINE_ERROR(DegenerateData);
RMNAV_DEFINE_ERROR(Unreachable);
RMNAV_DEFINE_ERROR(DimensionMismatch);
RMNAV_DEFINE_ERROR(NonFiniteLoss);
RMNAV_DEFINE_ERROR(NotSimplex);
RMNAV_DEFINE_ERROR(BadParam);
RMNAV_DEFINE_ERROR(NonFinite);
RMNAV_DEFINE_ERROR(ConfigMismatch);
RMNAV_DEFINE_ERROR(FormatError);

#undef RMNAV_DEFINE_ERROR

}  // namespace rmnav
