#pragma once

#include <stdexcept>
#include <string>

namespace mulopt {

// Base for every error raised by the library. Each subclass names one failure
// mode so callers can catch precisely what they can handle.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define MULOPT_DEFINE_ERROR(Name)                                    \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  }

MULOPT_DEFINE_ERROR(IllegalCounts);
MULOPT_DEFINE_ERROR(AssignmentStall);
MULOPT_DEFINE_ERROR(InvalidAction);
MULOPT_DEFINE_ERROR(LegalizationFailure);
MULOPT_DEFINE_ERROR(BackendFailure);
MULOPT_DEFINE_ERROR(BackendTimeout);
MULOPT_DEFINE_ERROR(ZeroBaseline);
MULOPT_DEFINE_ERROR(RefDominated);
MULOPT_DEFINE_ERROR(ShapeMismatch);
MULOPT_DEFINE_ERROR(NoLegalAction);
MULOPT_DEFINE_ERROR(IllegalDesign);
MULOPT_DEFINE_ERROR(InvalidArgument);
MULOPT_DEFINE_ERROR(IoError);

#undef MULOPT_DEFINE_ERROR

}  // namespace mulopt
