// Copyright 2026 The icpx Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ICPX_ERRORS_HPP
#define ICPX_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace icpx {

// Every failure raised by the library derives from Error so callers (the CLI
// in particular) can map them to exit codes in one place.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define ICPX_DEFINE_ERROR(Name)          \
  class Name : public Error {            \
   public:                               \
    using Error::Error;                  \
  }

ICPX_DEFINE_ERROR(PreconditionViolation);
ICPX_DEFINE_ERROR(IoError);
ICPX_DEFINE_ERROR(ParseError);
ICPX_DEFINE_ERROR(AngleNearPi);
ICPX_DEFINE_ERROR(InsufficientOverlap);
ICPX_DEFINE_ERROR(NoCorrespondences);
ICPX_DEFINE_ERROR(DegenerateConfiguration);
ICPX_DEFINE_ERROR(SingularCovariance);
ICPX_DEFINE_ERROR(SingularDesign);
ICPX_DEFINE_ERROR(TooFewSamples);
ICPX_DEFINE_ERROR(EmptyGroup);
ICPX_DEFINE_ERROR(ArityMismatch);
ICPX_DEFINE_ERROR(ConfigError);

#undef ICPX_DEFINE_ERROR

inline void require(bool condition, const std::string& message) {
  if (!condition) throw PreconditionViolation(message);
}

}  // namespace icpx

#endif  // ICPX_ERRORS_HPP
