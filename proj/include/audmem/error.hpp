#pragma once

#include <stdexcept>
#include <string>

namespace audmem {

/// Base class for every error raised by the library. `kind()` is a stable
/// machine-readable tag (used by the HTTP layer and the CLI exit codes).
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define AUDMEM_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& what) : Error(#Name, what) {}  \
  };

// audio
AUDMEM_DEFINE_ERROR(DecodeError)
AUDMEM_DEFINE_ERROR(UnsupportedFormat)
AUDMEM_DEFINE_ERROR(InsufficientAudio)
// salience
AUDMEM_DEFINE_ERROR(ConfigError)
// features
AUDMEM_DEFINE_ERROR(SchemaError)
AUDMEM_DEFINE_ERROR(DuplicateKey)
// experiment
AUDMEM_DEFINE_ERROR(PlanInfeasible)
AUDMEM_DEFINE_ERROR(WorkerExhausted)
AUDMEM_DEFINE_ERROR(LogMismatch)
AUDMEM_DEFINE_ERROR(NotSplittable)
// stats
AUDMEM_DEFINE_ERROR(FitError)
AUDMEM_DEFINE_ERROR(DegenerateLabels)
AUDMEM_DEFINE_ERROR(StratifyError)
// service
AUDMEM_DEFINE_ERROR(ReplayError)

#undef AUDMEM_DEFINE_ERROR

}  // namespace audmem
