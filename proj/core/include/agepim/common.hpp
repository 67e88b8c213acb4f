#ifndef AGEPIM_COMMON_HPP_
#define AGEPIM_COMMON_HPP_

#include <cmath>
#include <stdexcept>
#include <string>

namespace agepim {

// Error taxonomy surfaced by the CLI as `error category=<name> ...` on stderr.
enum class ErrorCategory {
  kUsage,
  kConfig,
  kIo,
  kData,
  kShape,
  kNumeric,
  kInternal,
};

const char* to_string(ErrorCategory c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory c, const std::string& msg) {
  throw Error(c, msg);
}

// Rounding used everywhere except the ADC: half toward +inf.
inline double round_half_up(double x) { return std::floor(x + 0.5); }

}  // namespace agepim

#endif  // AGEPIM_COMMON_HPP_
