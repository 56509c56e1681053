#ifndef MTKD_ERROR_HPP
#define MTKD_ERROR_HPP

#include <stdexcept>
#include <string>

namespace mtkd {

// Bad scalar argument (temperature, rank, epsilon, ...).
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Structurally bad input: empty sets, dimension or length mismatches.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnmappedToken : public InvalidInput {
 public:
  explicit UnmappedToken(const std::string& token)
      : InvalidInput("unmapped token '" + token + "'"), token_(token) {}
  const std::string& token() const noexcept { return token_; }

 private:
  std::string token_;
};

// Training configuration inconsistent with the supplied data.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace mtkd

#endif  // MTKD_ERROR_HPP
