#pragma once

#include <stdexcept>
#include <string>

namespace xlalign {

/// Bad input: malformed config, unknown token, empty dataset, missing file.
/// The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A contract or invariant was violated at runtime (frozen model mutated,
/// digest mismatch, non-finite activation). The CLI maps this to exit code 3.
class ContractError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class E = ValidationError>
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw E(msg);
}

}  // namespace xlalign
