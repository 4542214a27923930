#pragma once

#include <iostream>
#include <stdexcept>
#include <string>

namespace surfcon {

/// Internal failure (divergence, inconsistent state). Maps to exit status 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: malformed files, invalid arguments, missing artifacts. Maps to exit status 2.
class InputError : public Error {
 public:
  using Error::Error;
};

inline void warn(const std::string& message) { std::clog << "warning: " << message << '\n'; }

}  // namespace surfcon
