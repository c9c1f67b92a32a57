// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace flashvit {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters: generator config, P/B out of range, bad division points.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or invariant-violating model/observation file.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Every path has likelihood NEG_INF under the model.
class InfeasibleDecode : public Error {
 public:
  using Error::Error;
};

/// All retained beam candidates lost their finite successors.
class BeamExhausted : public Error {
 public:
  using Error::Error;
};

/// Brute-force enumeration refused because K^T exceeds the cap.
class EnumerationCapExceeded : public Error {
 public:
  using Error::Error;
};

/// A decoder reached a state that is impossible for a correct run.
class InternalConsistencyError : public Error {
 public:
  using Error::Error;
};

}  // namespace flashvit
