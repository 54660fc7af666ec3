#pragma once

#include <stdexcept>
#include <string>

namespace dcfair {

// Base for every error raised by the library. Subclasses name the contract
// that was violated so callers can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaError : public Error { using Error::Error; };  // missing/duplicate columns
class ValueError : public Error { using Error::Error; };   // unmappable or non-finite values
class SpecError : public Error { using Error::Error; };    // split/bias/sweep spec out of range
class DomainError : public Error { using Error::Error; };  // empty samples, absent groups
class ShapeError : public Error { using Error::Error; };    // dimension mismatch
class StateError : public Error { using Error::Error; };   // stale forward cache
class ConfigError : public Error { using Error::Error; };  // invalid model/training/experiment config
class IoError : public Error { using Error::Error; };
class ExperimentError : public Error { using Error::Error; };

}  // namespace dcfair
