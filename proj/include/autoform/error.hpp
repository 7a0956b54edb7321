#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace autoform {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad command-line input or an impossible argument combination.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Missing toolchain, credentials, index, or an unreadable config file.
/// Always distinct from a compile failure.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A value violates a documented invariant or precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A write would clobber an existing record without the overwrite flag.
class ConflictError : public Error {
 public:
  using Error::Error;
};

class StorageError : public Error {
 public:
  using Error::Error;
};

/// Replay mode found no fixture for a request. Replay is fail-closed.
class FixtureMiss : public Error {
 public:
  explicit FixtureMiss(std::string key, const std::string& what_kind = "fixture")
      : Error("no " + what_kind + " for key " + key), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Provider failure that survived the retry budget.
class GatewayError : public Error {
 public:
  using Error::Error;
};

/// Provider failure worth retrying (5xx, 429, connection reset).
class TransientError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

/// Provider returned a payload we could not decode. Carries the raw body.
class DecodeError : public GatewayError {
 public:
  DecodeError(const std::string& what, std::string raw_body)
      : GatewayError(what), raw_body_(std::move(raw_body)) {}
  const std::string& raw_body() const noexcept { return raw_body_; }

 private:
  std::string raw_body_;
};

/// A scripted model ran out of canned responses: the test script is too short.
class ScriptExhausted : public Error {
 public:
  using Error::Error;
};

}  // namespace autoform
