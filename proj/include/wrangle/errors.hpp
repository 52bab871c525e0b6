#pragma once

#include <stdexcept>
#include <string>

namespace wrangle {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data: ragged CSV rows, duplicate headers, bad annotations.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or arguments (CLI exit code 64).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Backend failure surfaced by the model gateway. Carries the request tag.
class BackendError : public Error {
 public:
  BackendError(std::string tag, const std::string& what)
      : Error(what), tag_(std::move(tag)) {}
  const std::string& tag() const noexcept { return tag_; }

 private:
  std::string tag_;
};

/// Retryable failure (network, 5xx). Backends throw this; the gateway retries.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// Snippet execution infrastructure failures.
class SandboxError : public Error {
 public:
  using Error::Error;
};

class SandboxLaunchError : public SandboxError {
 public:
  using SandboxError::SandboxError;
};

class SnippetLoadError : public SandboxError {
 public:
  using SandboxError::SandboxError;
};

class SandboxTimeout : public SandboxError {
 public:
  using SandboxError::SandboxError;
};

class ProtocolError : public SandboxError {
 public:
  using SandboxError::SandboxError;
};

}  // namespace wrangle
