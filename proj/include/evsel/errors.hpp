#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace evsel {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A JSON-Lines record (or JSON document) does not match its schema.
class SchemaError : public Error {
 public:
  SchemaError(std::string source, std::size_t line, std::string field, const std::string& what);

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::string source_;
  std::size_t line_;
  std::string field_;
};

/// Failure talking to an external provider (embedding or chat endpoint).
class TransportError : public Error {
 public:
  TransportError(const std::string& what, bool retryable, int status = 0)
      : Error(what), retryable_(retryable), status_(status) {}

  bool retryable() const noexcept { return retryable_; }
  /// HTTP status, or 0 when the request never produced a response.
  int status() const noexcept { return status_; }

 private:
  bool retryable_;
  int status_;
};

/// Invalid run configuration; `field` is the dotted config path.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A command needs an artifact that an upstream command produces.
class MissingArtifactError : public Error {
 public:
  MissingArtifactError(std::string path, std::string producer)
      : Error("missing artifact " + path + " (run `" + producer + "` first)"),
        path_(std::move(path)),
        producer_(std::move(producer)) {}
  const std::string& path() const noexcept { return path_; }
  const std::string& producer() const noexcept { return producer_; }

 private:
  std::string path_;
  std::string producer_;
};

}  // namespace evsel
