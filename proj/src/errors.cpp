#include "evsel/errors.hpp"

namespace evsel {

SchemaError::SchemaError(std::string source, std::size_t line, std::string field, const std::string& what)
    : Error(source + ":" + std::to_string(line) + ": field '" + field + "': " + what),
      source_(std::move(source)),
      line_(line),
      field_(std::move(field)) {}

}  // namespace evsel
