#pragma once

// Internal JSON-Lines helpers shared by the loaders.

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "evsel/errors.hpp"

namespace evsel::detail {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename so readers never see partial output.
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Calls fn(record, line_number) for every non-blank line. Lines that are
/// not JSON objects raise SchemaError with field "<record>".
void for_each_record(std::string_view text, const std::string& source,
                     const std::function<void(const json&, std::size_t)>& fn);

std::string write_records(const std::vector<json>& records);

/// Field accessors raising SchemaError on a missing or mistyped field.
struct RecordReader {
  const json& record;
  const std::string& source;
  std::size_t line;

  const json& require(const char* field) const;
  bool has(const char* field) const { return record.contains(field) && !record.at(field).is_null(); }
  std::string string(const char* field, bool allow_empty = false) const;
  std::size_t index(const char* field) const;
  double number(const char* field) const;
  bool boolean(const char* field) const;
  [[noreturn]] void fail(const std::string& field, const std::string& what) const;
};

}  // namespace evsel::detail
