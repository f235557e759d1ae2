#include "jsonl.hpp"

#include <fstream>
#include <sstream>

namespace evsel::detail {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void for_each_record(std::string_view text, const std::string& source,
                     const std::function<void(const json&, std::size_t)>& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw SchemaError(source, line_no, "<record>", std::string("invalid JSON: ") + e.what());
    }
    if (!record.is_object()) throw SchemaError(source, line_no, "<record>", "expected a JSON object");
    fn(record, line_no);
    if (end == text.size()) break;
  }
}

std::string write_records(const std::vector<json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

void RecordReader::fail(const std::string& field, const std::string& what) const {
  throw SchemaError(source, line, field, what);
}

const json& RecordReader::require(const char* field) const {
  auto it = record.find(field);
  if (it == record.end() || it->is_null()) fail(field, "missing");
  return *it;
}

std::string RecordReader::string(const char* field, bool allow_empty) const {
  const json& v = require(field);
  if (!v.is_string()) fail(field, "expected a string");
  auto s = v.get<std::string>();
  if (!allow_empty && s.empty()) fail(field, "must not be empty");
  return s;
}

std::size_t RecordReader::index(const char* field) const {
  const json& v = require(field);
  if (!v.is_number_integer() || v.get<long long>() < 0) fail(field, "expected a non-negative integer");
  return v.get<std::size_t>();
}

double RecordReader::number(const char* field) const {
  const json& v = require(field);
  if (!v.is_number()) fail(field, "expected a number");
  return v.get<double>();
}

bool RecordReader::boolean(const char* field) const {
  const json& v = require(field);
  if (!v.is_boolean()) fail(field, "expected a boolean");
  return v.get<bool>();
}

}  // namespace evsel::detail
