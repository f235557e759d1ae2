#pragma once

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace evsel {

using WarningHandler = std::function<void(std::string_view)>;

/// Emits a warning through the installed handler (stderr by default).
void warn(std::string_view message);

/// Replaces the process-wide warning handler and returns the previous one.
/// Passing an empty handler restores the stderr default.
WarningHandler set_warning_handler(WarningHandler handler);

/// Installs a handler for the lifetime of the object; used by tests to
/// capture warnings.
class ScopedWarningCapture {
 public:
  ScopedWarningCapture();
  ~ScopedWarningCapture();
  ScopedWarningCapture(const ScopedWarningCapture&) = delete;
  ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;

  std::vector<std::string> messages() const;
  bool contains(std::string_view needle) const;

 private:
  struct State;
  std::shared_ptr<State> state_;
  WarningHandler previous_;
};

}  // namespace evsel
