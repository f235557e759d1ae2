#include "evsel/log.hpp"

#include <algorithm>
#include <iostream>
#include <mutex>
#include <utility>

namespace evsel {
namespace {

std::mutex& handler_mutex() {
  static std::mutex m;
  return m;
}

WarningHandler& handler() {
  static WarningHandler h;
  return h;
}

}  // namespace

void warn(std::string_view message) {
  std::lock_guard lock(handler_mutex());
  if (handler()) {
    handler()(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

WarningHandler set_warning_handler(WarningHandler h) {
  std::lock_guard lock(handler_mutex());
  return std::exchange(handler(), std::move(h));
}

struct ScopedWarningCapture::State {
  mutable std::mutex mutex;
  std::vector<std::string> messages;
};

ScopedWarningCapture::ScopedWarningCapture() : state_(std::make_shared<State>()) {
  previous_ = set_warning_handler([state = state_](std::string_view msg) {
    std::lock_guard lock(state->mutex);
    state->messages.emplace_back(msg);
  });
}

ScopedWarningCapture::~ScopedWarningCapture() { set_warning_handler(std::move(previous_)); }

std::vector<std::string> ScopedWarningCapture::messages() const {
  std::lock_guard lock(state_->mutex);
  return state_->messages;
}

bool ScopedWarningCapture::contains(std::string_view needle) const {
  std::lock_guard lock(state_->mutex);
  return std::any_of(state_->messages.begin(), state_->messages.end(),
                     [&](const std::string& m) { return m.find(needle) != std::string::npos; });
}

}  // namespace evsel
