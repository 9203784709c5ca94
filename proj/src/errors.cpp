#include "modsensor/errors.hpp"

#include <iostream>

namespace modsensor::diag {

namespace {
thread_local WarningCapture* active_capture = nullptr;
}

WarningCapture::WarningCapture() : previous_(active_capture) { active_capture = this; }

WarningCapture::~WarningCapture() { active_capture = previous_; }

void warn(const std::string& message) {
  if (active_capture != nullptr) {
    ++active_capture->count_;
    active_capture->last_ = message;
    return;
  }
  std::cerr << "warning: " << message << '\n';
}

}  // namespace modsensor::diag
