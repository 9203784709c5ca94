#pragma once

#include <functional>
#include <stdexcept>
#include <string>

namespace modsensor {

// Bad input or inconsistent configuration. Maps to CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical step could not reach its accuracy contract. Maps to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fock truncation too small for the requested object.
class TruncationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

namespace diag {

using WarningSink = std::function<void(const std::string&)>;

// Emit a non-fatal warning. Goes to stderr unless a capture is active on this thread.
void warn(const std::string& message);

// Redirects warnings raised on the current thread while alive.
class WarningCapture {
 public:
  WarningCapture();
  ~WarningCapture();
  WarningCapture(const WarningCapture&) = delete;
  WarningCapture& operator=(const WarningCapture&) = delete;

  int count() const { return count_; }
  const std::string& last() const { return last_; }

 private:
  friend void warn(const std::string& message);

  int count_ = 0;
  std::string last_;
  WarningCapture* previous_;
};

}  // namespace diag
}  // namespace modsensor
