#pragma once

#include <stdexcept>
#include <string>

namespace hprobe {

// Process exit codes shared by the library and the CLI.
enum class ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kDataIntegrity = 3,
  kNumerical = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

/// Bad arguments, unknown labels, out-of-range parameters, missing files.
class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ExitCode::kUsage, what) {}
};

/// Stored data disagrees with itself (alignment, labels, payload sizes).
class DataIntegrityError : public Error {
 public:
  explicit DataIntegrityError(const std::string& what)
      : Error(ExitCode::kDataIntegrity, what) {}
};

/// Non-finite losses, rank deficiency, degenerate fits.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ExitCode::kNumerical, what) {}
};

}  // namespace hprobe
