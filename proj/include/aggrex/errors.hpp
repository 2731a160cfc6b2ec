#pragma once

#include <stdexcept>
#include <string>

namespace aggrex {

// Every failure class the CLI distinguishes by exit code.
enum class ErrorClass { Config = 2, Data = 3, Sampler = 4, Diagnostics = 5 };

// Single exception type carrying a stable machine-readable kind
// (e.g. "DuplicateStratum") plus the class used for exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), cls_(cls), kind_(std::move(kind)) {}

  ErrorClass error_class() const { return cls_; }
  const std::string& kind() const { return kind_; }

 private:
  ErrorClass cls_;
  std::string kind_;
};

[[noreturn]] inline void throw_config(const std::string& kind, const std::string& msg) {
  throw Error(ErrorClass::Config, kind, msg);
}
[[noreturn]] inline void throw_data(const std::string& kind, const std::string& msg) {
  throw Error(ErrorClass::Data, kind, msg);
}
[[noreturn]] inline void throw_sampler(const std::string& kind, const std::string& msg) {
  throw Error(ErrorClass::Sampler, kind, msg);
}
[[noreturn]] inline void throw_diagnostics(const std::string& kind, const std::string& msg) {
  throw Error(ErrorClass::Diagnostics, kind, msg);
}

}  // namespace aggrex
