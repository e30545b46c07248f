#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace mg {

// Every failure in the system carries a stable machine-readable code
// (e.g. "MalformedHeader", "NotAuthorized") plus a human message. Codes
// travel unchanged into wire ERR payloads and CLI diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

[[noreturn]] inline void fail(std::string code, const std::string& message) {
  throw Error(std::move(code), message);
}

}  // namespace mg
