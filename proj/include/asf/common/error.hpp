#pragma once

#include <stdexcept>
#include <string>

namespace asf {

// Base of every error the library raises. `kind()` is the stable error name
// printed by the CLI (e.g. "ShapeMismatchError").
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define ASF_DEFINE_ERROR(Name)                                  \
  class Name : public ::asf::Error {                            \
   public:                                                      \
    explicit Name(const std::string& message)                   \
        : ::asf::Error(#Name, message) {}                       \
  }

ASF_DEFINE_ERROR(ShapeMismatchError);
ASF_DEFINE_ERROR(PreconditionError);
ASF_DEFINE_ERROR(ConfigError);

}  // namespace asf
