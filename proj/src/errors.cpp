#include "mzlock/errors.hpp"

#include <utility>

namespace mzlock {

ValidationError::ValidationError(std::vector<ValidationIssue> issues)
    : Error([&] {
        std::string msg = "invalid configuration:";
        for (const auto& issue : issues) {
          msg += "\n  " + issue.key + ": " + issue.message;
        }
        return msg;
      }()),
      issues_(std::move(issues)) {}

}  // namespace mzlock
