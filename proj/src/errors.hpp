#pragma once

#include <stdexcept>
#include <string>

namespace mcq {

enum class ErrorKind {
    dimension_mismatch,
    invalid_distribution,
    reward_out_of_bounds,
    empty_dataset,
    length_mismatch,
    empty_mask,
    non_finite,
    epsilon_out_of_range,
    shape_mismatch,
    non_finite_input,
    non_finite_loss,
    unknown_kind,
    degenerate_refs,
    missing_dataset,
    bad_magic,
    version_mismatch,
    truncated,
    duplicate_name,
    config_error,
    io_error,
};

const char* error_kind_name(ErrorKind kind);

/// Project-wide exception carrying a machine-readable kind next to the message.
class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
          kind_(kind) {}

    ErrorKind kind() const { return kind_; }

  private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace mcq
