#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vcflr {

enum class ErrorKind {
  invalid_argument,
  invalid_interval,
  grid_mismatch,
  insufficient_local_data,
  insufficient_centers,
  parse_error,
  domain_violation,
  empty_bin,
  uncovered_subject,
  not_symmetric,
  truncation_too_large,
  singular_covariance,
  covariate_out_of_domain,
  format_error,
  io_error,
};

// Base of every library exception. The kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class EmptyBinError : public Error {
 public:
  EmptyBinError(std::size_t bin, std::size_t count, std::size_t required)
      : Error(ErrorKind::empty_bin,
              "bin " + std::to_string(bin) + " holds " + std::to_string(count) +
                  " subjects, fewer than the required " + std::to_string(required)),
        bin_(bin) {}
  std::size_t bin() const noexcept { return bin_; }

 private:
  std::size_t bin_;
};

const char* to_string(ErrorKind kind) noexcept;

}  // namespace vcflr
