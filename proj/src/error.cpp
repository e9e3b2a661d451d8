#include "vcflr/error.hpp"

namespace vcflr {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_argument: return "InvalidArgument";
    case ErrorKind::invalid_interval: return "InvalidInterval";
    case ErrorKind::grid_mismatch: return "GridMismatch";
    case ErrorKind::insufficient_local_data: return "InsufficientLocalData";
    case ErrorKind::insufficient_centers: return "InsufficientCenters";
    case ErrorKind::parse_error: return "ParseError";
    case ErrorKind::domain_violation: return "DomainViolation";
    case ErrorKind::empty_bin: return "EmptyBin";
    case ErrorKind::uncovered_subject: return "UncoveredSubject";
    case ErrorKind::not_symmetric: return "NotSymmetric";
    case ErrorKind::truncation_too_large: return "TruncationTooLarge";
    case ErrorKind::singular_covariance: return "SingularCovariance";
    case ErrorKind::covariate_out_of_domain: return "CovariateOutOfDomain";
    case ErrorKind::format_error: return "FormatError";
    case ErrorKind::io_error: return "IOError";
  }
  return "Unknown";
}

}  // namespace vcflr
