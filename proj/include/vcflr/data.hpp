#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace vcflr {

struct Domain {
  double lower = 0.0;
  double upper = 1.0;

  double length() const { return upper - lower; }
  bool contains(double v) const { return v >= lower && v <= upper; }
};

struct Observation {
  double time;
  double value;
};

/// One subject: covariate z, predictor stream X and response stream Y.
/// In scalar-response datasets `y_obs` holds exactly one entry whose time
/// is meaningless (0).
struct Subject {
  std::string id;
  double z = 0.0;
  std::vector<Observation> x_obs;
  std::vector<Observation> y_obs;
};

struct DatasetSchema {
  Domain s_domain{0.0, 1.0};
  Domain t_domain{0.0, 1.0};
  Domain z_domain{0.0, 1.0};
  bool scalar_response = false;
};

struct LongitudinalDataset {
  std::vector<Subject> subjects;
  Domain s_domain{0.0, 1.0};
  Domain t_domain{0.0, 1.0};
  Domain z_domain{0.0, 1.0};
  bool scalar_response = false;

  DatasetSchema schema() const { return {s_domain, t_domain, z_domain, scalar_response}; }
  std::size_t size() const { return subjects.size(); }
};

/// Checks domains and per-subject invariants; throws DomainViolation.
void validate(const LongitudinalDataset& ds);

/// CSV with header `subject_id,z,stream,time,value`; stream is X or Y.
/// Scalar-response Y rows leave time empty.
LongitudinalDataset read_csv(std::istream& in, const DatasetSchema& schema);
LongitudinalDataset load_csv(const std::filesystem::path& path, const DatasetSchema& schema);

void write_csv(std::ostream& out, const LongitudinalDataset& ds);
void save_csv(const std::filesystem::path& path, const LongitudinalDataset& ds);

/// Subjects grouped into covariate bins [c - h/2, c + h/2); the last bin is
/// closed on the right.
struct BinPartition {
  std::vector<double> centers;
  double width = 0.0;
  std::vector<std::vector<std::size_t>> index_sets;
  std::vector<std::size_t> counts;

  std::size_t size() const { return centers.size(); }
  /// Bin holding subject index i.
  std::size_t bin_of(std::size_t subject) const;
};

inline constexpr std::size_t kDefaultMinOccupancy = 5;

/// P equal-width bins over the covariate domain. Throws EmptyBinError for
/// the first bin holding fewer than `min_occupancy` subjects.
BinPartition partition(const LongitudinalDataset& ds, std::size_t bins,
                       std::size_t min_occupancy = kDefaultMinOccupancy);

/// Caller-supplied centers with a common width. Subjects fall in the first
/// bin (by ascending center) whose half-open interval contains z; the last
/// bin is closed. Throws UncoveredSubject or EmptyBinError.
BinPartition explicit_bins(const LongitudinalDataset& ds, std::span<const double> centers, double width,
                           std::size_t min_occupancy = kDefaultMinOccupancy);

}  // namespace vcflr
