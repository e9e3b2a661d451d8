#include "vcflr/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>
#include <unordered_map>

#include "vcflr/error.hpp"

namespace vcflr {
namespace {

constexpr std::string_view kHeader = "subject_id,z,stream,time,value";

[[noreturn]] void parse_fail(std::size_t line, const std::string& msg) {
  throw Error(ErrorKind::parse_error, "line " + std::to_string(line) + ": " + msg);
}

double parse_number(std::string_view field, std::size_t line, const char* what) {
  double v = 0.0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last || !std::isfinite(v)) {
    parse_fail(line, std::string("invalid ") + what + " '" + std::string(field) + "'");
  }
  return v;
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void sort_by_time(std::vector<Observation>& obs) {
  std::stable_sort(obs.begin(), obs.end(), [](const Observation& a, const Observation& b) { return a.time < b.time; });
}

}  // namespace

void validate(const LongitudinalDataset& ds) {
  auto bad = [](const std::string& msg) { throw Error(ErrorKind::domain_violation, msg); };
  if (!(ds.z_domain.length() > 0.0)) bad("covariate domain must have positive length");
  if (!(ds.s_domain.length() > 0.0)) bad("predictor domain must have positive length");
  if (!ds.scalar_response && !(ds.t_domain.length() > 0.0)) bad("response domain must have positive length");
  for (const auto& s : ds.subjects) {
    if (!ds.z_domain.contains(s.z)) bad("subject " + s.id + ": z = " + format_number(s.z) + " outside domain");
    for (const auto& o : s.x_obs) {
      if (!ds.s_domain.contains(o.time)) bad("subject " + s.id + ": X time " + format_number(o.time) + " outside domain");
    }
    if (ds.scalar_response) {
      if (s.y_obs.size() > 1) bad("subject " + s.id + ": more than one scalar response");
    } else {
      for (const auto& o : s.y_obs) {
        if (!ds.t_domain.contains(o.time)) bad("subject " + s.id + ": Y time " + format_number(o.time) + " outside domain");
      }
    }
  }
}

LongitudinalDataset read_csv(std::istream& in, const DatasetSchema& schema) {
  LongitudinalDataset ds;
  ds.s_domain = schema.s_domain;
  ds.t_domain = schema.t_domain;
  ds.z_domain = schema.z_domain;
  ds.scalar_response = schema.scalar_response;

  std::string line;
  std::size_t line_no = 0;
  auto strip_cr = [](std::string& l) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
  };
  if (!std::getline(in, line)) parse_fail(1, "missing header");
  ++line_no;
  strip_cr(line);
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
  if (line != kHeader) parse_fail(1, "header must be '" + std::string(kHeader) + "'");

  std::unordered_map<std::string, std::size_t> index;
  std::string_view fields[5];
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    std::string_view rest(line);
    std::size_t nf = 0;
    while (true) {
      const auto comma = rest.find(',');
      if (nf == 5) parse_fail(line_no, "too many fields");
      fields[nf++] = rest.substr(0, comma);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (nf != 5) parse_fail(line_no, "expected 5 fields, found " + std::to_string(nf));

    const std::string id(fields[0]);
    if (id.empty()) parse_fail(line_no, "empty subject_id");
    const double z = parse_number(fields[1], line_no, "z");
    const std::string_view stream = fields[2];
    if (stream != "X" && stream != "Y") {
      parse_fail(line_no, "stream must be X or Y, found '" + std::string(stream) + "'");
    }
    const double value = parse_number(fields[4], line_no, "value");

    auto [it, inserted] = index.try_emplace(id, ds.subjects.size());
    if (inserted) {
      Subject s;
      s.id = id;
      s.z = z;
      ds.subjects.push_back(std::move(s));
    }
    Subject& subj = ds.subjects[it->second];
    if (subj.z != z) parse_fail(line_no, "subject " + id + " has inconsistent z");

    if (stream == "X") {
      if (fields[3].empty()) parse_fail(line_no, "X rows need a time");
      subj.x_obs.push_back({parse_number(fields[3], line_no, "time"), value});
    } else if (ds.scalar_response) {
      if (!fields[3].empty()) parse_fail(line_no, "scalar-response Y rows must leave time empty");
      if (!subj.y_obs.empty()) parse_fail(line_no, "subject " + id + " has more than one scalar response");
      subj.y_obs.push_back({0.0, value});
    } else {
      if (fields[3].empty()) parse_fail(line_no, "Y rows need a time in functional-response data");
      subj.y_obs.push_back({parse_number(fields[3], line_no, "time"), value});
    }
  }
  for (auto& s : ds.subjects) {
    sort_by_time(s.x_obs);
    sort_by_time(s.y_obs);
  }
  validate(ds);
  return ds;
}

LongitudinalDataset load_csv(const std::filesystem::path& path, const DatasetSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + path.string());
  return read_csv(in, schema);
}

void write_csv(std::ostream& out, const LongitudinalDataset& ds) {
  out << kHeader << '\n';
  for (const auto& s : ds.subjects) {
    const std::string z = format_number(s.z);
    for (const auto& o : s.x_obs) {
      out << s.id << ',' << z << ",X," << format_number(o.time) << ',' << format_number(o.value) << '\n';
    }
    for (const auto& o : s.y_obs) {
      out << s.id << ',' << z << ",Y,";
      if (!ds.scalar_response) out << format_number(o.time);
      out << ',' << format_number(o.value) << '\n';
    }
  }
}

void save_csv(const std::filesystem::path& path, const LongitudinalDataset& ds) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io_error, "cannot write " + path.string());
  write_csv(out, ds);
  if (!out) throw Error(ErrorKind::io_error, "failed writing " + path.string());
}

std::size_t BinPartition::bin_of(std::size_t subject) const {
  for (std::size_t p = 0; p < index_sets.size(); ++p) {
    if (std::binary_search(index_sets[p].begin(), index_sets[p].end(), subject)) return p;
  }
  throw Error(ErrorKind::invalid_argument, "subject " + std::to_string(subject) + " not in partition");
}

namespace {

void check_occupancy(const BinPartition& part, std::size_t min_occupancy) {
  for (std::size_t p = 0; p < part.size(); ++p) {
    if (part.counts[p] < min_occupancy) throw EmptyBinError(p, part.counts[p], min_occupancy);
  }
}

}  // namespace

BinPartition partition(const LongitudinalDataset& ds, std::size_t bins, std::size_t min_occupancy) {
  if (bins == 0) throw Error(ErrorKind::invalid_argument, "bin count must be positive");
  const Domain& zd = ds.z_domain;
  if (!(zd.length() > 0.0)) throw Error(ErrorKind::invalid_interval, "covariate domain has zero length");
  BinPartition part;
  part.width = zd.length() / static_cast<double>(bins);
  part.centers.resize(bins);
  for (std::size_t p = 0; p < bins; ++p) part.centers[p] = zd.lower + (static_cast<double>(p) + 0.5) * part.width;
  part.index_sets.assign(bins, {});
  auto left_edge = [&](std::size_t p) { return zd.lower + static_cast<double>(p) * part.width; };
  for (std::size_t i = 0; i < ds.subjects.size(); ++i) {
    const double z = ds.subjects[i].z;
    if (!zd.contains(z)) {
      throw Error(ErrorKind::uncovered_subject, "subject " + ds.subjects[i].id + " has z outside the domain");
    }
    auto p = static_cast<std::size_t>(std::clamp(std::floor((z - zd.lower) / part.width), 0.0,
                                                 static_cast<double>(bins - 1)));
    // Floor can land one bin off when z sits on an edge.
    while (p > 0 && z < left_edge(p)) --p;
    while (p + 1 < bins && z >= left_edge(p + 1)) ++p;
    part.index_sets[p].push_back(i);
  }
  for (const auto& set : part.index_sets) part.counts.push_back(set.size());
  check_occupancy(part, min_occupancy);
  return part;
}

BinPartition explicit_bins(const LongitudinalDataset& ds, std::span<const double> centers, double width,
                           std::size_t min_occupancy) {
  if (centers.empty() || !(width > 0.0)) {
    throw Error(ErrorKind::invalid_argument, "explicit bins need centers and a positive width");
  }
  BinPartition part;
  part.centers.assign(centers.begin(), centers.end());
  if (!std::is_sorted(part.centers.begin(), part.centers.end())) {
    throw Error(ErrorKind::invalid_argument, "bin centers must be ascending");
  }
  part.width = width;
  part.index_sets.assign(part.centers.size(), {});
  const double half = 0.5 * width;
  for (std::size_t i = 0; i < ds.subjects.size(); ++i) {
    const double z = ds.subjects[i].z;
    std::size_t found = part.centers.size();
    for (std::size_t p = 0; p < part.centers.size(); ++p) {
      const double lo = part.centers[p] - half;
      const double hi = part.centers[p] + half;
      const bool last = p + 1 == part.centers.size();
      if (z >= lo && (z < hi || (last && z <= hi))) {
        found = p;
        break;
      }
    }
    if (found == part.centers.size()) {
      throw Error(ErrorKind::uncovered_subject,
                  "subject " + ds.subjects[i].id + " with z = " + format_number(z) + " lies in no bin");
    }
    part.index_sets[found].push_back(i);
  }
  for (const auto& set : part.index_sets) part.counts.push_back(set.size());
  check_occupancy(part, min_occupancy);
  return part;
}

}  // namespace vcflr
