#include "vcflr/model_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"

#include "vcflr/error.hpp"

namespace vcflr {
namespace {

using nlohmann::json;

[[noreturn]] void bad_format(const std::string& msg) { throw Error(ErrorKind::format_error, "model file: " + msg); }

json grid_json(const Grid& g) { return {{"lower", g.lower}, {"upper", g.upper}, {"points", g.size()}}; }

Grid grid_from(const json& j) {
  const auto n = j.at("points").get<std::size_t>();
  if (n == 1) return Grid::point(j.at("lower").get<double>());
  return make_grid(j.at("lower").get<double>(), j.at("upper").get<double>(), n);
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from(const json& j, std::size_t expected) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != expected) bad_format("array of length " + std::to_string(v.size()) + ", expected " +
                                       std::to_string(expected));
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json matrix_json(const Eigen::MatrixXd& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"values", flat}};
}

Eigen::MatrixXd matrix_from(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto flat = j.at("values").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != flat.size()) bad_format("matrix size mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
  return m;
}

GridSurface surface_from(const json& j, const Grid& rows, const Grid& cols) {
  Eigen::MatrixXd m = matrix_from(j);
  if (static_cast<std::size_t>(m.rows()) != rows.size() || static_cast<std::size_t>(m.cols()) != cols.size()) {
    bad_format("surface does not match its grids");
  }
  return GridSurface(rows, cols, std::move(m));
}

json eigen_json(const EigenSystem& e) {
  json fns = json::array();
  for (const auto& f : e.functions) fns.push_back(vector_json(f.values));
  return {{"values", vector_json(e.values)}, {"functions", fns}};
}

EigenSystem eigen_from(const json& j, const Grid& grid) {
  EigenSystem e;
  const auto values = j.at("values").get<std::vector<double>>();
  e.values = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  for (const auto& f : j.at("functions")) e.functions.emplace_back(grid, vector_from(f, grid.size()));
  if (e.functions.size() != values.size()) bad_format("eigenvalue and eigenfunction counts differ");
  return e;
}

json report_json(const SelectionReport& r) {
  json table = json::array();
  for (const auto& e : r.table) table.push_back({{"candidate", e.candidate}, {"criterion", e.criterion}, {"score", e.score}});
  return {{"criterion", to_string(r.criterion)},
          {"binwidth_criterion", to_string(r.binwidth_criterion)},
          {"M", r.M},
          {"K", r.K},
          {"P", r.P},
          {"b", r.b},
          {"table", table}};
}

SelectionReport report_from(const json& j) {
  SelectionReport r;
  r.criterion = parse_criterion(j.at("criterion").get<std::string>());
  r.binwidth_criterion = parse_criterion(j.at("binwidth_criterion").get<std::string>());
  r.M = j.at("M").get<std::size_t>();
  r.K = j.at("K").get<std::size_t>();
  r.P = j.at("P").get<std::size_t>();
  r.b = j.at("b").get<double>();
  for (const auto& e : j.at("table")) {
    r.table.push_back({e.at("candidate").get<std::string>(), e.at("criterion").get<std::string>(),
                       e.at("score").get<double>()});
  }
  return r;
}

json bin_json(const BinEstimate& b) {
  const auto& bw = b.bandwidths;
  return {{"center", b.center},
          {"subjects", b.subjects},
          {"mean_x", vector_json(b.mean_x.values)},
          {"mean_y", vector_json(b.mean_y.values)},
          {"cov_x", matrix_json(b.cov_x.values)},
          {"cov_y", matrix_json(b.cov_y.values)},
          {"cross_cov", matrix_json(b.cross_cov.values)},
          {"eig_x", eigen_json(b.eig_x)},
          {"eig_y", eigen_json(b.eig_y)},
          {"sigma_mk", matrix_json(b.sigma_mk)},
          {"sigma2_x", b.sigma2_x},
          {"sigma2_y", b.sigma2_y},
          {"raw_beta", matrix_json(b.raw_beta.values)},
          {"bandwidths",
           {{"mean_x", bw.mean_x},
            {"mean_y", bw.mean_y},
            {"cov_x", bw.cov_x},
            {"cov_y", bw.cov_y},
            {"var_x", bw.var_x},
            {"var_y", bw.var_y},
            {"cross_s", bw.cross_s},
            {"cross_t", bw.cross_t}}}};
}

BinEstimate bin_from(const json& j, const Grid& sg, const Grid& tg) {
  BinEstimate b;
  b.center = j.at("center").get<double>();
  b.subjects = j.at("subjects").get<std::size_t>();
  b.mean_x = GridFunction(sg, vector_from(j.at("mean_x"), sg.size()));
  b.mean_y = GridFunction(tg, vector_from(j.at("mean_y"), tg.size()));
  b.cov_x = surface_from(j.at("cov_x"), sg, sg);
  b.cov_y = surface_from(j.at("cov_y"), tg, tg);
  b.cross_cov = surface_from(j.at("cross_cov"), sg, tg);
  b.eig_x = eigen_from(j.at("eig_x"), sg);
  b.eig_y = eigen_from(j.at("eig_y"), tg);
  b.sigma_mk = matrix_from(j.at("sigma_mk"));
  b.sigma2_x = j.at("sigma2_x").get<double>();
  b.sigma2_y = j.at("sigma2_y").get<double>();
  b.raw_beta = surface_from(j.at("raw_beta"), sg, tg);
  const auto& bw = j.at("bandwidths");
  b.bandwidths = {bw.at("mean_x").get<double>(), bw.at("mean_y").get<double>(), bw.at("cov_x").get<double>(),
                  bw.at("cov_y").get<double>(),  bw.at("var_x").get<double>(),  bw.at("var_y").get<double>(),
                  bw.at("cross_s").get<double>(), bw.at("cross_t").get<double>()};
  return b;
}

}  // namespace

void write_model(std::ostream& out, const FittedModel& m) {
  json bins = json::array();
  for (const auto& b : m.bins) bins.push_back(bin_json(b));
  const json doc = {
      {"format_version", kModelFormatVersion},
      {"scalar_response", m.scalar_response},
      {"global", m.global},
      {"s_grid", grid_json(m.s_grid)},
      {"t_grid", grid_json(m.t_grid)},
      {"z_domain", {m.z_domain.lower, m.z_domain.upper}},
      {"partition",
       {{"centers", m.partition.centers},
        {"width", m.partition.width},
        {"index_sets", m.partition.index_sets},
        {"counts", m.partition.counts}}},
      {"refine", {{"order", m.refine.order}, {"bandwidth", m.refine.bandwidth}, {"kernel", to_string(m.refine.kernel.family)}}},
      {"sigma2_x", m.sigma2_x},
      {"sigma2_y", m.sigma2_y},
      {"truncation", {{"M", m.M}, {"K", m.K}}},
      {"training_subjects", m.training_subjects},
      {"report", report_json(m.report)},
      {"bins", bins},
  };
  out << doc.dump(1) << '\n';
}

void save_model(const std::filesystem::path& path, const FittedModel& model) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io_error, "cannot write " + path.string());
  write_model(out, model);
  if (!out) throw Error(ErrorKind::io_error, "failed writing " + path.string());
}

FittedModel read_model(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    bad_format(std::string("not valid JSON (") + e.what() + ")");
  }
  if (!doc.is_object() || !doc.contains("format_version")) bad_format("missing format_version");
  if (!doc["format_version"].is_number_integer() || doc["format_version"].get<int>() != kModelFormatVersion) {
    bad_format("unsupported format_version " + doc["format_version"].dump() + " (expected " +
               std::to_string(kModelFormatVersion) + ")");
  }
  try {
    FittedModel m;
    m.scalar_response = doc.at("scalar_response").get<bool>();
    m.global = doc.at("global").get<bool>();
    m.s_grid = grid_from(doc.at("s_grid"));
    m.t_grid = grid_from(doc.at("t_grid"));
    const auto z = doc.at("z_domain").get<std::vector<double>>();
    if (z.size() != 2) bad_format("z_domain needs two values");
    m.z_domain = {z[0], z[1]};
    const auto& part = doc.at("partition");
    m.partition.centers = part.at("centers").get<std::vector<double>>();
    m.partition.width = part.at("width").get<double>();
    m.partition.index_sets = part.at("index_sets").get<std::vector<std::vector<std::size_t>>>();
    m.partition.counts = part.at("counts").get<std::vector<std::size_t>>();
    const auto& refine = doc.at("refine");
    m.refine.order = refine.at("order").get<int>();
    m.refine.bandwidth = refine.at("bandwidth").get<double>();
    m.refine.kernel.family = parse_kernel_family(refine.at("kernel").get<std::string>());
    m.sigma2_x = doc.at("sigma2_x").get<double>();
    m.sigma2_y = doc.at("sigma2_y").get<double>();
    m.M = doc.at("truncation").at("M").get<std::size_t>();
    m.K = doc.at("truncation").at("K").get<std::size_t>();
    m.training_subjects = doc.at("training_subjects").get<std::size_t>();
    m.report = report_from(doc.at("report"));
    for (const auto& b : doc.at("bins")) m.bins.push_back(bin_from(b, m.s_grid, m.t_grid));
    if (m.bins.empty() || m.bins.size() != m.partition.centers.size()) bad_format("bin count mismatch");
    return m;
  } catch (const json::exception& e) {
    bad_format(e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::format_error) throw;
    bad_format(e.what());
  }
}

FittedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + path.string());
  return read_model(in);
}

}  // namespace vcflr
