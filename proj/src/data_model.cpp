#include "aplm/data_model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace aplm {

int ClusteredDataset::max_cluster_size() const {
  int m = 0;
  for (const auto& c : clusters) m = std::max(m, c.size());
  return m;
}

ClusteredDataset assemble_dataset(const std::vector<Record>& records) {
  if (records.empty()) throw DataError("empty input: no data rows");

  const std::size_t d1 = records.front().x.size();
  const std::size_t d2 = records.front().z.size();
  const bool has_time = records.front().time.has_value();

  std::unordered_map<std::string, int> index;
  std::vector<std::vector<const Record*>> groups;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const Record& rec = records[r];
    if (rec.x.size() != d1 || rec.z.size() != d2)
      throw DataError("ragged row " + std::to_string(r + 1) +
                      ": inconsistent covariate counts");
    if (rec.time.has_value() != has_time)
      throw DataError("ragged row " + std::to_string(r + 1) +
                      ": time column present in some rows only");
    auto [it, inserted] = index.try_emplace(rec.subject, static_cast<int>(groups.size()));
    if (inserted) groups.emplace_back();
    groups[static_cast<std::size_t>(it->second)].push_back(&rec);
  }

  ClusteredDataset data;
  data.d1 = static_cast<int>(d1);
  data.d2 = static_cast<int>(d2);
  data.n = static_cast<int>(groups.size());
  data.clusters.reserve(groups.size());
  for (const auto& g : groups) {
    const int m = static_cast<int>(g.size());
    Cluster c;
    c.y.resize(m);
    c.x.resize(m, static_cast<int>(d1));
    c.z.resize(m, static_cast<int>(d2));
    if (has_time) c.times = Eigen::VectorXd(m);
    for (int j = 0; j < m; ++j) {
      c.y(j) = g[static_cast<std::size_t>(j)]->y;
      for (std::size_t k = 0; k < d1; ++k) c.x(j, static_cast<int>(k)) = g[static_cast<std::size_t>(j)]->x[k];
      for (std::size_t l = 0; l < d2; ++l) c.z(j, static_cast<int>(l)) = g[static_cast<std::size_t>(j)]->z[l];
      if (has_time) (*c.times)(j) = *g[static_cast<std::size_t>(j)]->time;
    }
    data.n_total += m;
    data.clusters.push_back(std::move(c));
  }
  return data;
}

std::pair<ClusteredDataset, CenteringRecord> center_x(const ClusteredDataset& data) {
  CenteringRecord record;
  record.x_means = Eigen::VectorXd::Zero(data.d1);
  for (const auto& c : data.clusters) record.x_means += c.x.colwise().sum().transpose();
  if (data.n_total > 0) record.x_means /= static_cast<double>(data.n_total);

  ClusteredDataset out = data;
  for (auto& c : out.clusters) c.x.rowwise() -= record.x_means.transpose();
  return {std::move(out), std::move(record)};
}

std::pair<ClusteredDataset, std::vector<std::pair<double, double>>> rescale_z(
    const ClusteredDataset& data) {
  std::vector<std::pair<double, double>> ranges(static_cast<std::size_t>(data.d2));
  for (int l = 0; l < data.d2; ++l) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& c : data.clusters) {
      lo = std::min(lo, c.z.col(l).minCoeff());
      hi = std::max(hi, c.z.col(l).maxCoeff());
    }
    if (!(hi > lo))
      throw DataError("degenerate nonparametric covariate z" + std::to_string(l + 1) +
                      ": constant column cannot be rescaled");
    ranges[static_cast<std::size_t>(l)] = {lo, hi};
  }

  ClusteredDataset out = data;
  for (auto& c : out.clusters)
    for (int l = 0; l < data.d2; ++l) {
      const auto [lo, hi] = ranges[static_cast<std::size_t>(l)];
      c.z.col(l) = (c.z.col(l).array() - lo) / (hi - lo);
    }
  return {std::move(out), std::move(ranges)};
}

Eigen::MatrixXd build_working_covariance(const WorkingCovarianceSpec& spec,
                                         const Cluster& cluster) {
  const int m = cluster.size();
  switch (spec.kind) {
    case CovKind::WI:
      return Eigen::MatrixXd::Identity(m, m);
    case CovKind::EX: {
      if (!(spec.alpha < 1.0) || !(1.0 + (m - 1) * spec.alpha > 0.0))
        throw DataError("EX correlation alpha outside (-1/(m-1), 1) for cluster size " +
                        std::to_string(m));
      Eigen::MatrixXd v = Eigen::MatrixXd::Constant(m, m, spec.alpha);
      v.diagonal().setOnes();
      return v;
    }
    case CovKind::AR1: {
      if (!(std::abs(spec.alpha) < 1.0))
        throw DataError("AR1 correlation alpha must satisfy |alpha| < 1");
      Eigen::MatrixXd v(m, m);
      for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k) v(j, k) = std::pow(spec.alpha, std::abs(j - k));
      return v;
    }
    case CovKind::RSM: {
      if (!cluster.times.has_value())
        throw DataError("RSM working covariance requires observation times");
      if (!(spec.rsm.tau2 > 0.0) || spec.rsm.nu2 < 0.0 || spec.rsm.omega2 < 0.0 ||
          spec.alpha < 0.0)
        throw DataError("RSM parameters must satisfy tau2 > 0, nu2 >= 0, omega2 >= 0, alpha >= 0");
      const Eigen::VectorXd& t = *cluster.times;
      Eigen::MatrixXd v(m, m);
      for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k)
          v(j, k) = spec.rsm.nu2 +
                    spec.rsm.omega2 * std::exp(-spec.alpha * std::abs(t(j) - t(k)));
      v.diagonal().array() += spec.rsm.tau2;
      return v;
    }
  }
  throw DataError("unknown covariance kind");
}

Eigen::MatrixXd build_working_correlation(const WorkingCovarianceSpec& spec,
                                          const Cluster& cluster) {
  Eigen::MatrixXd v = build_working_covariance(spec, cluster);
  const Eigen::VectorXd dinv = v.diagonal().array().sqrt().inverse();
  return dinv.asDiagonal() * v * dinv.asDiagonal();
}

Eigen::MatrixXd invert_covariance(const Eigen::MatrixXd& v) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v);
  if (es.info() != Eigen::Success)
    throw NumericError("eigenfactorization of working covariance failed");
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) throw NumericError("working covariance is not positive definite");
  if (hi / lo > 1e12)
    throw NumericError("working covariance is ill-conditioned (condition number > 1e12)");
  return es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

double estimate_alpha_moment(CovKind kind, const std::vector<Eigen::VectorXd>& residuals) {
  if (kind != CovKind::EX && kind != CovKind::AR1)
    throw DataError("moment estimator is defined for EX and AR1 structures only");
  double ss = 0.0;
  long nobs = 0;
  double cross = 0.0;
  long npairs = 0;
  int max_m = 1;
  for (const auto& e : residuals) {
    const int m = static_cast<int>(e.size());
    max_m = std::max(max_m, m);
    ss += e.squaredNorm();
    nobs += m;
    if (kind == CovKind::EX) {
      for (int j = 0; j < m; ++j)
        for (int k = j + 1; k < m; ++k) {
          cross += e(j) * e(k);
          ++npairs;
        }
    } else {
      for (int j = 0; j + 1 < m; ++j) {
        cross += e(j) * e(j + 1);
        ++npairs;
      }
    }
  }
  if (nobs == 0 || npairs == 0 || !(ss > 0.0)) return 0.0;
  double alpha = (cross / static_cast<double>(npairs)) / (ss / static_cast<double>(nobs));
  const double hi = 0.999;
  const double lo = kind == CovKind::EX && max_m > 1
                        ? -0.999 / static_cast<double>(max_m - 1)
                        : -0.999;
  return std::clamp(alpha, lo, hi);
}

ClusteredDataset select_x_columns(const ClusteredDataset& data, const std::vector<int>& cols) {
  ClusteredDataset out = data;
  out.d1 = static_cast<int>(cols.size());
  for (std::size_t i = 0; i < data.clusters.size(); ++i) {
    Eigen::MatrixXd x(data.clusters[i].size(), out.d1);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      if (cols[k] < 0 || cols[k] >= data.d1) throw DataError("x column index out of range");
      x.col(static_cast<int>(k)) = data.clusters[i].x.col(cols[k]);
    }
    out.clusters[i].x = std::move(x);
  }
  return out;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_number(const std::string& s, std::size_t line_no) {
  double value = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw DataError("line " + std::to_string(line_no) + ": cannot parse number '" + s + "'");
  return value;
}

}  // namespace

std::vector<Record> load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file: " + path);
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  const std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "subject" || header[1] != "y")
    throw DataError("header must start with 'subject,y': " + path);

  std::size_t pos = 2;
  std::size_t d1 = 0;
  while (pos < header.size() && header[pos] == "x" + std::to_string(d1 + 1)) {
    ++d1;
    ++pos;
  }
  std::size_t d2 = 0;
  while (pos < header.size() && header[pos] == "z" + std::to_string(d2 + 1)) {
    ++d2;
    ++pos;
  }
  bool has_time = false;
  if (pos < header.size() && header[pos] == "time") {
    has_time = true;
    ++pos;
  }
  if (pos != header.size())
    throw DataError("unexpected header column '" + header[pos] +
                    "'; expected subject,y,x1..x{d1},z1..z{d2}[,time]");
  if (d2 == 0) throw DataError("at least one z column is required");

  std::vector<Record> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    const std::size_t expected = 2 + d1 + d2 + (has_time ? 1 : 0);
    if (f.size() != expected)
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(expected) + " fields, got " + std::to_string(f.size()));
    Record rec;
    rec.subject = f[0];
    rec.y = parse_number(f[1], line_no);
    rec.x.reserve(d1);
    for (std::size_t k = 0; k < d1; ++k) rec.x.push_back(parse_number(f[2 + k], line_no));
    rec.z.reserve(d2);
    for (std::size_t l = 0; l < d2; ++l) rec.z.push_back(parse_number(f[2 + d1 + l], line_no));
    if (has_time) rec.time = parse_number(f[2 + d1 + d2], line_no);
    records.push_back(std::move(rec));
  }
  return records;
}

ClusteredDataset load_dataset_csv(const std::string& path) {
  return assemble_dataset(load_csv(path));
}

const char* cov_kind_name(CovKind kind) {
  switch (kind) {
    case CovKind::WI: return "wi";
    case CovKind::EX: return "ex";
    case CovKind::AR1: return "ar1";
    case CovKind::RSM: return "rsm";
  }
  return "?";
}

CovKind cov_kind_from_name(const std::string& name) {
  if (name == "wi") return CovKind::WI;
  if (name == "ex") return CovKind::EX;
  if (name == "ar1") return CovKind::AR1;
  if (name == "rsm") return CovKind::RSM;
  throw UsageError("unknown covariance kind '" + name + "' (expected wi|ex|ar1|rsm)");
}

}  // namespace aplm
