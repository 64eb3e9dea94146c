#include "aplm/report.hpp"

#include <cstdio>
#include <fstream>

namespace aplm {

namespace {

// 17 significant digits round-trips any double.
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path);
  return out;
}

}  // namespace

Report Report::make(const std::string& command) {
  Report r;
  r.body["schema_version"] = kSchemaVersion;
  r.body["command"] = command;
  return r;
}

std::string Report::to_string() const { return body.dump(2) + "\n"; }

bool operator==(const Report& a, const Report& b) { return a.body == b.body; }

void write_report(const Report& report, const std::string& path) {
  std::ofstream out = open_out(path);
  out << report.to_string();
  if (!out) throw DataError("failed writing report: " + path);
}

Report read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open report file: " + path);
  Report r;
  try {
    in >> r.body;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed report " + path + ": " + e.what());
  }
  return r;
}

void write_curves_csv(const std::string& path, const std::vector<CenteredCurve>& curves,
                      int points) {
  std::ofstream out = open_out(path);
  out << "z";
  for (std::size_t l = 0; l < curves.size(); ++l) out << ",eta_" << l + 1;
  out << "\n";
  for (int g = 0; g < points; ++g) {
    const double z = static_cast<double>(g) / (points - 1);
    out << fmt(z);
    for (const auto& curve : curves) out << "," << fmt(curve(z));
    out << "\n";
  }
  if (!out) throw DataError("failed writing curves: " + path);
}

void write_table1_csv(const std::string& path, const std::vector<SimTableRow>& rows) {
  std::ofstream out = open_out(path);
  out << "n,penalty,covariance,C,I,MRME,RMSE\n";
  for (const auto& r : rows)
    out << r.n << "," << r.penalty << "," << r.covariance << "," << fmt(r.metrics.c) << ","
        << fmt(r.metrics.i) << "," << fmt(r.metrics.mrme) << "," << fmt(r.metrics.rmse) << "\n";
  if (!out) throw DataError("failed writing table: " + path);
}

void write_table2_csv(const std::string& path, const std::vector<SdTableRow>& rows) {
  std::ofstream out = open_out(path);
  out << "n,penalty,covariance,coefficient,SD,SD_m,SD_mad\n";
  for (const auto& r : rows)
    out << r.n << "," << r.penalty << "," << r.covariance << "," << r.coefficient << ","
        << fmt(r.sd.sd) << "," << fmt(r.sd.sd_m) << "," << fmt(r.sd.sd_mad) << "\n";
  if (!out) throw DataError("failed writing table: " + path);
}

void write_basis_csv(const std::string& path, const SplineSpace& space, int points) {
  std::ofstream out = open_out(path);
  out << "z";
  for (int s = 1; s <= space.dimension(); ++s) out << ",b" << s;
  out << "\n";
  for (int g = 0; g < points; ++g) {
    const double z = static_cast<double>(g) / (points - 1);
    const Eigen::VectorXd vals = eval_basis(space, z);
    out << fmt(z);
    for (int s = 0; s < vals.size(); ++s) out << "," << fmt(vals(s));
    out << "\n";
  }
  if (!out) throw DataError("failed writing basis dump: " + path);
}

}  // namespace aplm
