#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "aplm/estimator.hpp"
#include "aplm/simulation.hpp"

namespace aplm {

// Structured result document. Keys are kept sorted and numbers are emitted in
// shortest round-trip form, so identical runs serialize byte-identically and
// parsing recovers the exact values.
struct Report {
  nlohmann::json body;

  static constexpr int kSchemaVersion = 1;
  static Report make(const std::string& command);
  std::string to_string() const;
};

bool operator==(const Report& a, const Report& b);

void write_report(const Report& report, const std::string& path);
Report read_report(const std::string& path);

// Curve export: 201-point grid on [0,1] by default, columns z,eta_1..eta_d2.
void write_curves_csv(const std::string& path, const std::vector<CenteredCurve>& curves,
                      int points = 201);

struct SimTableRow {
  int n = 0;
  std::string penalty;
  std::string covariance;
  MetricsRow metrics;
};

// Table 1 layout: n,penalty,covariance,C,I,MRME,RMSE.
void write_table1_csv(const std::string& path, const std::vector<SimTableRow>& rows);

struct SdTableRow {
  int n = 0;
  std::string penalty;
  std::string covariance;
  std::string coefficient;
  SdRow sd;
};

// Table 2 layout: n,penalty,covariance,coefficient,SD,SD_m,SD_mad.
void write_table2_csv(const std::string& path, const std::vector<SdTableRow>& rows);

// Basis values on a uniform grid, columns z,b1..b{J_n}.
void write_basis_csv(const std::string& path, const SplineSpace& space, int points);

}  // namespace aplm
