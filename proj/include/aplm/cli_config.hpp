#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aplm/data_model.hpp"
#include "aplm/penalized_solver.hpp"

namespace aplm {

// Thrown to short-circuit parsing when help output was requested.
struct HelpRequested {
  std::string text;
};

struct RunConfig {
  std::string command;

  // io
  std::string data_path;
  std::string out_path;
  std::string curves_path;

  // model
  CovKind covariance = CovKind::WI;
  bool alpha_given = false;
  double alpha = 0.0;
  RsmParams rsm;
  bool with_time = false;
  int degree = 3;
  int knots = 4;

  // penalty / tuning
  PenaltyKind penalty = PenaltyKind::SCAD;
  double scad_a = 3.7;
  double epsilon = 1e-6;
  LambdaGrid grid;

  // simulation
  int sim_n = 100;
  int replicates = 100;
  std::uint64_t seed = 1;
  int threads = 1;

  // basis-dump
  int grid_points = 201;
};

// Parses argv-style arguments (without the program name). Validates flag
// combinations; defaults are the ones used throughout (q=3, N=4, a=3.7,
// epsilon=1e-6). Supports a flat key=value config file via --config, with
// command-line flags taking precedence. Throws UsageError on bad usage and
// HelpRequested for --help.
RunConfig parse_config(const std::vector<std::string>& args);

// Executes a parsed command; writes the declared outputs and prints a short
// summary to stdout. Returns the process exit code (0 on success).
int run_command(const RunConfig& config);

// Exit codes used by the executable.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

}  // namespace aplm
