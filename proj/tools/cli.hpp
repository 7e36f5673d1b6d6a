#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hrtmdg/global.hpp"
#include "hrtmdg/mms.hpp"

namespace hrtmdg::cli {

enum ExitCode : int { kOk = 0, kConfig = 2, kSolver = 3, kVerifyFailed = 4 };

struct RunConfig {
  std::string command = "solve";
  std::vector<int> k;
  std::vector<Real> kappa;
  std::vector<int> mesh_n;
  std::optional<std::filesystem::path> mesh_file;
  CaseSpec case_spec;
  SolverOptions solver;
  int quad_degree = -1;
  std::filesystem::path out_dir = "hrtmdg-out";
  std::uint64_t seed = 42;
  std::optional<std::filesystem::path> dump_matrix;
  bool inject_sign_error = false;
};

/// Parses and validates the command line. Raises ConfigError naming the
/// offending field; `--help` prints usage and returns nullopt.
std::optional<RunConfig> parse_args(int argc, const char* const* argv, std::ostream& out);

int run_solve(const RunConfig& config, std::ostream& log);
int run_convergence(const RunConfig& config, std::ostream& log);
int run_verify(const RunConfig& config, std::ostream& log);

/// Full entry point: parse, dispatch and map errors to exit codes.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hrtmdg::cli
