#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "hrtmdg/global.hpp"

namespace hrtmdg {

inline constexpr int kReportSchemaVersion = 1;

struct ProbeResult {
  std::string name;
  bool passed = false;
  nlohmann::json details;
};

struct VerifyOptions {
  std::uint64_t seed = 42;
  SolverOptions solver;
  /// Test hook forwarded to assembly of every solve in the suite.
  bool inject_multiplier_sign_error = false;
};

/// Runs every probe at fixed desk-scale parameters:
///   condensation, polynomial_exactness, consistency, conservation, flux_jump,
///   form_identity, lifting, stability, projection_rates, projected_error_bound.
/// Deterministic for a given seed.
std::vector<ProbeResult> run_verify_suite(const VerifyOptions& options = {});

/// {"schema_version", "seed", "passed", "probes": [{name, passed, ...}]}.
nlohmann::json verify_report(const std::vector<ProbeResult>& probes, const VerifyOptions& options);

}  // namespace hrtmdg
