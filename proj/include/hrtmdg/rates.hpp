#pragma once

#include <optional>
#include <span>
#include <vector>

#include "hrtmdg/types.hpp"

namespace hrtmdg {

/// Errors at or below this level are treated as exact reproduction.
inline constexpr Real kExactErrorThreshold = 1e-12;

/// Observed orders log(e_i / e_{i+1}) / log(h_i / h_{i+1}). A pair where
/// either error is below kExactErrorThreshold has no rate (exact case).
std::vector<std::optional<Real>> compute_rate(std::span<const Real> errors, std::span<const Real> hs);

}  // namespace hrtmdg
