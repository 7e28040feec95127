#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace hybridfp {

/// Interface reconstruction used by the advective flux.
enum class Reconstruction {
  Godunov,  // piecewise constant, first-order upwind
  Muscl,    // piecewise linear with minmod-limited slopes
};

std::string_view to_string(Reconstruction r);

/// Which one-sided difference the minmod limiter picked in a cell. Freezing a
/// selection turns the MUSCL flux into a linear operator.
enum class SlopeBranch : std::uint8_t { Zero, Backward, Forward };

using SlopeSelection = std::vector<SlopeBranch>;

/// sign(p) min(|p|, |q|) when p and q share a sign, else 0.
[[nodiscard]] constexpr double minmod(double p, double q) {
  if (p * q <= 0.0) return 0.0;
  if (p > 0.0) return p < q ? p : q;
  return p > q ? p : q;
}

}  // namespace hybridfp
