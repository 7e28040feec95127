#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "hybridfp/system.hpp"

namespace hybridfp {

/// Uniform cell-centred finite-volume mesh.
///
/// Aligned grids are built around an anchor point b (the guard, or the rate
/// anchor when there is no guard): b sits exactly on interface
/// `interface_of_b` and the reset target a sits exactly on the centre of cell
/// `index_of_a`. Coordinates are computed relative to b so both alignments
/// hold to rounding.
class Grid {
 public:
  /// Unaligned grid over [x_min, x_max].
  static Grid uniform(double x_min, double x_max, std::size_t n_cells);

  /// Grid with dx close to dx_target such that b is an interface and a is a
  /// cell centre. Requires a < b. When x_max_target <= b the grid ends at b.
  static Grid aligned(double x_min_target, double x_max_target, double dx_target, double a,
                      double b);

  /// Aligned grid for a spec: [x_min, b] with a guard, [x_min, x_max] otherwise.
  static Grid for_system(const HybridSystemSpec& spec, double dx_target, double x_min_target,
                         double x_max_target);

  [[nodiscard]] std::size_t n_cells() const { return n_cells_; }
  [[nodiscard]] double dx() const { return dx_; }
  [[nodiscard]] double x_min() const { return interface(0); }
  [[nodiscard]] double x_max() const { return interface(n_cells_); }
  [[nodiscard]] double center(std::size_t i) const;
  [[nodiscard]] double interface(std::size_t k) const;
  [[nodiscard]] std::vector<double> centers() const;

  [[nodiscard]] bool is_aligned() const { return index_of_a_.has_value(); }
  /// Throw std::logic_error on unaligned grids.
  [[nodiscard]] std::size_t index_of_a() const;
  [[nodiscard]] std::size_t interface_of_b() const;

  /// Cell containing x, or nullopt outside [x_min, x_max).
  [[nodiscard]] std::optional<std::size_t> locate(double x) const;

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  Grid(double origin, double origin_interface, std::size_t n_cells, double dx)
      : origin_(origin), origin_interface_(origin_interface), n_cells_(n_cells), dx_(dx) {}

  double origin_;            // coordinate of interface origin_interface_
  double origin_interface_;  // fractional interface index of origin_
  std::size_t n_cells_;
  double dx_;
  std::optional<std::size_t> index_of_a_;
  std::optional<std::size_t> interface_of_b_;
};

/// Cell-averaged probability density.
struct DensityField {
  std::vector<double> values;
  double time = 0.0;
};

/// Observable sampled at cell centres (see koopman.hpp for the guard value).
struct ObservableField {
  std::vector<double> values;
  double time = 0.0;
};

/// dx * sum(values): midpoint quadrature of the density.
[[nodiscard]] double total_mass(const DensityField& field, const Grid& grid);

/// dx * sum(g_i u_i), the discrete pairing of a density with an observable.
[[nodiscard]] double pairing(std::span<const double> g, std::span<const double> u, double dx);

/// Cell averages of N(mean, sigma^2), renormalized to unit mass on the grid.
/// Throws DegenerateSupport if fewer than 3 cells carry mass above 1e-15.
[[nodiscard]] DensityField gaussian_init(const Grid& grid, double mean, double sigma);

/// Standard normal CDF, accurate in both tails.
[[nodiscard]] double normal_cdf(double z);

}  // namespace hybridfp
