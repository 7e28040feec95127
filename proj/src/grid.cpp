#include "hybridfp/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "hybridfp/errors.hpp"

namespace hybridfp {

Grid Grid::uniform(double x_min, double x_max, std::size_t n_cells) {
  if (n_cells == 0 || !(x_max > x_min)) throw std::invalid_argument("Grid::uniform: empty domain");
  return Grid(x_min, 0.0, n_cells, (x_max - x_min) / static_cast<double>(n_cells));
}

Grid Grid::aligned(double x_min_target, double x_max_target, double dx_target, double a, double b) {
  if (!(dx_target > 0.0)) throw std::invalid_argument("Grid::aligned: dx must be positive");
  if (!(a < b)) throw std::invalid_argument("Grid::aligned: requires a < b");
  if (!(x_min_target < a)) throw std::invalid_argument("Grid::aligned: x_min must lie below a");

  // (b - a) must be a half-integer number of cells.
  const double half_cells = std::max(0.0, std::round((b - a) / dx_target - 0.5));
  const double dx = (b - a) / (half_cells + 0.5);
  constexpr double kSlack = 1e-9;
  const auto n_left = static_cast<std::size_t>(std::ceil((b - x_min_target) / dx - kSlack));
  std::size_t n_right = 0;
  if (x_max_target > b) n_right = static_cast<std::size_t>(std::ceil((x_max_target - b) / dx - kSlack));

  Grid g(b, static_cast<double>(n_left), n_left + n_right, dx);
  g.interface_of_b_ = n_left;
  g.index_of_a_ = n_left - static_cast<std::size_t>(half_cells) - 1;
  return g;
}

Grid Grid::for_system(const HybridSystemSpec& spec, double dx_target, double x_min_target,
                      double x_max_target) {
  if (spec.guard) return aligned(x_min_target, *spec.guard, dx_target, spec.reset_target, *spec.guard);
  if (!spec.rate) throw std::invalid_argument("Grid::for_system: spec has neither guard nor rate");
  return aligned(x_min_target, x_max_target, dx_target, spec.reset_target, spec.rate->anchor);
}

double Grid::interface(std::size_t k) const {
  return origin_ + (static_cast<double>(k) - origin_interface_) * dx_;
}

double Grid::center(std::size_t i) const {
  return origin_ + (static_cast<double>(i) + 0.5 - origin_interface_) * dx_;
}

std::vector<double> Grid::centers() const {
  std::vector<double> xs(n_cells_);
  for (std::size_t i = 0; i < n_cells_; ++i) xs[i] = center(i);
  return xs;
}

std::size_t Grid::index_of_a() const {
  if (!index_of_a_) throw std::logic_error("grid is not aligned to a reset target");
  return *index_of_a_;
}

std::size_t Grid::interface_of_b() const {
  if (!interface_of_b_) throw std::logic_error("grid is not aligned to a guard");
  return *interface_of_b_;
}

std::optional<std::size_t> Grid::locate(double x) const {
  const double s = (x - x_min()) / dx_;
  if (!(s >= 0.0) || s >= static_cast<double>(n_cells_)) return std::nullopt;
  return static_cast<std::size_t>(s);
}

double total_mass(const DensityField& field, const Grid& grid) {
  return grid.dx() * std::accumulate(field.values.begin(), field.values.end(), 0.0);
}

double pairing(std::span<const double> g, std::span<const double> u, double dx) {
  if (g.size() != u.size()) throw GridMismatch("pairing: length mismatch");
  return dx * std::inner_product(g.begin(), g.end(), u.begin(), 0.0);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

DensityField gaussian_init(const Grid& grid, double mean, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_init: sigma must be positive");
  const std::size_t n = grid.n_cells();
  DensityField field;
  field.values.resize(n);
  std::size_t carrying = 0;
  double mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = (grid.interface(i) - mean) / sigma;
    const double hi = (grid.interface(i + 1) - mean) / sigma;
    // Difference the tail that keeps both CDF values small to avoid cancellation.
    const double p = hi <= 0.0 ? normal_cdf(hi) - normal_cdf(lo) : normal_cdf(-lo) - normal_cdf(-hi);
    field.values[i] = p / grid.dx();
    mass += p;
    if (p > 1e-15) ++carrying;
  }
  if (carrying < 3) throw DegenerateSupport("gaussian_init: fewer than 3 cells carry mass");
  for (double& v : field.values) v /= mass;
  // Absorb the last rounding ulp so the midpoint sum is as close to 1 as possible.
  const double residual = 1.0 - total_mass(field, grid);
  auto peak = std::max_element(field.values.begin(), field.values.end());
  *peak += residual / grid.dx();
  return field;
}

}  // namespace hybridfp
