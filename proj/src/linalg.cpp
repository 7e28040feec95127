#include "hybridfp/linalg.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hybridfp/errors.hpp"

namespace hybridfp {

namespace {
constexpr std::size_t kDiagonals = 2 * BandedOperator::kHalfBandwidth + 1;
}

BandedOperator::BandedOperator(std::size_t n) : n_(n), band_(kDiagonals * n, 0.0) {}

void BandedOperator::add(std::size_t row, std::size_t col, double value) {
  if (row >= n_ || col >= n_) throw std::out_of_range("BandedOperator::add index");
  if (in_band(row, col)) {
    band(row, col) += value;
    return;
  }
  for (auto& e : off_band_) {
    if (e.row == row && e.col == col) {
      e.value += value;
      return;
    }
  }
  off_band_.push_back({row, col, value});
}

double BandedOperator::at(std::size_t row, std::size_t col) const {
  if (row >= n_ || col >= n_) throw std::out_of_range("BandedOperator::at index");
  if (in_band(row, col)) return band(row, col);
  for (const auto& e : off_band_) {
    if (e.row == row && e.col == col) return e.value;
  }
  return 0.0;
}

std::vector<double> BandedOperator::apply(std::span<const double> x) const {
  if (x.size() != n_) throw std::invalid_argument("BandedOperator::apply size mismatch");
  std::vector<double> y(n_, 0.0);
  const auto hb = static_cast<std::ptrdiff_t>(kHalfBandwidth);
  const auto n = static_cast<std::ptrdiff_t>(n_);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, i - hb); j <= std::min(n - 1, i + hb); ++j) {
      acc += band(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) * x[j];
    }
    y[i] = acc;
  }
  for (const auto& e : off_band_) y[e.row] += e.value * x[e.col];
  return y;
}

BandedOperator BandedOperator::transposed() const {
  BandedOperator t(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = (i > kHalfBandwidth ? i - kHalfBandwidth : 0);
         j <= std::min(n_ - 1, i + kHalfBandwidth); ++j) {
      t.band(j, i) = band(i, j);
    }
  }
  for (const auto& e : off_band_) t.off_band_.push_back({e.col, e.row, e.value});
  return t;
}

std::vector<std::vector<double>> BandedOperator::to_dense() const {
  std::vector<std::vector<double>> d(n_, std::vector<double>(n_, 0.0));
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = (i > kHalfBandwidth ? i - kHalfBandwidth : 0);
         j <= std::min(n_ - 1, i + kHalfBandwidth); ++j) {
      d[i][j] = band(i, j);
    }
  }
  for (const auto& e : off_band_) d[e.row][e.col] += e.value;
  return d;
}

BandedOperator BandedOperator::affine(double alpha, double beta) const {
  BandedOperator m = *this;
  for (double& v : m.band_) v *= beta;
  for (auto& e : m.off_band_) e.value *= beta;
  for (std::size_t i = 0; i < n_; ++i) m.band(i, i) += alpha;
  return m;
}

BandedLu::BandedLu(const BandedOperator& op) : n_(op.size()) {
  constexpr int kl = static_cast<int>(BandedOperator::kHalfBandwidth);
  constexpr int ku = kl;
  constexpr int ldab = 2 * kl + ku + 1;
  const int n = static_cast<int>(n_);
  lu_.assign(static_cast<std::size_t>(ldab) * n_, 0.0);
  pivots_.assign(n_, 0);
  for (int j = 0; j < n; ++j) {
    for (int i = std::max(0, j - ku); i <= std::min(n - 1, j + kl); ++i) {
      lu_[static_cast<std::size_t>(kl + ku + i - j + j * ldab)] =
          op.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
  }
  const int info = LAPACKE_dgbtrf(LAPACK_COL_MAJOR, n, n, kl, ku, lu_.data(), ldab, pivots_.data());
  if (info != 0) {
    throw LinearSolveFailure("banded LU failed (dgbtrf info=" + std::to_string(info) + ")");
  }

  const auto border = op.off_band();
  if (border.empty()) return;
  const bool same_row = std::all_of(border.begin(), border.end(),
                                    [&](const auto& e) { return e.row == border.front().row; });
  const bool same_col = std::all_of(border.begin(), border.end(),
                                    [&](const auto& e) { return e.col == border.front().col; });
  if (!same_row && !same_col) {
    throw LinearSolveFailure("off-band entries do not form a single row or column");
  }
  std::vector<double> p(n_, 0.0);
  q_.assign(n_, 0.0);
  if (same_row) {
    p[border.front().row] = 1.0;
    for (const auto& e : border) q_[e.col] = e.value;
  } else {
    q_[border.front().col] = 1.0;
    for (const auto& e : border) p[e.row] = e.value;
  }
  band_inv_p_ = std::move(p);
  solve_band_in_place(band_inv_p_);
  denominator_ = 1.0 + std::inner_product(q_.begin(), q_.end(), band_inv_p_.begin(), 0.0);
  if (!std::isfinite(denominator_) || std::abs(denominator_) < 1e-14) {
    throw LinearSolveFailure("bordered system is singular");
  }
  has_border_ = true;
}

void BandedLu::solve_band_in_place(std::vector<double>& x) const {
  constexpr int kl = static_cast<int>(BandedOperator::kHalfBandwidth);
  constexpr int ldab = 3 * kl + 1;
  const int info = LAPACKE_dgbtrs(LAPACK_COL_MAJOR, 'N', static_cast<int>(n_), kl, kl, 1, lu_.data(),
                                  ldab, pivots_.data(), x.data(), static_cast<int>(n_));
  if (info != 0) throw LinearSolveFailure("dgbtrs failed");
}

std::vector<double> BandedLu::solve(std::span<const double> rhs) const {
  if (rhs.size() != n_) throw std::invalid_argument("BandedLu::solve size mismatch");
  std::vector<double> x(rhs.begin(), rhs.end());
  solve_band_in_place(x);
  if (has_border_) {
    const double scale = std::inner_product(q_.begin(), q_.end(), x.begin(), 0.0) / denominator_;
    for (std::size_t i = 0; i < n_; ++i) x[i] -= scale * band_inv_p_[i];
  }
  return x;
}

}  // namespace hybridfp
