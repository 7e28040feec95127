#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hybridfp {

/// Square operator stored as a pentadiagonal band plus a sparse set of
/// off-band entries. The off-band entries must all share one row or one
/// column so that the operator is "band + rank one" and can be solved by
/// bordering. This is the shape of every discrete generator in the library:
/// the band carries the flux stencils and the border carries either the
/// Dirac reinjection row (density side) or the reset-target column
/// (observable side).
class BandedOperator {
 public:
  static constexpr std::size_t kHalfBandwidth = 2;

  struct Entry {
    std::size_t row;
    std::size_t col;
    double value;
  };

  BandedOperator() = default;
  explicit BandedOperator(std::size_t n);

  [[nodiscard]] std::size_t size() const { return n_; }

  void add(std::size_t row, std::size_t col, double value);
  [[nodiscard]] double at(std::size_t row, std::size_t col) const;

  [[nodiscard]] std::vector<double> apply(std::span<const double> x) const;
  [[nodiscard]] BandedOperator transposed() const;
  [[nodiscard]] std::vector<std::vector<double>> to_dense() const;

  /// alpha * I + beta * this
  [[nodiscard]] BandedOperator affine(double alpha, double beta) const;

  [[nodiscard]] std::span<const Entry> off_band() const { return off_band_; }
  [[nodiscard]] static bool in_band(std::size_t row, std::size_t col) {
    return (row > col ? row - col : col - row) <= kHalfBandwidth;
  }

 private:
  [[nodiscard]] double& band(std::size_t row, std::size_t col) {
    return band_[(col + kHalfBandwidth - row) * n_ + row];
  }
  [[nodiscard]] double band(std::size_t row, std::size_t col) const {
    return band_[(col + kHalfBandwidth - row) * n_ + row];
  }

  std::size_t n_ = 0;
  std::vector<double> band_;     // (2*kHalfBandwidth+1) diagonals of length n
  std::vector<Entry> off_band_;  // merged, one entry per (row, col)
};

/// LU factorization of a BandedOperator. The band is factored with LAPACK
/// (dgbtrf, partial pivoting); a rank-one border is folded in with the
/// Sherman-Morrison formula. Throws LinearSolveFailure when singular or
/// when the off-band entries are not rank one.
class BandedLu {
 public:
  explicit BandedLu(const BandedOperator& op);

  [[nodiscard]] std::vector<double> solve(std::span<const double> rhs) const;
  [[nodiscard]] std::size_t size() const { return n_; }

 private:
  void solve_band_in_place(std::vector<double>& x) const;

  std::size_t n_ = 0;
  std::vector<double> lu_;
  std::vector<int> pivots_;
  // Border: op = band + p q^T.
  bool has_border_ = false;
  std::vector<double> q_;
  std::vector<double> band_inv_p_;
  double denominator_ = 1.0;
};

}  // namespace hybridfp
