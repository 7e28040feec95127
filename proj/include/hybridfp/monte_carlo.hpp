#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "hybridfp/grid.hpp"
#include "hybridfp/system.hpp"

/// Particle oracle for the hybrid process: Euler-Maruyama flow, guard resets
/// tested after each move, Poisson resets by exact-exponential thinning at
/// the pre-move position.
///
/// Random streams: particles are grouped in fixed blocks of kBlockSize; block
/// j draws from std::mt19937_64 seeded with splitmix64(seed, j). Normals come
/// from boost::random::normal_distribution (ziggurat) and uniforms from
/// boost::random::uniform_01. Work is split across threads by whole blocks, so
/// results do not depend on the worker count.
namespace hybridfp::mc {

using Rng = std::mt19937_64;

inline constexpr std::size_t kBlockSize = 4096;

struct McParams {
  std::size_t n_particles = 100000;
  double dt = 1e-3;
  std::uint64_t rng_seed = 20240917;

  void validate() const;
};

struct Ensemble {
  std::vector<double> positions;
  std::uint64_t rng_seed = 0;
  double time = 0.0;
  /// Resets performed so far, summed over particles.
  std::uint64_t jump_count = 0;
  /// One generator per particle block.
  std::vector<Rng> streams;

  [[nodiscard]] std::size_t size() const { return positions.size(); }
};

/// SplitMix64 mix of (seed, stream) used to seed block generators.
[[nodiscard]] std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t stream);

using InitSampler = std::function<double(Rng&)>;

[[nodiscard]] InitSampler point_mass(double x0);
/// N(mean, sigma^2) conditioned on x < upper (rejection).
[[nodiscard]] InitSampler truncated_gaussian(double mean, double sigma, double upper);
[[nodiscard]] InitSampler gaussian_for(const HybridSystemSpec& spec, double mean, double sigma);

[[nodiscard]] Ensemble make_ensemble(const McParams& params, const InitSampler& sampler);

/// Advance every particle by dt.
void mc_step(Ensemble& e, const HybridSystemSpec& spec, double dt);
[[nodiscard]] Ensemble mc_step(const Ensemble& e, const HybridSystemSpec& spec, double dt);

/// Deterministic given the seed; snapshots at the nearest step boundaries.
[[nodiscard]] std::vector<Ensemble> run_ensemble(const McParams& params, const HybridSystemSpec& spec,
                                                 const InitSampler& sampler, double t_final,
                                                 std::span<const double> snapshot_times);

/// count per cell / (N dx); particles outside the grid are dropped.
[[nodiscard]] DensityField histogram_density(const Ensemble& e, const Grid& grid);

struct SampleStats {
  double mean = 0.0;
  double stderr_ = 0.0;  // standard error of the mean
};

[[nodiscard]] SampleStats mc_expectation(const Ensemble& e, const std::function<double(double)>& f);

/// Worker count from HYBRIDFP_THREADS, else hardware concurrency (at least 1).
[[nodiscard]] unsigned worker_count();

}  // namespace hybridfp::mc
