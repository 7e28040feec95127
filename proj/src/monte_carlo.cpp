#include "hybridfp/monte_carlo.hpp"

#include <algorithm>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>

#include "hybridfp/fp_solver.hpp"

namespace hybridfp::mc {

namespace {

std::size_t block_count(std::size_t n) { return (n + kBlockSize - 1) / kBlockSize; }

/// Run body(block) for every block, spread over the configured workers.
template <class Body>
void for_each_block(std::size_t n_blocks, Body&& body) {
  const unsigned workers = std::min<unsigned>(worker_count(), static_cast<unsigned>(n_blocks));
  if (workers <= 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) body(b);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t b = w; b < n_blocks; b += workers) body(b);
    });
  }
}

}  // namespace

void McParams::validate() const {
  if (n_particles < 1) throw std::invalid_argument("McParams: n_particles must be >= 1");
  if (!(dt > 0.0) || dt > 1e-2) throw std::invalid_argument("McParams: dt must lie in (0, 1e-2]");
}

std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

unsigned worker_count() {
  if (const char* env = std::getenv("HYBRIDFP_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

InitSampler point_mass(double x0) {
  return [x0](Rng&) { return x0; };
}

InitSampler truncated_gaussian(double mean, double sigma, double upper) {
  if (!(sigma > 0.0)) throw std::invalid_argument("truncated_gaussian: sigma must be positive");
  if (!(upper > mean - 6.0 * sigma)) throw std::invalid_argument("truncated_gaussian: bound too tight");
  return [=](Rng& rng) {
    boost::random::normal_distribution<double> normal(mean, sigma);
    for (;;) {
      const double x = normal(rng);
      if (x < upper) return x;
    }
  };
}

InitSampler gaussian_for(const HybridSystemSpec& spec, double mean, double sigma) {
  return truncated_gaussian(mean, sigma, spec.guard.value_or(std::numeric_limits<double>::infinity()));
}

Ensemble make_ensemble(const McParams& params, const InitSampler& sampler) {
  params.validate();
  Ensemble e;
  e.rng_seed = params.rng_seed;
  e.positions.resize(params.n_particles);
  const std::size_t n_blocks = block_count(params.n_particles);
  e.streams.reserve(n_blocks);
  for (std::size_t b = 0; b < n_blocks; ++b) e.streams.emplace_back(derive_stream_seed(params.rng_seed, b));
  for_each_block(n_blocks, [&](std::size_t b) {
    const std::size_t end = std::min(params.n_particles, (b + 1) * kBlockSize);
    for (std::size_t i = b * kBlockSize; i < end; ++i) e.positions[i] = sampler(e.streams[b]);
  });
  return e;
}

void mc_step(Ensemble& e, const HybridSystemSpec& spec, double dt) {
  const std::size_t n = e.positions.size();
  const std::size_t n_blocks = block_count(n);
  if (e.streams.size() != n_blocks) throw std::invalid_argument("mc_step: ensemble streams do not match size");
  const double noise = spec.diffusion_h * std::sqrt(dt);
  const double a = spec.reset_target;
  std::vector<std::uint64_t> jumps(n_blocks, 0);

  for_each_block(n_blocks, [&](std::size_t b) {
    Rng& rng = e.streams[b];
    boost::random::normal_distribution<double> normal;
    boost::random::uniform_01<double> uniform;
    std::uint64_t block_jumps = 0;
    const std::size_t end = std::min(n, (b + 1) * kBlockSize);
    for (std::size_t i = b * kBlockSize; i < end; ++i) {
      double x = e.positions[i];
      if (spec.rate) {
        const double lambda = eval_rate(*spec.rate, x);
        if (lambda > 0.0 && uniform(rng) < -std::expm1(-lambda * dt)) {
          e.positions[i] = a;
          ++block_jumps;
          continue;
        }
      }
      x += eval_drift(spec, x) * dt;
      if (noise > 0.0) x += noise * normal(rng);
      if (spec.guard && x >= *spec.guard) {
        x = a;
        ++block_jumps;
      }
      e.positions[i] = x;
    }
    jumps[b] = block_jumps;
  });
  for (auto j : jumps) e.jump_count += j;
  e.time += dt;
}

Ensemble mc_step(const Ensemble& e, const HybridSystemSpec& spec, double dt) {
  Ensemble next = e;
  mc_step(next, spec, dt);
  return next;
}

std::vector<Ensemble> run_ensemble(const McParams& params, const HybridSystemSpec& spec,
                                   const InitSampler& sampler, double t_final,
                                   std::span<const double> snapshot_times) {
  params.validate();
  if (!std::is_sorted(snapshot_times.begin(), snapshot_times.end())) {
    throw std::invalid_argument("run_ensemble: snapshot times must be sorted");
  }
  const std::size_t n_steps = fp::steps_for(t_final, params.dt);
  std::vector<std::size_t> snap_steps;
  for (double t : snapshot_times) snap_steps.push_back(std::min(n_steps, fp::steps_for(t, params.dt)));

  std::vector<Ensemble> out;
  std::size_t next = 0;
  Ensemble e = make_ensemble(params, sampler);
  auto take = [&](std::size_t step) {
    while (next < snap_steps.size() && snap_steps[next] == step) {
      out.push_back(e);
      ++next;
    }
  };
  take(0);
  for (std::size_t step = 1; step <= n_steps && next < snap_steps.size(); ++step) {
    mc_step(e, spec, params.dt);
    e.time = static_cast<double>(step) * params.dt;
    take(step);
  }
  return out;
}

DensityField histogram_density(const Ensemble& e, const Grid& grid) {
  if (e.positions.empty()) throw std::invalid_argument("histogram_density: empty ensemble");
  DensityField field;
  field.values.assign(grid.n_cells(), 0.0);
  field.time = e.time;
  for (double x : e.positions) {
    if (auto cell = grid.locate(x)) field.values[*cell] += 1.0;
  }
  const double scale = 1.0 / (static_cast<double>(e.positions.size()) * grid.dx());
  for (double& v : field.values) v *= scale;
  return field;
}

SampleStats mc_expectation(const Ensemble& e, const std::function<double(double)>& f) {
  const std::size_t n = e.positions.size();
  if (n < 2) throw std::invalid_argument("mc_expectation: needs at least two particles");
  // Shift by the first sample so constant observables give exactly zero spread.
  const double shift = f(e.positions.front());
  double sum = 0.0;
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = f(e.positions[i]) - shift;
    sum += d[i];
  }
  const double mean_d = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double di : d) ss += (di - mean_d) * (di - mean_d);
  SampleStats s;
  s.mean = shift + mean_d;
  s.stderr_ = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
  return s;
}

}  // namespace hybridfp::mc
