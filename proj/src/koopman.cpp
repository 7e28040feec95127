#include "hybridfp/koopman.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hybridfp/errors.hpp"
#include "hybridfp/fp_solver.hpp"

namespace hybridfp::koopman {

namespace {

/// How the density scheme closes the right end; mirrored here so the
/// observable stencil reads the same ghost.
struct RightClosure {
  bool guard = false;
  bool absorbing = false;  // guard with H > 0
  double ghost_factor = 0.0;
};

RightClosure right_closure(const HybridSystemSpec& spec) {
  RightClosure c;
  c.guard = spec.guard.has_value();
  c.absorbing = c.guard && spec.diffusion_coefficient() > 0.0;
  c.ghost_factor = !c.guard ? 0.0 : (c.absorbing ? -1.0 : 1.0);
  return c;
}

}  // namespace

GeneratorMatrix assemble_generator(const Grid& grid, const HybridSystemSpec& spec,
                                   const GeneratorOptions& options) {
  if (!grid.is_aligned()) throw std::invalid_argument("assemble_generator: grid must be aligned");
  const std::size_t n = grid.n_cells();
  const double dx = grid.dx();
  const double H = spec.diffusion_coefficient();
  const std::size_t ia = grid.index_of_a();
  const RightClosure right = right_closure(spec);
  const bool limited = options.reconstruction == Reconstruction::Muscl;
  if (limited && (options.frozen_slopes == nullptr || options.frozen_slopes->size() != n)) {
    throw std::invalid_argument("assemble_generator: MUSCL needs frozen slopes");
  }

  GeneratorMatrix gen;
  gen.op = BandedOperator(n);
  gen.jump_op = BandedOperator(n);
  gen.regime = spec.jump_regime;
  gen.dx = dx;
  if (right.guard) gen.guard_substitute = ia;

  // The observable difference across face f is u(right) - u(left). Beyond the
  // guard the right value is u(a); beyond an artificial end it is 0.
  auto add_difference = [&](std::size_t row, std::size_t face, double coeff) {
    if (coeff == 0.0) return;
    if (face < n) {
      gen.op.add(row, face, coeff);
    } else if (right.guard) {
      gen.op.add(row, ia, coeff);
    }
    if (face > 0) gen.op.add(row, face - 1, -coeff);
  };

  auto drift_at_face = [&](std::size_t f) {
    if (right.absorbing && f == n) return 0.0;  // no advective transport through an absorbing guard
    return eval_drift(spec, grid.interface(f));
  };

  for (std::size_t k = 0; k < n; ++k) {
    // X du/dx, upwinded toward where the mass goes: right face if X > 0 there,
    // left face if X < 0 there.
    const double x_right = drift_at_face(k + 1);
    const double x_left = drift_at_face(k);
    add_difference(k, k + 1, std::max(x_right, 0.0) / dx);
    add_difference(k, k, std::min(x_left, 0.0) / dx);

    // H d2u/dx2 as the difference of two face gradients.
    if (H > 0.0) {
      add_difference(k, k, -H / (dx * dx));
      if (k + 1 < n || !right.guard) {
        add_difference(k, k + 1, H / (dx * dx));
      } else {
        // Guard node sits half a cell beyond the last centre.
        add_difference(k, k + 1, 2.0 * H / (dx * dx));
      }
    }
    // Ghost value feeding back through the zero-gradient / mirrored ghost at
    // the right end (only touches the last cell).
    if (k + 1 == n && right.ghost_factor != 0.0) {
      const double x = drift_at_face(n);
      if (x < 0.0) add_difference(k, n, right.ghost_factor * x / dx);
    }
  }

  if (limited) {
    // Second-order correction: each face flux also reads half the limited
    // slope of its upwind cell; the slope depends on the neighbouring cells.
    const auto& slopes = *options.frozen_slopes;
    auto slope_sensitivity = [&](std::size_t cell, std::size_t k) -> double {
      // d(slope_cell) / d(v_k)
      switch (slopes[cell]) {
        case SlopeBranch::Zero:
          return 0.0;
        case SlopeBranch::Backward:
          return (cell == k ? 1.0 : 0.0) - (cell > 0 && cell - 1 == k ? 1.0 : 0.0);
        case SlopeBranch::Forward: {
          double next = 0.0;
          if (cell + 1 < n) next = cell + 1 == k ? 1.0 : 0.0;
          else next = k == cell ? right.ghost_factor : 0.0;
          return next - (cell == k ? 1.0 : 0.0);
        }
      }
      return 0.0;
    };
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t lo = k > 0 ? k - 1 : 0;
      const std::size_t hi = std::min(n - 1, k + 1);
      for (std::size_t cell = lo; cell <= hi; ++cell) {
        const double ds = slope_sensitivity(cell, k);
        if (ds == 0.0) continue;
        const double x_right = drift_at_face(cell + 1);
        const double x_left = drift_at_face(cell);
        if (x_right > 0.0) add_difference(k, cell + 1, 0.5 * x_right * ds / dx);
        if (x_left < 0.0) add_difference(k, cell, -0.5 * x_left * ds / dx);
      }
    }
  }

  if (spec.rate) {
    for (std::size_t k = 0; k < n; ++k) {
      const double lambda = eval_rate(*spec.rate, grid.center(k));
      if (lambda == 0.0) continue;
      gen.jump_op.add(k, ia, lambda);
      gen.jump_op.add(k, k, -lambda);
      gen.op.add(k, ia, lambda);
      gen.op.add(k, k, -lambda);
    }
  }
  return gen;
}

ObservableField sample_observable(const Grid& grid, const std::function<double(double)>& f) {
  ObservableField u;
  u.values.resize(grid.n_cells());
  for (std::size_t i = 0; i < grid.n_cells(); ++i) u.values[i] = f(grid.center(i));
  return u;
}

double guard_value(const ObservableField& u, const Grid& grid) {
  return u.values.at(grid.index_of_a());
}

double evaluate_at(const ObservableField& u, const Grid& grid, double x) {
  const std::size_t n = grid.n_cells();
  if (u.values.size() != n) throw GridMismatch("observable does not match grid");
  const double s = (x - grid.center(0)) / grid.dx();
  if (s <= 0.0) return u.values.front();
  if (s >= static_cast<double>(n - 1)) return u.values.back();
  const auto i = static_cast<std::size_t>(s);
  const double w = s - static_cast<double>(i);
  if (w == 0.0) return u.values[i];
  return (1.0 - w) * u.values[i] + w * u.values[i + 1];
}

ObservableField koopman_propagate(const ObservableField& f, const Grid& grid,
                                  const HybridSystemSpec& spec, double dt, double t_final,
                                  const GeneratorOptions& options) {
  if (!(dt > 0.0)) throw std::invalid_argument("koopman_propagate: dt must be positive");
  if (f.values.size() != grid.n_cells()) throw GridMismatch("observable does not match grid");
  const std::size_t n_steps = fp::steps_for(t_final, dt);
  ObservableField u = f;
  if (n_steps == 0) return u;
  const auto gen = assemble_generator(grid, spec, options);
  const BandedLu lu(gen.op.affine(1.0, -dt));
  for (std::size_t s = 0; s < n_steps; ++s) u.values = lu.solve(u.values);
  u.time = f.time + static_cast<double>(n_steps) * dt;
  return u;
}

ExpectationCheck expectation_check(const std::function<double(double)>& f, double x0, double t,
                                   const Grid& grid, const HybridSystemSpec& spec,
                                   const mc::McParams& mc_params) {
  if (!grid.locate(x0)) throw std::invalid_argument("expectation_check: x0 outside the grid");
  ExpectationCheck out;
  const auto u = koopman_propagate(sample_observable(grid, f), grid, spec, mc_params.dt, t);
  out.koopman_value = evaluate_at(u, grid, x0);

  const double times[] = {t};
  const auto ensembles = mc::run_ensemble(mc_params, spec, mc::point_mass(x0), t, times);
  const auto stats = mc::mc_expectation(ensembles.back(), f);
  out.mc_value = stats.mean;
  out.mc_stderr = stats.stderr_;
  return out;
}

}  // namespace hybridfp::koopman
