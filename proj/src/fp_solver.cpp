#include "hybridfp/fp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

#include "hybridfp/errors.hpp"

namespace hybridfp {

std::string_view to_string(Reconstruction r) {
  return r == Reconstruction::Muscl ? "muscl" : "godunov";
}

namespace fp {

namespace {

enum class RightEnd {
  ZeroDensity,   // artificial boundary, zero ghost
  GuardOutflow,  // guard with pure advective outflow, zero-gradient ghost
  GuardAbsorb,   // guard with diffusion, mirrored ghost (interface value 0)
};

RightEnd right_end(const HybridSystemSpec& spec) {
  if (!spec.guard) return RightEnd::ZeroDensity;
  return spec.diffusion_coefficient() > 0.0 ? RightEnd::GuardAbsorb : RightEnd::GuardOutflow;
}

/// Multiplier g such that the right ghost equals g * v_last.
double right_ghost_factor(RightEnd end) {
  switch (end) {
    case RightEnd::ZeroDensity:
      return 0.0;
    case RightEnd::GuardOutflow:
      return 1.0;
    case RightEnd::GuardAbsorb:
      return -1.0;
  }
  return 0.0;
}

void require_aligned(const Grid& grid, const HybridSystemSpec& spec) {
  if (!grid.is_aligned()) throw std::invalid_argument("fp solver needs a grid aligned to a and b");
  if (spec.guard && std::abs(grid.x_max() - *spec.guard) > 1e-9 * grid.dx()) {
    throw std::invalid_argument("fp solver: guard regimes need the grid to end at the guard");
  }
}

/// v padded with one ghost on each side.
std::vector<double> with_ghosts(std::span<const double> v, RightEnd end) {
  std::vector<double> ve(v.size() + 2, 0.0);
  std::copy(v.begin(), v.end(), ve.begin() + 1);
  ve.back() = right_ghost_factor(end) * v.back();
  return ve;
}

/// Limited slopes for the real cells, index-aligned with v.
std::vector<double> limited_slopes(const std::vector<double>& ve) {
  const std::size_t n = ve.size() - 2;
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = minmod(ve[i + 1] - ve[i], ve[i + 2] - ve[i + 1]);
  return s;
}

FluxField advective_flux(const DensityField& v, const Grid& grid, const HybridSystemSpec& spec,
                         bool limited) {
  const std::size_t n = grid.n_cells();
  if (v.values.size() != n) throw GridMismatch("density does not match grid");
  const RightEnd end = right_end(spec);
  const auto ve = with_ghosts(v.values, end);
  const auto slopes = limited ? limited_slopes(ve) : std::vector<double>(n, 0.0);
  auto slope = [&](std::size_t cell_ext) {  // ghosts carry no slope
    return (cell_ext == 0 || cell_ext == n + 1) ? 0.0 : slopes[cell_ext - 1];
  };

  FluxField flux{std::vector<double>(n + 1, 0.0)};
  for (std::size_t k = 0; k <= n; ++k) {
    const double x = eval_drift(spec, grid.interface(k));
    const double left = ve[k] + 0.5 * slope(k);
    const double right = ve[k + 1] - 0.5 * slope(k + 1);
    flux.values[k] = std::max(x, 0.0) * left + std::min(x, 0.0) * right;
  }
  // The absorbing guard pins the interface density to zero.
  if (end == RightEnd::GuardAbsorb) flux.values[n] = 0.0;
  return flux;
}

/// Diffusive flux including the boundary closures.
std::vector<double> closed_diffusive_flux(const DensityField& v, const Grid& grid,
                                          const HybridSystemSpec& spec) {
  const double H = spec.diffusion_coefficient();
  const std::size_t n = grid.n_cells();
  const auto ve = with_ghosts(v.values, right_end(spec));
  std::vector<double> flux(n + 1);
  for (std::size_t k = 0; k <= n; ++k) flux[k] = -H * (ve[k + 1] - ve[k]) / grid.dx();
  return flux;
}

/// Sparse linear combination of cell values.
using Weights = std::vector<std::pair<std::size_t, double>>;

}  // namespace

FpScheme FpScheme::defaults_for(JumpRegime regime, double dt) {
  FpScheme s;
  s.regime = regime;
  s.dt = dt;
  s.reconstruction = regime == JumpRegime::DeterministicFlowGuardJump ? Reconstruction::Muscl
                                                                      : Reconstruction::Godunov;
  return s;
}

void FpScheme::validate() const {
  if (!(dt >= 0.0)) throw std::invalid_argument("FpScheme: dt must be non-negative");
  if (!(newton_tol > 0.0)) throw std::invalid_argument("FpScheme: newton_tol must be positive");
  if (newton_max_iter < 1) throw std::invalid_argument("FpScheme: newton_max_iter must be >= 1");
}

SlopeSelection select_slopes(const DensityField& v, const Grid& grid, const HybridSystemSpec& spec) {
  if (v.values.size() != grid.n_cells()) throw GridMismatch("density does not match grid");
  const auto ve = with_ghosts(v.values, right_end(spec));
  SlopeSelection sel(grid.n_cells(), SlopeBranch::Zero);
  for (std::size_t i = 0; i < sel.size(); ++i) {
    const double back = ve[i + 1] - ve[i];
    const double fwd = ve[i + 2] - ve[i + 1];
    if (back * fwd <= 0.0) continue;
    sel[i] = std::abs(back) < std::abs(fwd) ? SlopeBranch::Backward : SlopeBranch::Forward;
  }
  return sel;
}

FluxField muscl_advective_flux(const DensityField& v, const Grid& grid, const HybridSystemSpec& spec) {
  return advective_flux(v, grid, spec, true);
}

FluxField godunov_advective_flux(const DensityField& v, const Grid& grid,
                                 const HybridSystemSpec& spec) {
  return advective_flux(v, grid, spec, false);
}

FluxField diffusive_flux(const DensityField& v, const Grid& grid, double H) {
  if (H < 0.0) throw std::invalid_argument("diffusive_flux: H must be non-negative");
  const std::size_t n = grid.n_cells();
  if (v.values.size() != n) throw GridMismatch("density does not match grid");
  FluxField flux{std::vector<double>(n + 1, 0.0)};
  for (std::size_t k = 1; k < n; ++k) flux.values[k] = -H * (v.values[k] - v.values[k - 1]) / grid.dx();
  return flux;
}

std::vector<double> apply_case1_reinjection(double flux_at_b, const Grid& grid) {
  std::vector<double> source(grid.n_cells(), 0.0);
  source[grid.index_of_a()] = flux_at_b / grid.dx();
  return source;
}

GuardClosure apply_case2_guard_bc(const DensityField& v, const Grid& grid, double H) {
  if (!(H > 0.0)) throw std::invalid_argument("apply_case2_guard_bc requires H > 0");
  if (v.values.size() != grid.n_cells()) throw GridMismatch("density does not match grid");
  GuardClosure c;
  const double last = v.values.back();
  c.ghost_value = -last;
  c.interface_value = 0.5 * (last + c.ghost_value);
  c.absorbed_flux = -H * (c.ghost_value - last) / grid.dx();
  c.last_row_coefficient = -2.0 * H / (grid.dx() * grid.dx());
  c.reinjection_coefficient = 2.0 * H / (grid.dx() * grid.dx());
  c.source = apply_case1_reinjection(c.absorbed_flux, grid);
  return c;
}

JumpTerms apply_case3_jump_terms(const DensityField& v, const Grid& grid, const RateFunction& rate) {
  const std::size_t n = grid.n_cells();
  if (v.values.size() != n) throw GridMismatch("density does not match grid");
  JumpTerms t{std::vector<double>(n), std::vector<double>(n, 0.0)};
  double jump_rate = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lambda = eval_rate(rate, grid.center(i));
    t.sink_diag[i] = -lambda;
    jump_rate += grid.dx() * lambda * v.values[i];
  }
  t.source[grid.index_of_a()] = jump_rate / grid.dx();
  return t;
}

FluxField probability_flux(const DensityField& v, const Grid& grid, const HybridSystemSpec& spec,
                           Reconstruction recon) {
  FluxField flux = recon == Reconstruction::Muscl ? muscl_advective_flux(v, grid, spec)
                                                  : godunov_advective_flux(v, grid, spec);
  const auto diffusive = closed_diffusive_flux(v, grid, spec);
  for (std::size_t k = 0; k < flux.values.size(); ++k) flux.values[k] += diffusive[k];
  return flux;
}

double guard_interface_value(const DensityField& v, const Grid& grid, const HybridSystemSpec& spec,
                             Reconstruction recon) {
  if (!spec.guard) throw std::invalid_argument("guard_interface_value: regime has no guard");
  const double H = spec.diffusion_coefficient();
  if (H > 0.0) return apply_case2_guard_bc(v, grid, H).interface_value;
  const auto ve = with_ghosts(v.values, RightEnd::GuardOutflow);
  const double s = recon == Reconstruction::Muscl ? limited_slopes(ve).back() : 0.0;
  return v.values.back() + 0.5 * s;
}

std::vector<double> adjoint_action(const DensityField& v, const Grid& grid,
                                   const HybridSystemSpec& spec, Reconstruction recon) {
  require_aligned(grid, spec);
  const std::size_t n = grid.n_cells();
  const auto flux = probability_flux(v, grid, spec, recon);
  std::vector<double> rate(n);
  for (std::size_t i = 0; i < n; ++i) rate[i] = -(flux.values[i + 1] - flux.values[i]) / grid.dx();
  if (spec.guard) {
    const auto source = apply_case1_reinjection(flux.values[n], grid);
    rate[grid.index_of_a()] += source[grid.index_of_a()];
  }
  if (spec.rate) {
    const auto jumps = apply_case3_jump_terms(v, grid, *spec.rate);
    for (std::size_t i = 0; i < n; ++i) rate[i] += jumps.sink_diag[i] * v.values[i] + jumps.source[i];
  }
  return rate;
}

BandedOperator assemble_adjoint(const Grid& grid, const HybridSystemSpec& spec, Reconstruction recon,
                                const SlopeSelection* slopes) {
  require_aligned(grid, spec);
  const std::size_t n = grid.n_cells();
  const double dx = grid.dx();
  const double H = spec.diffusion_coefficient();
  const RightEnd end = right_end(spec);
  const double ghost = right_ghost_factor(end);
  const bool limited = recon == Reconstruction::Muscl;
  if (limited && (slopes == nullptr || slopes->size() != n)) {
    throw std::invalid_argument("assemble_adjoint: MUSCL needs a frozen slope selection");
  }

  // Extended cell e in [0, n+1] as weights on real cells.
  auto value = [&](std::size_t e) -> Weights {
    if (e == 0) return {};
    if (e == n + 1) return ghost == 0.0 ? Weights{} : Weights{{n - 1, ghost}};
    return {{e - 1, 1.0}};
  };
  auto axpy = [](Weights& acc, const Weights& w, double scale) {
    for (const auto& [i, c] : w) acc.emplace_back(i, scale * c);
  };
  // Half the frozen slope of extended cell e, as weights.
  auto half_slope = [&](std::size_t e) -> Weights {
    Weights w;
    if (!limited || e == 0 || e == n + 1) return w;
    switch ((*slopes)[e - 1]) {
      case SlopeBranch::Zero:
        break;
      case SlopeBranch::Backward:
        axpy(w, value(e), 0.5);
        axpy(w, value(e - 1), -0.5);
        break;
      case SlopeBranch::Forward:
        axpy(w, value(e + 1), 0.5);
        axpy(w, value(e), -0.5);
        break;
    }
    return w;
  };

  BandedOperator op(n);
  const std::size_t ia = grid.index_of_a();
  for (std::size_t k = 0; k <= n; ++k) {
    Weights face;
    const double x = eval_drift(spec, grid.interface(k));
    const bool absorbing_guard = end == RightEnd::GuardAbsorb && k == n;
    if (!absorbing_guard) {
      if (x > 0.0) {
        axpy(face, value(k), x);
        axpy(face, half_slope(k), x);
      } else if (x < 0.0) {
        axpy(face, value(k + 1), x);
        axpy(face, half_slope(k + 1), -x);
      }
    }
    if (H > 0.0) {
      axpy(face, value(k + 1), -H / dx);
      axpy(face, value(k), H / dx);
    }
    for (const auto& [cell, w] : face) {
      if (k < n) op.add(k, cell, w / dx);
      if (k > 0) op.add(k - 1, cell, -w / dx);
      if (k == n && spec.guard) op.add(ia, cell, w / dx);
    }
  }
  if (spec.rate) {
    for (std::size_t j = 0; j < n; ++j) {
      const double lambda = eval_rate(*spec.rate, grid.center(j));
      if (lambda == 0.0) continue;
      op.add(j, j, -lambda);
      op.add(ia, j, lambda);
    }
  }
  return op;
}

DensityField implicit_step(const DensityField& v, const FpScheme& scheme, const Grid& grid,
                           const HybridSystemSpec& spec, StepReport* report) {
  scheme.validate();
  require_aligned(grid, spec);
  const std::size_t n = grid.n_cells();
  if (v.values.size() != n) throw GridMismatch("density does not match grid");

  DensityField next = v;
  next.time = v.time + scheme.dt;
  StepReport local;
  std::vector<double> residual(n);
  auto update_residual = [&] {
    const auto rate = adjoint_action(next, grid, spec, scheme.reconstruction);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      residual[i] = next.values[i] - v.values[i] - scheme.dt * rate[i];
      worst = std::max(worst, std::abs(residual[i]));
    }
    return worst;
  };

  local.residual = update_residual();
  while (!(local.residual <= scheme.newton_tol)) {
    if (local.newton_iterations >= scheme.newton_max_iter || !std::isfinite(local.residual)) {
      throw NewtonDiverged("implicit step at t=" + std::to_string(v.time) + ": residual " +
                           std::to_string(local.residual) + " after " +
                           std::to_string(local.newton_iterations) + " iterations");
    }
    SlopeSelection slopes;
    if (scheme.reconstruction == Reconstruction::Muscl) slopes = select_slopes(next, grid, spec);
    const auto jacobian =
        assemble_adjoint(grid, spec, scheme.reconstruction, &slopes).affine(1.0, -scheme.dt);
    const auto delta = BandedLu(jacobian).solve(residual);
    for (std::size_t i = 0; i < n; ++i) next.values[i] -= delta[i];
    ++local.newton_iterations;
    local.residual = update_residual();
  }

  const auto flux = probability_flux(next, grid, spec, scheme.reconstruction);
  local.leaked_left = -scheme.dt * flux.values.front();
  if (spec.guard) {
    local.guard_flux = flux.values.back();
  } else {
    local.leaked_right = scheme.dt * flux.values.back();
  }
  if (report) *report = local;
  return next;
}

std::size_t steps_for(double t, double dt) {
  if (t <= 0.0 || dt <= 0.0) return 0;
  return static_cast<std::size_t>(std::llround(t / dt));
}

Propagation propagate_with_audit(const DensityField& g, const FpScheme& scheme, const Grid& grid,
                                 const HybridSystemSpec& spec, double t_final,
                                 std::span<const double> snapshot_times,
                                 const StepObserver& observer) {
  if (t_final < 0.0) throw std::invalid_argument("propagate: t_final must be non-negative");
  if (!std::is_sorted(snapshot_times.begin(), snapshot_times.end())) {
    throw std::invalid_argument("propagate: snapshot times must be sorted");
  }
  for (double t : snapshot_times) {
    if (t < 0.0 || t > t_final + 1e-12) throw std::invalid_argument("propagate: snapshot outside [0, t_final]");
  }
  if (t_final > 0.0 && !(scheme.dt > 0.0)) throw std::invalid_argument("propagate: dt must be positive");

  const std::size_t n_steps = steps_for(t_final, scheme.dt);
  std::vector<std::size_t> snap_steps;
  snap_steps.reserve(snapshot_times.size());
  for (double t : snapshot_times) snap_steps.push_back(std::min(n_steps, steps_for(t, scheme.dt)));

  Propagation out;
  std::size_t next_snap = 0;
  double leaked = 0.0;
  auto take_snapshots = [&](const DensityField& field, std::size_t step) {
    while (next_snap < snap_steps.size() && snap_steps[next_snap] == step) {
      out.snapshots.push_back(field);
      out.leaked.push_back(leaked);
      ++next_snap;
    }
  };

  DensityField current = g;
  take_snapshots(current, 0);
  for (std::size_t step = 1; step <= n_steps; ++step) {
    StepReport report;
    current = implicit_step(current, scheme, grid, spec, &report);
    current.time = g.time + static_cast<double>(step) * scheme.dt;
    leaked += report.leaked_left + report.leaked_right;
    if (observer) observer(current, report, step);
    take_snapshots(current, step);
  }
  return out;
}

std::vector<DensityField> propagate(const DensityField& g, const FpScheme& scheme, const Grid& grid,
                                    const HybridSystemSpec& spec, double t_final,
                                    std::span<const double> snapshot_times) {
  return propagate_with_audit(g, scheme, grid, spec, t_final, snapshot_times).snapshots;
}

}  // namespace fp
}  // namespace hybridfp
