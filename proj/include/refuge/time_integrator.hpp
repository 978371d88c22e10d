#pragma once

#include <functional>
#include <memory>

#include "refuge/geometry.hpp"
#include "refuge/model.hpp"

namespace refuge {

struct TimeOptions {
  double dt = 1e-3;
  double t_max = 500.0;
  double steady_tol = 1e-8;  ///< max-norm of state change per unit time
  bool clamp_negative = true;

  void validate() const;
};

/// Fraction of clamped cell-steps above which a run is flagged.
inline constexpr double kClampFlagFraction = 1e-3;

struct StepStats {
  long clamped_cells = 0;
};

/// Linearly implicit (IMEX) stepper for the parabolic system. Diffusion is
/// implicit with the prey coefficient frozen at the old time level; the
/// reaction terms are explicit. The predator matrix I - dt d L_{Omega_1} is
/// factorized once per dt.
class TimeStepper {
public:
  TimeStepper(const Grid& grid, const ModelParams& params, double dt, bool clamp_negative = true);
  ~TimeStepper();
  TimeStepper(TimeStepper&&) noexcept;
  TimeStepper& operator=(TimeStepper&&) noexcept;

  /// Advances the packed state by one step in place.
  StepStats advance(Eigen::VectorXd& x);

  const Grid& grid() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// One step from `state`; refuge predator entries stay exactly zero.
State step(const Grid& grid, const ModelParams& params, const State& state, double dt, bool clamp_negative = true,
           StepStats* stats = nullptr);

struct EvolveResult {
  State state;
  bool steady = false;
  double t = 0.0;
  long steps = 0;
  long clamped_cell_steps = 0;
  double clamped_fraction = 0.0; ///< clamped cell-steps / (cells * steps)
  bool clamp_flagged = false;    ///< clamped_fraction above 0.1%
  double last_rate = 0.0;        ///< max-norm change per unit time of the final step
};

/// Called with (t, state, clamped_fraction_so_far) at t = 0, every
/// `snapshot_every` steps, and after the final step.
using SnapshotFn = std::function<void(double, const State&, double)>;

/// Integrates until the per-unit-time change drops below steady_tol or t_max
/// is reached. Timeouts are reported through `steady == false`.
EvolveResult evolve_to_steady(const Grid& grid, const ModelParams& params, const State& initial,
                              const TimeOptions& opts, const SnapshotFn& snapshot = {}, long snapshot_every = 0);

} // namespace refuge
