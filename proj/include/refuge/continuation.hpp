#pragma once

#include <string>
#include <vector>

#include "refuge/analytics.hpp"
#include "refuge/geometry.hpp"
#include "refuge/model.hpp"
#include "refuge/newton.hpp"

namespace refuge {

struct ContinuationOptions {
  double seed_offset = 1e-3;     ///< first point at mu_lambda * (1 - seed_offset)
  double initial_step = 1e-3;    ///< first arclength step, in units of mu_lambda
  double min_step = 1e-6;        ///< step floor, in units of mu_lambda
  double max_step = 2e-2;        ///< step ceiling, in units of mu_lambda
  int fast_iterations = 3;       ///< corrector iterations at or below which the step doubles
  double mu_min = 1e-3;          ///< stop once the branch reaches this mortality
  int max_points = 5000;
  NewtonOptions newton;

  void validate() const;
};

/// One converged positive steady state on the branch.
struct BranchPoint {
  double mu = 0.0;
  State state;
  double avg_v = 0.0; ///< mean predator density over Omega_1
  double max_v = 0.0;
  double min_u = 0.0;
  int newton_iters = 0;
};

struct Branch {
  Variant variant = Variant::NonlinearDiffusion;
  ModelParams params;               ///< mu holds the onset value
  std::vector<BranchPoint> points;  ///< strictly decreasing mu
  BifurcationData onset;
  double seed_s = 0.0;              ///< branch parameter used for the first guess
  bool truncated = false;
  std::string diagnostic;           ///< why the trace stopped early, if it did
};

BranchPoint make_branch_point(const Grid& grid, double mu, const State& state, int newton_iters);

/// Pseudo-arclength trace of the positive branch from just below mu_lambda
/// down to `mu_min`. Corrector failures shrink the step; a failure at the
/// step floor truncates the branch and records a diagnostic instead of
/// throwing.
Branch trace_branch(const Grid& grid, const ModelParams& params, double mu_min, const ContinuationOptions& opts = {});

/// Least-squares line through (avg_v, mu) of the first three points,
/// evaluated at avg_v = 0. Throws EstimationError for fewer than 3 points.
double detect_onset(const Branch& branch);

/// Least-squares slope d mu / d avg_v over the first `count` points.
double onset_secant_slope(const Branch& branch, int count = 5);

/// avg_v at `mu` by linear interpolation between neighbouring points.
/// Throws EstimationError if `mu` is outside the traced range.
double interpolate_avg_v(const Branch& branch, double mu);

/// Converged branch state at exactly `mu`: interpolates the bracketing
/// points and polishes with Newton at fixed mu.
std::pair<State, NewtonReport> branch_state_at(const Grid& grid, const Branch& branch, double mu,
                                               const NewtonOptions& opts = {});

struct ComparisonRow {
  double mu = 0.0;
  double avg_v_nonlinear = 0.0;
  double avg_v_linear = 0.0;
  double ratio = 0.0; ///< nonlinear / linear
};

/// Both branches interpolated on a common, decreasing mu grid spanning their
/// overlap. Throws EstimationError when the ranges are disjoint.
std::vector<ComparisonRow> compare_branches(const Branch& nonlinear, const Branch& linear, int samples = 64);

} // namespace refuge
