#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "refuge/geometry.hpp"
#include "refuge/model.hpp"

namespace refuge {

struct NewtonOptions {
  double tol_residual = 1e-10; ///< stop when max-norm of the residual is below this
  int max_iters = 50;
  double damping = 0.5;        ///< backtracking factor
  double min_step = 1e-8;      ///< smallest accepted step fraction

  void validate() const;
};

/// Max-norm threshold below which a field counts as identically zero.
inline constexpr double kZeroThreshold = 1e-8;

enum class SolutionClass : std::uint8_t { Trivial, SemiTrivial, Positive, Indefinite };

std::string_view to_string(SolutionClass c);

struct NewtonReport {
  bool converged = false;
  int iterations = 0;
  double final_residual_norm = 0.0;
  bool positivity = false; ///< u > 0 everywhere and v >= 0 on Omega_1
  SolutionClass classification = SolutionClass::Indefinite;
  std::vector<double> residual_history; ///< max-norm before each iteration, plus the final one
  std::string diagnostic;               ///< reason for non-convergence, negative-u notes
};

/// Classifies a state by thresholding (1e-8 in max norm).
SolutionClass classify(const Grid& grid, const ModelParams& params, const State& state, bool* positivity = nullptr);

/// Damped Newton iteration on the stacked unknowns with a sparse LU solve per
/// step. Never throws for singular Jacobians or singular responses; those end
/// the iteration with `converged == false` and a diagnostic.
std::pair<Eigen::VectorXd, NewtonReport> newton_solve(const SteadySystem& system, const ModelParams& params,
                                                      Eigen::VectorXd initial, const NewtonOptions& opts = {});

std::pair<State, NewtonReport> newton_solve(const Grid& grid, const ModelParams& params, const State& initial,
                                            const NewtonOptions& opts = {});

/// First-order branch state (u, v) = (lambda - s alpha, s) using the kernel
/// profile of the parameter variant. Throws GuessError if u <= 0 anywhere.
State initial_guess_on_branch(const Grid& grid, const ModelParams& params, double s);
State initial_guess_on_branch(const Grid& grid, const ModelParams& params, const ScalarField& kernel, double s);

} // namespace refuge
