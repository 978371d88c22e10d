#pragma once

#include <string>

#include <Eigen/Core>

#include "refuge/geometry.hpp"
#include "refuge/model.hpp"

namespace refuge {

/// Closed-form onset data for one parameter set and diffusion variant.
struct BifurcationData {
  double mu_lambda = 0.0;       ///< c lambda / (1 + m lambda)
  ScalarField kernel_profile;   ///< prey depletion shape alpha (per variant)
  double slope_at_onset = 0.0;  ///< d mu / d s at s = 0, always negative
  double omega1_area = 0.0;     ///< |Omega_1|
  /// Integral over Omega_1 of the predator component of the second
  /// derivative, -2c/(1+m lambda)^2 * alpha. Nonzero means the transversality
  /// condition behind the slope formula holds numerically.
  double nondegeneracy_integral = 0.0;
};

/// mu_lambda = c lambda / (1 + m lambda); identical for both variants.
double bifurcation_point(const ModelParams& params);

/// Neumann Helmholtz solve for the kernel shape:
///   nonlinear: (-L + I) alpha = b(x) / (1 + m lambda)
///   linear:    (-L + lambda I) alpha = b(x) lambda / (1 + m lambda)
/// Throws NumericalError if the factorization fails or the result is not
/// strictly positive.
ScalarField kernel_profile(const Grid& grid, const ModelParams& params);

/// -c / (|Omega_1| (1 + m lambda)^2) * integral over Omega_1 of the kernel.
double branch_slope(const Grid& grid, const ModelParams& params);

/// All of the above in one pass (one Helmholtz solve).
BifurcationData analyze_onset(const Grid& grid, const ModelParams& params);

struct EigenEstimate {
  double value = 0.0;
  Eigen::VectorXd vector; ///< compact exterior ordering, unit 2-norm
  int iterations = 0;
  int exterior_components = 1;
  std::string warning;    ///< non-empty when Omega_1 is disconnected
};

/// Smallest eigenvalue of -L_{Omega_1} + (mu - mu_lambda) I, the predator
/// block of the negated Jacobian at (lambda, 0). Shift-invert power iteration.
EigenEstimate v_block_eigenvalue(const Grid& grid, const ModelParams& params, double mu, double tol = 1e-10,
                                 int max_iters = 500);

} // namespace refuge
