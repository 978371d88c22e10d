#include "refuge/analytics.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "refuge/errors.hpp"

namespace refuge {

double bifurcation_point(const ModelParams& params) {
  params.validate();
  return params.c * params.lambda / (1.0 + params.m * params.lambda);
}

ScalarField kernel_profile(const Grid& grid, const ModelParams& params) {
  params.validate();
  const double saturation = 1.0 + params.m * params.lambda;
  const bool nonlinear = params.variant == Variant::NonlinearDiffusion;
  // In the nonlinear case the lambda multiplying the diffusion and the decay
  // term cancel, leaving unit coefficients.
  const double shift = nonlinear ? 1.0 : params.lambda;
  const double source_scale = nonlinear ? 1.0 / saturation : params.lambda / saturation;

  const SparseOperator lap = neumann_laplacian(grid, Region::All);
  SparseMatrix helmholtz = -lap.matrix;
  for (int c = 0; c < grid.num_cells(); ++c) helmholtz.coeffRef(c, c) += shift;

  const Eigen::VectorXd rhs = predation_field(grid, params.b).values * source_scale;

  Eigen::SimplicialLDLT<SparseMatrix> solver(helmholtz);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("kernel Helmholtz factorization failed");
  }
  ScalarField alpha;
  alpha.support = Region::All;
  alpha.values = solver.solve(rhs);
  if (solver.info() != Eigen::Success || !alpha.values.allFinite()) {
    throw NumericalError("kernel Helmholtz solve failed");
  }
  const double residual = (helmholtz * alpha.values - rhs).lpNorm<Eigen::Infinity>();
  if (residual > 1e-8 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>())) {
    std::ostringstream msg;
    msg << "kernel Helmholtz solve inaccurate (residual " << residual << ")";
    throw NumericalError(msg.str());
  }
  if (alpha.values.minCoeff() <= 0.0) {
    throw NumericalError("kernel profile is not strictly positive");
  }
  return alpha;
}

namespace {

double slope_from_kernel(const Grid& grid, const ModelParams& params, const ScalarField& kernel) {
  const double area = grid.area(Region::Exterior);
  if (grid.num_exterior() == 0 || !(area > 0.0)) {
    throw GeometryError("predator region is empty");
  }
  const double saturation = 1.0 + params.m * params.lambda;
  return -params.c / (area * saturation * saturation) * integrate(grid, kernel, Region::Exterior);
}

} // namespace

double branch_slope(const Grid& grid, const ModelParams& params) {
  if (grid.num_exterior() == 0) throw GeometryError("predator region is empty");
  return slope_from_kernel(grid, params, kernel_profile(grid, params));
}

BifurcationData analyze_onset(const Grid& grid, const ModelParams& params) {
  if (grid.num_exterior() == 0) throw GeometryError("predator region is empty");
  BifurcationData data;
  data.mu_lambda = bifurcation_point(params);
  data.kernel_profile = kernel_profile(grid, params);
  data.slope_at_onset = slope_from_kernel(grid, params, data.kernel_profile);
  data.omega1_area = grid.area(Region::Exterior);
  const double saturation = 1.0 + params.m * params.lambda;
  data.nondegeneracy_integral =
      -2.0 * params.c / (saturation * saturation) * integrate(grid, data.kernel_profile, Region::Exterior);
  return data;
}

EigenEstimate v_block_eigenvalue(const Grid& grid, const ModelParams& params, double mu, double tol,
                                 int max_iters) {
  const int n = grid.num_exterior();
  if (n == 0) throw GeometryError("predator region is empty");

  EigenEstimate est;
  est.exterior_components = grid.exterior_components();
  if (est.exterior_components > 1) {
    std::ostringstream msg;
    msg << "predator region has " << est.exterior_components
        << " components; the zero Neumann eigenvalue is not simple";
    est.warning = msg.str();
  }

  const double offset = mu - bifurcation_point(params);
  const SparseOperator lap = neumann_laplacian(grid, Region::Exterior);
  SparseMatrix block = -lap.matrix;
  for (int k = 0; k < n; ++k) block.coeffRef(k, k) += offset;

  // Shift one unit below the smallest possible eigenvalue (offset, since -L
  // is positive semidefinite): block - shift I = -L + I is SPD.
  const double shift = offset - 1.0;
  SparseMatrix shifted = block;
  for (int k = 0; k < n; ++k) shifted.coeffRef(k, k) -= shift;
  Eigen::SimplicialLDLT<SparseMatrix> solver(shifted);
  if (solver.info() != Eigen::Success) throw NumericalError("shift-invert factorization failed");

  Eigen::VectorXd x(n);
  for (int k = 0; k < n; ++k) x[k] = 1.0 + 0.5 * std::cos(0.37 * k);
  x.normalize();

  double theta = x.dot(block * x);
  for (int it = 1; it <= max_iters; ++it) {
    Eigen::VectorXd y = solver.solve(x);
    x = y.normalized();
    const Eigen::VectorXd ax = block * x;
    theta = x.dot(ax);
    est.iterations = it;
    if ((ax - theta * x).norm() <= tol) break;
  }
  est.value = theta;
  // Fix the sign so the dominant component is positive.
  if (x.sum() < 0.0) x = -x;
  est.vector = x;
  return est;
}

} // namespace refuge
