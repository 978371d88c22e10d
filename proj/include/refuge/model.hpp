#pragma once

#include <string_view>

#include <Eigen/Core>

#include "refuge/geometry.hpp"

namespace refuge {

/// Prey dispersal law: density-dependent div(u grad u), or plain Laplacian.
enum class Variant : std::uint8_t { NonlinearDiffusion, LinearDiffusion };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);

/// Dimensionless parameters of the predator-prey system.
struct ModelParams {
  double lambda = 1.0; ///< prey growth / carrying scale
  double mu = 0.0;     ///< predator mortality (bifurcation parameter)
  double c = 1.0;      ///< conversion efficiency
  double m = 1.0;      ///< Holling-II saturation
  double b = 1.0;      ///< attack efficiency outside the refuge
  double d = 1.0;      ///< predator/prey diffusivity ratio (time stepping only)
  Variant variant = Variant::NonlinearDiffusion;

  /// Throws ParameterError unless lambda, c, b, d > 0 and mu, m >= 0.
  void validate() const;
};

/// Prey density on every cell, predator density on exterior cells (zero in
/// the refuge).
struct State {
  ScalarField u;
  ScalarField v;
};

/// Layout of the stacked unknown vector: u on all cells, then v on exterior
/// cells in compact order.
struct UnknownLayout {
  int num_u = 0;
  int num_v = 0;

  explicit UnknownLayout(const Grid& grid) : num_u(grid.num_cells()), num_v(grid.num_exterior()) {}
  int size() const { return num_u + num_v; }
};

Eigen::VectorXd pack(const Grid& grid, const State& state);
State unpack(const Grid& grid, const Eigen::VectorXd& x);

/// Smallest admissible value of 1 + m u.
inline constexpr double kMinResponseDenominator = 1e-12;

/// Residual/Jacobian assembler for one grid. Caches both Laplacians so that
/// repeated evaluations inside Newton stay cheap.
class SteadySystem {
public:
  explicit SteadySystem(Grid grid);

  const Grid& grid() const { return grid_; }
  UnknownLayout layout() const { return UnknownLayout(grid_); }
  const SparseOperator& laplacian_all() const { return lap_all_; }
  const SparseOperator& laplacian_exterior() const { return lap_ext_; }

  Eigen::VectorXd residual(const ModelParams& params, const Eigen::VectorXd& x) const;
  SparseMatrix jacobian(const ModelParams& params, const Eigen::VectorXd& x) const;

private:
  void check_denominator(const ModelParams& params, const Eigen::VectorXd& x) const;

  Grid grid_;
  SparseOperator lap_all_;
  SparseOperator lap_ext_;
  std::vector<int> ext_cells_;
};

/// Discrete div(u grad u) = (1/2) L (u^2) with the all-cell Neumann Laplacian.
ScalarField nonlinear_diffusion(const Grid& grid, const ScalarField& u);

/// Steady residual, stacked as (prey rows on all cells, predator rows on
/// exterior cells). Throws SingularResponseError if 1 + m u <= 1e-12.
Eigen::VectorXd residual(const Grid& grid, const ModelParams& params, const State& state);

/// Exact derivative of `residual` with respect to the stacked unknowns.
SparseOperator jacobian(const Grid& grid, const ModelParams& params, const State& state);

/// Derivative of the residual with respect to mu: (0, -v).
Eigen::VectorXd residual_mu_derivative(const Grid& grid, const State& state);

/// (u, v) = (lambda, 0); lambda = 0 gives the trivial state.
State semi_trivial_state(const Grid& grid, double lambda);

} // namespace refuge
