#include "refuge/model.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "refuge/errors.hpp"

namespace refuge {

std::string_view to_string(Variant v) {
  return v == Variant::NonlinearDiffusion ? "nonlinear" : "linear";
}

Variant parse_variant(std::string_view name) {
  if (name == "nonlinear") return Variant::NonlinearDiffusion;
  if (name == "linear") return Variant::LinearDiffusion;
  throw ParameterError("unknown diffusion variant '" + std::string(name) + "' (expected nonlinear|linear)");
}

void ModelParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ParameterError(what);
  };
  require(std::isfinite(lambda) && lambda > 0.0, "lambda must be positive");
  require(std::isfinite(mu) && mu >= 0.0, "mu must be non-negative");
  require(std::isfinite(c) && c > 0.0, "c must be positive");
  require(std::isfinite(m) && m >= 0.0, "m must be non-negative");
  require(std::isfinite(b) && b > 0.0, "b must be positive");
  require(std::isfinite(d) && d > 0.0, "d must be positive");
}

Eigen::VectorXd pack(const Grid& grid, const State& state) {
  const UnknownLayout layout(grid);
  Eigen::VectorXd x(layout.size());
  x.head(layout.num_u) = state.u.values;
  x.tail(layout.num_v) = gather_exterior(grid, state.v.values);
  return x;
}

State unpack(const Grid& grid, const Eigen::VectorXd& x) {
  const UnknownLayout layout(grid);
  State s;
  s.u.support = Region::All;
  s.u.values = x.head(layout.num_u);
  s.v.support = Region::Exterior;
  s.v.values = scatter_exterior(grid, x.tail(layout.num_v));
  return s;
}

namespace {

// Sum over faces of L_ij (w_j - w_i). Same as L w for a zero-row-sum L, but
// exactly zero on constants regardless of rounding in the diagonal.
Eigen::VectorXd flux_apply(const SparseMatrix& lap, const Eigen::VectorXd& w) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(w.size());
  for (int col = 0; col < lap.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(lap, col); it; ++it) {
      const auto row = it.row();
      if (row != col) out[row] += it.value() * (w[col] - w[row]);
    }
  }
  return out;
}

} // namespace

SteadySystem::SteadySystem(Grid grid)
    : grid_(std::move(grid)), lap_all_(neumann_laplacian(grid_, Region::All)),
      lap_ext_(neumann_laplacian(grid_, Region::Exterior)),
      ext_cells_(grid_.exterior_cells().begin(), grid_.exterior_cells().end()) {}

void SteadySystem::check_denominator(const ModelParams& params, const Eigen::VectorXd& x) const {
  const int nu = grid_.num_cells();
  for (int c = 0; c < nu; ++c) {
    const double den = 1.0 + params.m * x[c];
    if (!(den > kMinResponseDenominator)) {
      std::ostringstream msg;
      msg << "Holling-II denominator 1 + m*u = " << den << " at cell " << c;
      throw SingularResponseError(msg.str());
    }
  }
}

Eigen::VectorXd SteadySystem::residual(const ModelParams& params, const Eigen::VectorXd& x) const {
  check_denominator(params, x);
  const int nu = grid_.num_cells();
  const int nv = grid_.num_exterior();
  const auto u = x.head(nu);
  const auto v = x.tail(nv);

  Eigen::VectorXd r(nu + nv);
  if (params.variant == Variant::NonlinearDiffusion) {
    r.head(nu) = 0.5 * flux_apply(lap_all_.matrix, u.cwiseProduct(u));
  } else {
    r.head(nu) = flux_apply(lap_all_.matrix, u);
  }
  r.head(nu).array() += params.lambda * u.array() - u.array().square();
  r.tail(nv) = flux_apply(lap_ext_.matrix, v);

  for (int k = 0; k < nv; ++k) {
    const int c = ext_cells_[static_cast<std::size_t>(k)];
    const double response = u[c] * v[k] / (1.0 + params.m * u[c]);
    r[c] -= params.b * response;
    r[nu + k] += -params.mu * v[k] + params.c * response;
  }
  return r;
}

SparseMatrix SteadySystem::jacobian(const ModelParams& params, const Eigen::VectorXd& x) const {
  check_denominator(params, x);
  const int nu = grid_.num_cells();
  const int nv = grid_.num_exterior();
  const auto u = x.head(nu);
  const auto v = x.tail(nv);

  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(lap_all_.matrix.nonZeros() + lap_ext_.matrix.nonZeros() + 4 * nv + nu));

  // Prey diffusion block: L diag(u) for (1/2) L(u^2), L otherwise.
  const bool nonlinear = params.variant == Variant::NonlinearDiffusion;
  for (int col = 0; col < lap_all_.matrix.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(lap_all_.matrix, col); it; ++it) {
      const double scale = nonlinear ? u[col] : 1.0;
      t.emplace_back(static_cast<int>(it.row()), col, it.value() * scale);
    }
  }
  for (int c = 0; c < nu; ++c) {
    t.emplace_back(c, c, params.lambda - 2.0 * u[c]);
  }
  for (int col = 0; col < lap_ext_.matrix.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(lap_ext_.matrix, col); it; ++it) {
      t.emplace_back(nu + static_cast<int>(it.row()), nu + col, it.value());
    }
  }
  for (int k = 0; k < nv; ++k) {
    const int c = ext_cells_[static_cast<std::size_t>(k)];
    const double den = 1.0 + params.m * u[c];
    const double d_response_du = v[k] / (den * den);
    const double d_response_dv = u[c] / den;
    t.emplace_back(c, c, -params.b * d_response_du);
    t.emplace_back(c, nu + k, -params.b * d_response_dv);
    t.emplace_back(nu + k, c, params.c * d_response_du);
    t.emplace_back(nu + k, nu + k, -params.mu + params.c * d_response_dv);
  }

  SparseMatrix j(nu + nv, nu + nv);
  j.setFromTriplets(t.begin(), t.end());
  j.makeCompressed();
  return j;
}

ScalarField nonlinear_diffusion(const Grid& grid, const ScalarField& u) {
  const SparseOperator lap = neumann_laplacian(grid, Region::All);
  ScalarField out;
  out.support = Region::All;
  out.values = 0.5 * flux_apply(lap.matrix, u.values.cwiseProduct(u.values));
  return out;
}

Eigen::VectorXd residual(const Grid& grid, const ModelParams& params, const State& state) {
  return SteadySystem(grid).residual(params, pack(grid, state));
}

SparseOperator jacobian(const Grid& grid, const ModelParams& params, const State& state) {
  SparseOperator op;
  op.matrix = SteadySystem(grid).jacobian(params, pack(grid, state));
  op.dofs.reserve(static_cast<std::size_t>(op.matrix.rows()));
  for (int c = 0; c < grid.num_cells(); ++c) op.dofs.push_back({c, FieldId::U});
  for (int c : grid.exterior_cells()) op.dofs.push_back({c, FieldId::V});
  return op;
}

Eigen::VectorXd residual_mu_derivative(const Grid& grid, const State& state) {
  const UnknownLayout layout(grid);
  Eigen::VectorXd d = Eigen::VectorXd::Zero(layout.size());
  d.tail(layout.num_v) = -gather_exterior(grid, state.v.values);
  return d;
}

State semi_trivial_state(const Grid& grid, double lambda) {
  if (lambda < 0.0) throw ParameterError("lambda must be non-negative for the semi-trivial state");
  return State{ScalarField::constant(grid, lambda, Region::All), ScalarField::constant(grid, 0.0, Region::Exterior)};
}

} // namespace refuge
