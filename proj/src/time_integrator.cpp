#include "refuge/time_integrator.hpp"

#include <cmath>

#include <Eigen/SparseCholesky>

#include "refuge/errors.hpp"

namespace refuge {

void TimeOptions::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ParameterError("time step dt must be positive");
  if (!(t_max >= 0.0) || !std::isfinite(t_max)) throw ParameterError("t_max must be non-negative");
  if (!(steady_tol > 0.0)) throw ParameterError("steady_tol must be positive");
}

struct TimeStepper::Impl {
  Grid grid;
  ModelParams params;
  double dt;
  bool clamp;
  SparseMatrix lap_all;
  SparseMatrix prey_matrix; // same pattern as lap_all
  Eigen::SimplicialLDLT<SparseMatrix> prey_solver;
  Eigen::SimplicialLDLT<SparseMatrix> predator_solver;
  std::vector<int> ext_cells;

  Impl(const Grid& g, const ModelParams& p, double step, bool clamp_negative)
      : grid(g), params(p), dt(step), clamp(clamp_negative),
        lap_all(neumann_laplacian(g, Region::All).matrix),
        ext_cells(g.exterior_cells().begin(), g.exterior_cells().end()) {
    params.validate();
    if (!(dt > 0.0)) throw ParameterError("time step dt must be positive");

    prey_matrix = lap_all;
    if (params.variant == Variant::LinearDiffusion) {
      prey_matrix = identity(g.num_cells()) - dt * lap_all;
      prey_solver.compute(prey_matrix);
      if (prey_solver.info() != Eigen::Success) throw NumericalError("prey diffusion factorization failed");
    } else {
      prey_solver.analyzePattern(prey_matrix);
    }

    if (g.num_exterior() > 0) {
      const SparseMatrix lap_ext = neumann_laplacian(g, Region::Exterior).matrix;
      const SparseMatrix predator_matrix = identity(g.num_exterior()) - (dt * params.d) * lap_ext;
      predator_solver.compute(predator_matrix);
      if (predator_solver.info() != Eigen::Success) throw NumericalError("predator diffusion factorization failed");
    }
  }

  static SparseMatrix identity(int n) {
    SparseMatrix eye(n, n);
    eye.setIdentity();
    return eye;
  }

  // I - dt * div(u_old grad .) with arithmetic face means, written into the
  // Laplacian's sparsity pattern.
  void refresh_prey_matrix(const Eigen::Ref<const Eigen::VectorXd>& u_old) {
    const int n = static_cast<int>(lap_all.rows());
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    for (int col = 0; col < n; ++col) {
      SparseMatrix::InnerIterator src(lap_all, col);
      SparseMatrix::InnerIterator dst(prey_matrix, col);
      for (; src; ++src, ++dst) {
        const int row = static_cast<int>(src.row());
        if (row == col) continue;
        const double k = src.value() * 0.5 * (u_old[row] + u_old[col]);
        dst.valueRef() = -dt * k;
        diag[row] += k;
      }
    }
    for (int col = 0; col < n; ++col) prey_matrix.coeffRef(col, col) = 1.0 + dt * diag[col];
    prey_solver.factorize(prey_matrix);
    if (prey_solver.info() != Eigen::Success) throw NumericalError("prey diffusion factorization failed");
  }

  StepStats advance(Eigen::VectorXd& x) {
    const int nu = grid.num_cells();
    const int nv = grid.num_exterior();
    auto u = x.head(nu);
    auto v = x.tail(nv);

    Eigen::VectorXd u_rhs = u + dt * (params.lambda * u.array() - u.array().square()).matrix();
    Eigen::VectorXd v_rhs = v;
    for (int k = 0; k < nv; ++k) {
      const int c = ext_cells[static_cast<std::size_t>(k)];
      const double den = 1.0 + params.m * u[c];
      if (!(den > kMinResponseDenominator)) throw SingularResponseError("Holling-II denominator vanished during time step");
      const double response = u[c] * v[k] / den;
      u_rhs[c] -= dt * params.b * response;
      v_rhs[k] += dt * (-params.mu * v[k] + params.c * response);
    }

    if (params.variant == Variant::NonlinearDiffusion) refresh_prey_matrix(u);
    Eigen::VectorXd u_new = prey_solver.solve(u_rhs);
    if (prey_solver.info() != Eigen::Success || !u_new.allFinite()) throw NumericalError("prey diffusion solve failed");
    Eigen::VectorXd v_new = nv > 0 ? Eigen::VectorXd(predator_solver.solve(v_rhs)) : Eigen::VectorXd(0);
    if (nv > 0 && (predator_solver.info() != Eigen::Success || !v_new.allFinite())) {
      throw NumericalError("predator diffusion solve failed");
    }

    StepStats stats;
    if (clamp) {
      for (Eigen::Index k = 0; k < u_new.size(); ++k) {
        if (u_new[k] < 0.0) {
          u_new[k] = 0.0;
          ++stats.clamped_cells;
        }
      }
      for (Eigen::Index k = 0; k < v_new.size(); ++k) {
        if (v_new[k] < 0.0) {
          v_new[k] = 0.0;
          ++stats.clamped_cells;
        }
      }
    }
    u = u_new;
    v = v_new;
    return stats;
  }
};

TimeStepper::TimeStepper(const Grid& grid, const ModelParams& params, double dt, bool clamp_negative)
    : impl_(std::make_unique<Impl>(grid, params, dt, clamp_negative)) {}
TimeStepper::~TimeStepper() = default;
TimeStepper::TimeStepper(TimeStepper&&) noexcept = default;
TimeStepper& TimeStepper::operator=(TimeStepper&&) noexcept = default;

StepStats TimeStepper::advance(Eigen::VectorXd& x) { return impl_->advance(x); }
const Grid& TimeStepper::grid() const { return impl_->grid; }

State step(const Grid& grid, const ModelParams& params, const State& state, double dt, bool clamp_negative,
           StepStats* stats) {
  TimeStepper stepper(grid, params, dt, clamp_negative);
  Eigen::VectorXd x = pack(grid, state);
  const StepStats s = stepper.advance(x);
  if (stats) *stats = s;
  return unpack(grid, x);
}

EvolveResult evolve_to_steady(const Grid& grid, const ModelParams& params, const State& initial,
                              const TimeOptions& opts, const SnapshotFn& snapshot, long snapshot_every) {
  opts.validate();
  params.validate();
  TimeStepper stepper(grid, params, opts.dt, opts.clamp_negative);

  Eigen::VectorXd x = pack(grid, initial);
  const long total_steps = static_cast<long>(std::ceil(opts.t_max / opts.dt - 1e-9));
  const double unknowns = static_cast<double>(x.size());

  EvolveResult result;
  auto fraction = [&] {
    return result.steps > 0 ? static_cast<double>(result.clamped_cell_steps) / (unknowns * result.steps) : 0.0;
  };
  if (snapshot) snapshot(0.0, unpack(grid, x), 0.0);

  bool emitted_last = true;
  for (long k = 1; k <= total_steps; ++k) {
    const Eigen::VectorXd previous = x;
    result.clamped_cell_steps += stepper.advance(x).clamped_cells;
    result.steps = k;
    result.t = k * opts.dt;
    result.last_rate = (x - previous).lpNorm<Eigen::Infinity>() / opts.dt;
    emitted_last = false;
    if (snapshot && snapshot_every > 0 && k % snapshot_every == 0) {
      snapshot(result.t, unpack(grid, x), fraction());
      emitted_last = true;
    }
    if (result.last_rate < opts.steady_tol) {
      result.steady = true;
      break;
    }
  }
  if (snapshot && !emitted_last) snapshot(result.t, unpack(grid, x), fraction());

  result.state = unpack(grid, x);
  result.clamped_fraction = fraction();
  result.clamp_flagged = result.clamped_fraction > kClampFlagFraction;
  return result;
}

} // namespace refuge
