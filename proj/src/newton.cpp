#include "refuge/newton.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/SparseLU>

#include "refuge/analytics.hpp"
#include "refuge/errors.hpp"

namespace refuge {

void NewtonOptions::validate() const {
  if (!(tol_residual > 0.0)) throw ParameterError("newton tol_residual must be positive");
  if (max_iters < 0) throw ParameterError("newton max_iters must be non-negative");
  if (!(damping > 0.0 && damping < 1.0)) throw ParameterError("newton damping must lie in (0, 1)");
  if (!(min_step > 0.0 && min_step <= 1.0)) throw ParameterError("newton min_step must lie in (0, 1]");
}

std::string_view to_string(SolutionClass c) {
  switch (c) {
  case SolutionClass::Trivial: return "trivial";
  case SolutionClass::SemiTrivial: return "semi_trivial";
  case SolutionClass::Positive: return "positive";
  case SolutionClass::Indefinite: return "indefinite";
  }
  return "indefinite";
}

SolutionClass classify(const Grid& grid, const ModelParams& params, const State& state, bool* positivity) {
  const Eigen::VectorXd v = gather_exterior(grid, state.v.values);
  const double min_u = state.u.values.minCoeff();
  const double min_v = v.size() > 0 ? v.minCoeff() : 0.0;
  const double max_abs_v = v.size() > 0 ? v.cwiseAbs().maxCoeff() : 0.0;
  const bool positive_ok = min_u > 0.0 && min_v >= 0.0;
  if (positivity) *positivity = positive_ok;

  if (max_abs_v < kZeroThreshold) {
    if (state.u.values.cwiseAbs().maxCoeff() < kZeroThreshold) return SolutionClass::Trivial;
    if ((state.u.values.array() - params.lambda).abs().maxCoeff() < kZeroThreshold) return SolutionClass::SemiTrivial;
    return SolutionClass::Indefinite;
  }
  if (positive_ok && min_v > 0.0) return SolutionClass::Positive;
  return SolutionClass::Indefinite;
}

namespace {

// Residual max-norm, or +inf when the state leaves the admissible set.
double safe_norm(const SteadySystem& system, const ModelParams& params, const Eigen::VectorXd& x,
                 Eigen::VectorXd* r_out) {
  try {
    Eigen::VectorXd r = system.residual(params, x);
    const double n = r.lpNorm<Eigen::Infinity>();
    if (r_out) *r_out = std::move(r);
    return std::isfinite(n) ? n : INFINITY;
  } catch (const SingularResponseError&) {
    return INFINITY;
  }
}

} // namespace

std::pair<Eigen::VectorXd, NewtonReport> newton_solve(const SteadySystem& system, const ModelParams& params,
                                                      Eigen::VectorXd x, const NewtonOptions& opts) {
  opts.validate();
  NewtonReport report;
  const Grid& grid = system.grid();

  Eigen::VectorXd r;
  double norm = safe_norm(system, params, x, &r);
  if (!std::isfinite(norm)) {
    report.diagnostic = "initial state has a singular Holling-II response";
    report.final_residual_norm = norm;
    return {std::move(x), report};
  }
  report.residual_history.push_back(norm);

  Eigen::SparseLU<SparseMatrix> lu;
  bool pattern_ready = false;
  while (norm > opts.tol_residual && report.iterations < opts.max_iters) {
    const SparseMatrix j = system.jacobian(params, x);
    if (!pattern_ready) {
      lu.analyzePattern(j);
      pattern_ready = true;
    }
    lu.factorize(j);
    if (lu.info() != Eigen::Success) {
      report.diagnostic = "singular Jacobian: " + lu.lastErrorMessage();
      break;
    }
    const Eigen::VectorXd dx = lu.solve(-r);
    if (lu.info() != Eigen::Success || !dx.allFinite()) {
      report.diagnostic = "Jacobian solve produced non-finite update";
      break;
    }

    double t = 1.0;
    bool accepted = false;
    while (t >= opts.min_step) {
      Eigen::VectorXd trial = x + t * dx;
      Eigen::VectorXd trial_r;
      const double trial_norm = safe_norm(system, params, trial, &trial_r);
      if (trial_norm < norm) {
        x = std::move(trial);
        r = std::move(trial_r);
        norm = trial_norm;
        accepted = true;
        break;
      }
      t *= opts.damping;
    }
    ++report.iterations;
    if (!accepted) {
      report.diagnostic = "line search stalled below min_step";
      break;
    }
    report.residual_history.push_back(norm);
  }

  report.final_residual_norm = norm;
  report.converged = norm <= opts.tol_residual;
  if (report.converged) {
    const State s = unpack(grid, x);
    report.classification = classify(grid, params, s, &report.positivity);
    const double min_u = s.u.values.minCoeff();
    if (min_u < 0.0) {
      std::ostringstream msg;
      msg << "converged state has negative prey density (min u = " << min_u << ")";
      report.diagnostic = msg.str();
    }
  } else if (report.diagnostic.empty()) {
    report.diagnostic = "iteration limit reached";
  }
  return {std::move(x), report};
}

std::pair<State, NewtonReport> newton_solve(const Grid& grid, const ModelParams& params, const State& initial,
                                            const NewtonOptions& opts) {
  const SteadySystem system(grid);
  auto [x, report] = newton_solve(system, params, pack(grid, initial), opts);
  return {unpack(grid, x), std::move(report)};
}

State initial_guess_on_branch(const Grid& grid, const ModelParams& params, const ScalarField& kernel, double s) {
  if (!(s >= 0.0)) throw GuessError("branch parameter s must be non-negative");
  State state;
  state.u.support = Region::All;
  state.u.values = params.lambda - s * kernel.values.array();
  state.v = ScalarField::constant(grid, s, Region::Exterior);
  if (state.u.values.minCoeff() <= 0.0) {
    std::ostringstream msg;
    msg << "s = " << s << " drives the prey density non-positive; outside the asymptotic regime";
    throw GuessError(msg.str());
  }
  return state;
}

State initial_guess_on_branch(const Grid& grid, const ModelParams& params, double s) {
  return initial_guess_on_branch(grid, params, kernel_profile(grid, params), s);
}

} // namespace refuge
