#include "refuge/continuation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/SparseLU>

#include "refuge/errors.hpp"

namespace refuge {

void ContinuationOptions::validate() const {
  if (!(seed_offset > 0.0 && seed_offset < 1.0)) throw ParameterError("continuation seed_offset must lie in (0, 1)");
  if (!(min_step > 0.0)) throw ParameterError("continuation min_step must be positive");
  if (!(initial_step >= min_step)) throw ParameterError("continuation initial_step must be >= min_step");
  if (!(max_step >= initial_step)) throw ParameterError("continuation max_step must be >= initial_step");
  if (fast_iterations < 1) throw ParameterError("continuation fast_iterations must be >= 1");
  if (!(mu_min >= 0.0)) throw ParameterError("continuation mu_min must be non-negative");
  if (max_points < 3) throw ParameterError("continuation max_points must be >= 3");
  newton.validate();
}

BranchPoint make_branch_point(const Grid& grid, double mu, const State& state, int newton_iters) {
  BranchPoint p;
  p.mu = mu;
  p.state = state;
  p.avg_v = integrate(grid, state.v, Region::Exterior) / grid.area(Region::Exterior);
  const Eigen::VectorXd v = gather_exterior(grid, state.v.values);
  p.max_v = v.maxCoeff();
  p.min_u = state.u.values.minCoeff();
  p.newton_iters = newton_iters;
  return p;
}

namespace {

// Point of the extended space (state, mu) with the arclength inner product
// <a, b> = a_x . b_x / n + a_mu b_mu, so state changes count in RMS terms.
struct ExtendedPoint {
  Eigen::VectorXd x;
  double mu = 0.0;
};

double metric_dot(const ExtendedPoint& a, const ExtendedPoint& b) {
  return a.x.dot(b.x) / static_cast<double>(a.x.size()) + a.mu * b.mu;
}

ExtendedPoint normalized(ExtendedPoint t) {
  const double n = std::sqrt(metric_dot(t, t));
  t.x /= n;
  t.mu /= n;
  return t;
}

struct CorrectorResult {
  bool converged = false;
  int iterations = 0;
  ExtendedPoint point;
};

// Newton on [R(x, mu); <t, X - X_pred>] = 0.
CorrectorResult correct(const SteadySystem& system, ModelParams params, const ExtendedPoint& predicted,
                        const ExtendedPoint& tangent, const NewtonOptions& opts, int max_iters) {
  const int n = static_cast<int>(predicted.x.size());
  const int nu = system.grid().num_cells();
  const double w = 1.0 / n;

  CorrectorResult out;
  out.point = predicted;
  ExtendedPoint& X = out.point;

  auto evaluate = [&](const ExtendedPoint& p, Eigen::VectorXd& r) -> double {
    params.mu = p.mu;
    try {
      r = system.residual(params, p.x);
    } catch (const SingularResponseError&) {
      return INFINITY;
    }
    const double n_r = r.lpNorm<Eigen::Infinity>();
    return std::isfinite(n_r) ? n_r : INFINITY;
  };

  Eigen::VectorXd r;
  double norm = evaluate(X, r);
  if (!std::isfinite(norm)) return out;

  Eigen::SparseLU<SparseMatrix> lu;
  bool analyzed = false;
  std::vector<Eigen::Triplet<double>> triplets;
  while (out.iterations < max_iters) {
    const ExtendedPoint diff{X.x - predicted.x, X.mu - predicted.mu};
    const double constraint = metric_dot(tangent, diff);
    if (norm <= opts.tol_residual && std::abs(constraint) <= opts.tol_residual) {
      out.converged = true;
      return out;
    }

    params.mu = X.mu;
    const SparseMatrix j = system.jacobian(params, X.x);
    triplets.clear();
    triplets.reserve(static_cast<std::size_t>(j.nonZeros() + 2 * n + 1));
    for (int col = 0; col < j.outerSize(); ++col) {
      for (SparseMatrix::InnerIterator it(j, col); it; ++it) {
        triplets.emplace_back(static_cast<int>(it.row()), col, it.value());
      }
    }
    // d R / d mu = (0, -v)
    for (int k = nu; k < n; ++k) triplets.emplace_back(k, n, -X.x[k]);
    for (int k = 0; k < n; ++k) triplets.emplace_back(n, k, w * tangent.x[k]);
    triplets.emplace_back(n, n, tangent.mu);

    SparseMatrix a(n + 1, n + 1);
    a.setFromTriplets(triplets.begin(), triplets.end());
    a.makeCompressed();
    if (!analyzed) {
      lu.analyzePattern(a);
      analyzed = true;
    }
    lu.factorize(a);
    if (lu.info() != Eigen::Success) return out;

    Eigen::VectorXd rhs(n + 1);
    rhs.head(n) = -r;
    rhs[n] = -constraint;
    const Eigen::VectorXd delta = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !delta.allFinite()) return out;

    double t = 1.0;
    bool accepted = false;
    while (t >= opts.min_step) {
      ExtendedPoint trial{X.x + t * delta.head(n), X.mu + t * delta[n]};
      Eigen::VectorXd trial_r;
      const double trial_norm = evaluate(trial, trial_r);
      // Full steps are always taken when they reduce the residual; the linear
      // constraint is then satisfied exactly.
      if (trial_norm < norm || (t == 1.0 && trial_norm <= opts.tol_residual)) {
        X = std::move(trial);
        r = std::move(trial_r);
        norm = trial_norm;
        accepted = true;
        break;
      }
      t *= opts.damping;
    }
    ++out.iterations;
    if (!accepted) return out;
  }
  const ExtendedPoint diff{X.x - predicted.x, X.mu - predicted.mu};
  out.converged = norm <= opts.tol_residual && std::abs(metric_dot(tangent, diff)) <= opts.tol_residual;
  return out;
}

bool is_positive(const Grid& grid, const Eigen::VectorXd& x) {
  const int nu = grid.num_cells();
  return x.head(nu).minCoeff() > 0.0 && (x.size() == nu || x.tail(x.size() - nu).minCoeff() > 0.0);
}

} // namespace

Branch trace_branch(const Grid& grid, const ModelParams& params, double mu_min, const ContinuationOptions& opts) {
  params.validate();
  opts.validate();
  const double mu_lambda = bifurcation_point(params);
  if (!(mu_min >= 0.0 && mu_min < mu_lambda)) {
    std::ostringstream msg;
    msg << "mu_min = " << mu_min << " must lie in [0, mu_lambda = " << mu_lambda << ")";
    throw ParameterError(msg.str());
  }
  if (grid.num_exterior() == 0) throw GeometryError("predator region is empty");
  if (grid.exterior_components() != 1) {
    throw GeometryError("continuation requires a connected predator region");
  }

  Branch branch;
  branch.variant = params.variant;
  branch.params = params;
  branch.params.mu = mu_lambda;
  branch.onset = analyze_onset(grid, params);

  const SteadySystem system(grid);
  const int n = system.layout().size();
  const int nu = grid.num_cells();
  ModelParams p = params;

  // Seed: the first-order branch shape at mu slightly below onset, with the
  // branch parameter read off the analytic slope.
  const double mu0 = mu_lambda * (1.0 - opts.seed_offset);
  branch.seed_s = (mu0 - mu_lambda) / branch.onset.slope_at_onset;
  const State guess = initial_guess_on_branch(grid, params, branch.onset.kernel_profile, branch.seed_s);
  p.mu = mu0;
  auto [x0, seed_report] = newton_solve(system, p, pack(grid, guess), opts.newton);
  if (!seed_report.converged || !is_positive(grid, x0)) {
    branch.truncated = true;
    branch.diagnostic = "seed Newton solve failed: " + seed_report.diagnostic;
    return branch;
  }
  branch.points.push_back(make_branch_point(grid, mu0, unpack(grid, x0), seed_report.iterations));

  ExtendedPoint current{x0, mu0};
  // Analytic tangent (-alpha, 1; mu') for the first predictor.
  ExtendedPoint tangent;
  tangent.x.resize(n);
  tangent.x.head(nu) = -branch.onset.kernel_profile.values;
  tangent.x.tail(n - nu).setOnes();
  tangent.mu = branch.onset.slope_at_onset;
  tangent = normalized(tangent);

  const int max_corrector = std::min(opts.newton.max_iters, 12);
  double step = opts.initial_step * mu_lambda;
  const double min_step = opts.min_step * mu_lambda;
  const double max_step = opts.max_step * mu_lambda;

  while (static_cast<int>(branch.points.size()) < opts.max_points) {
    const ExtendedPoint predicted{current.x + step * tangent.x, current.mu + step * tangent.mu};
    CorrectorResult res = correct(system, p, predicted, tangent, opts.newton, max_corrector);
    const bool ok = res.converged && res.point.mu < current.mu && is_positive(grid, res.point.x);
    if (!ok) {
      step *= 0.5;
      if (step < min_step) {
        branch.truncated = true;
        std::ostringstream msg;
        msg << "corrector failed at the step floor near mu = " << current.mu;
        if (res.converged && res.point.mu >= current.mu) msg << " (mu stopped decreasing)";
        else if (res.converged) msg << " (lost positivity)";
        branch.diagnostic = msg.str();
        break;
      }
      continue;
    }

    if (res.point.mu <= mu_min) {
      // Land exactly on mu_min by interpolating in mu and polishing.
      const double theta = (current.mu - mu_min) / (current.mu - res.point.mu);
      Eigen::VectorXd guess_x = current.x + theta * (res.point.x - current.x);
      p.mu = mu_min;
      auto [x_end, rep] = newton_solve(system, p, std::move(guess_x), opts.newton);
      if (rep.converged && is_positive(grid, x_end)) {
        branch.points.push_back(make_branch_point(grid, mu_min, unpack(grid, x_end), rep.iterations));
      } else {
        branch.truncated = true;
        branch.diagnostic = "final solve at mu_min failed: " + rep.diagnostic;
      }
      break;
    }

    branch.points.push_back(make_branch_point(grid, res.point.mu, unpack(grid, res.point.x), res.iterations));
    ExtendedPoint secant{res.point.x - current.x, res.point.mu - current.mu};
    tangent = normalized(std::move(secant));
    current = std::move(res.point);
    if (res.iterations <= opts.fast_iterations) step = std::min(2.0 * step, max_step);
  }
  if (static_cast<int>(branch.points.size()) >= opts.max_points && branch.points.back().mu > mu_min) {
    branch.truncated = true;
    branch.diagnostic = "max_points reached";
  }
  return branch;
}

namespace {

// Least-squares fit mu = a + s * avg_v over the first `count` points.
std::pair<double, double> fit_onset_line(const Branch& branch, int count) {
  if (count < 2 || static_cast<int>(branch.points.size()) < count) {
    std::ostringstream msg;
    msg << "need at least " << count << " branch points, have " << branch.points.size();
    throw EstimationError(msg.str());
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int k = 0; k < count; ++k) {
    const auto& pt = branch.points[static_cast<std::size_t>(k)];
    sx += pt.avg_v;
    sy += pt.mu;
    sxx += pt.avg_v * pt.avg_v;
    sxy += pt.avg_v * pt.mu;
  }
  const double denom = count * sxx - sx * sx;
  if (!(std::abs(denom) > 0.0)) throw EstimationError("degenerate onset fit (coincident avg_v values)");
  const double slope = (count * sxy - sx * sy) / denom;
  const double intercept = (sy - slope * sx) / count;
  return {intercept, slope};
}

} // namespace

double detect_onset(const Branch& branch) {
  if (branch.points.size() < 3) throw EstimationError("onset detection needs at least 3 branch points");
  return fit_onset_line(branch, 3).first;
}

double onset_secant_slope(const Branch& branch, int count) {
  return fit_onset_line(branch, count).second;
}

namespace {

// Index k with mu_k >= mu >= mu_{k+1}; throws if outside the traced range.
std::size_t bracket(const Branch& branch, double mu) {
  const auto& pts = branch.points;
  if (pts.size() < 2 || mu > pts.front().mu || mu < pts.back().mu) {
    std::ostringstream msg;
    msg << "mu = " << mu << " is outside the traced range";
    throw EstimationError(msg.str());
  }
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    if (mu <= pts[k].mu && mu >= pts[k + 1].mu) return k;
  }
  return pts.size() - 2;
}

} // namespace

double interpolate_avg_v(const Branch& branch, double mu) {
  const std::size_t k = bracket(branch, mu);
  const auto& a = branch.points[k];
  const auto& b = branch.points[k + 1];
  const double theta = (a.mu - mu) / (a.mu - b.mu);
  return a.avg_v + theta * (b.avg_v - a.avg_v);
}

std::pair<State, NewtonReport> branch_state_at(const Grid& grid, const Branch& branch, double mu,
                                               const NewtonOptions& opts) {
  const std::size_t k = bracket(branch, mu);
  const auto& a = branch.points[k];
  const auto& b = branch.points[k + 1];
  const double theta = (a.mu - mu) / (a.mu - b.mu);
  const Eigen::VectorXd xa = pack(grid, a.state);
  const Eigen::VectorXd xb = pack(grid, b.state);
  ModelParams p = branch.params;
  p.mu = mu;
  const SteadySystem system(grid);
  auto [x, report] = newton_solve(system, p, xa + theta * (xb - xa), opts);
  return {unpack(grid, x), std::move(report)};
}

std::vector<ComparisonRow> compare_branches(const Branch& nonlinear, const Branch& linear, int samples) {
  if (nonlinear.points.size() < 2 || linear.points.size() < 2) {
    throw EstimationError("comparison needs at least two points per branch");
  }
  if (samples < 2) throw EstimationError("comparison needs at least two samples");
  const double hi = std::min(nonlinear.points.front().mu, linear.points.front().mu);
  const double lo = std::max(nonlinear.points.back().mu, linear.points.back().mu);
  if (!(lo < hi)) throw EstimationError("branches have disjoint mu ranges");

  std::vector<ComparisonRow> rows;
  rows.reserve(static_cast<std::size_t>(samples));
  for (int k = 0; k < samples; ++k) {
    const double mu = k + 1 == samples ? lo : hi - (hi - lo) * k / (samples - 1);
    ComparisonRow row;
    row.mu = mu;
    row.avg_v_nonlinear = interpolate_avg_v(nonlinear, mu);
    row.avg_v_linear = interpolate_avg_v(linear, mu);
    row.ratio = row.avg_v_nonlinear / row.avg_v_linear;
    rows.push_back(row);
  }
  return rows;
}

} // namespace refuge
