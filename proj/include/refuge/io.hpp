#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "refuge/config.hpp"
#include "refuge/continuation.hpp"

namespace refuge {

/// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);

/// Writes `content` to `path`, replacing any existing file. Throws IoError
/// naming the path on failure.
void write_text_file(const std::filesystem::path& path, const std::string& content);

/// Branch CSV: header `variant,lambda,mu,avg_v,max_v,min_u,newton_iters`,
/// one row per point, then `#` footer lines (onset data, truncation note).
std::string branch_csv(const Branch& branch);

std::string comparison_csv(const std::vector<ComparisonRow>& rows);

/// One panel of the bifurcation figure: both variants at one lambda.
struct FigurePanel {
  double lambda = 0.0;
  double mu_lambda = 0.0;
  const Branch* nonlinear = nullptr;
  const Branch* linear = nullptr;
};

/// SVG 1.1 document with one (mu, avg_v) panel per entry. Nonlinear curves
/// are blue with x markers, linear curves orange with o markers.
std::string branch_figure_svg(const std::vector<FigurePanel>& panels);

/// Deterministic initial data for `simulate` (see InitialCondition).
State initial_state(const Grid& grid, const InitialCondition& init);

struct RunSummary {
  std::vector<std::filesystem::path> files; ///< written, in order
  std::vector<std::string> notes;           ///< human-readable one-liners
};

/// Closed-form onset data per variant (analysis.csv) plus the kernel fields
/// (kernel_field.csv).
RunSummary run_analyze(const RunConfig& config);

/// Branch trace per selected variant; comparison table and SVG when both
/// variants are selected.
RunSummary run_trace(const RunConfig& config);

/// Time integration per selected variant; one row per snapshot.
RunSummary run_simulate(const RunConfig& config);

/// Branch traces for every figure lambda and both variants, run concurrently,
/// plus a summary table and a multi-panel SVG.
RunSummary run_reproduce_fig1(const RunConfig& config);

} // namespace refuge
