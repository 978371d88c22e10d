#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "refuge/continuation.hpp"
#include "refuge/geometry.hpp"
#include "refuge/model.hpp"
#include "refuge/newton.hpp"
#include "refuge/time_integrator.hpp"

namespace refuge {

/// Initial data for `simulate`: u0 = u (1 + p (r - 1/2)), v0 = v (1 + p (r - 1/2))
/// with r uniform in [0, 1) from a seeded generator. v = 0 keeps v0 identically 0.
struct InitialCondition {
  double u = 0.5;
  double v = 0.1;
  double perturbation = 0.2;
  std::uint64_t seed = 1;
};

struct OutputSettings {
  std::string directory = "out";
  bool emit_svg = true;
  long snapshot_every = 100; ///< steps between simulate rows; 0 = initial and final only
};

/// Everything a run needs. Defaults reproduce the three-panel figure setup:
/// unit square, 64x64 cells, refuge [0.375, 0.625]^2, b = c = m = d = 1.
struct RunConfig {
  GeometrySettings geometry = default_geometry();
  ModelParams params;
  std::vector<Variant> variants{Variant::NonlinearDiffusion, Variant::LinearDiffusion};
  NewtonOptions newton;
  ContinuationOptions continuation;
  TimeOptions time;
  InitialCondition initial;
  OutputSettings output;
  std::vector<double> figure_lambdas{0.5, 1.0, 1.5};

  static GeometrySettings default_geometry();

  /// Checks every block against its module's preconditions (including the
  /// grid build). Throws ConfigError with the offending block named.
  void validate() const;
};

/// Parses a config document. Unknown keys anywhere are rejected.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

/// Parses "nonlinear" | "linear" | "both".
std::vector<Variant> parse_variant_selection(const std::string& name);

} // namespace refuge
