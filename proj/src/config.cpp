#include "refuge/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "refuge/analytics.hpp"
#include "refuge/errors.hpp"

namespace refuge {

using nlohmann::json;

GeometrySettings RunConfig::default_geometry() {
  GeometrySettings g;
  g.n_x = 64;
  g.n_y = 64;
  g.refuge = RefugeBox{0.375, 0.375, 0.625, 0.625};
  return g;
}

std::vector<Variant> parse_variant_selection(const std::string& name) {
  if (name == "both") return {Variant::NonlinearDiffusion, Variant::LinearDiffusion};
  try {
    return {parse_variant(name)};
  } catch (const ParameterError&) {
    throw ConfigError("variant must be nonlinear, linear or both (got '" + name + "')");
  }
}

namespace {

const json& require_object(const json& node, const std::string& where) {
  if (!node.is_object()) throw ConfigError(where + ": expected a JSON object");
  return node;
}

void reject_unknown(const json& node, const std::string& where, std::initializer_list<const char*> allowed) {
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& item : node.items()) {
    if (!keys.contains(item.key())) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

double read_number(const json& node, const std::string& where, const char* key, double fallback) {
  if (!node.contains(key)) return fallback;
  const json& v = node.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return v.get<double>();
}

long read_integer(const json& node, const std::string& where, const char* key, long fallback) {
  if (!node.contains(key)) return fallback;
  const json& v = node.at(key);
  if (!v.is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
  return v.get<long>();
}

bool read_bool(const json& node, const std::string& where, const char* key, bool fallback) {
  if (!node.contains(key)) return fallback;
  const json& v = node.at(key);
  if (!v.is_boolean()) throw ConfigError(where + "." + key + ": expected true or false");
  return v.get<bool>();
}

// Accepts a scalar (applied to both axes) or a two-element array.
template <typename T>
std::pair<T, T> read_pair(const json& node, const std::string& where, const char* key, std::pair<T, T> fallback) {
  if (!node.contains(key)) return fallback;
  const json& v = node.at(key);
  auto as = [&](const json& e) -> T {
    if constexpr (std::is_integral_v<T>) {
      if (!e.is_number_integer()) throw ConfigError(where + "." + key + ": expected integers");
    } else {
      if (!e.is_number()) throw ConfigError(where + "." + key + ": expected numbers");
    }
    return e.get<T>();
  };
  if (v.is_array()) {
    if (v.size() != 2) throw ConfigError(where + "." + key + ": expected two entries");
    return {as(v[0]), as(v[1])};
  }
  const T s = as(v);
  return {s, s};
}

void parse_geometry(const json& node, GeometrySettings& g) {
  const std::string where = "geometry";
  require_object(node, where);
  reject_unknown(node, where, {"n", "domain_length", "refuge"});
  std::tie(g.n_x, g.n_y) = read_pair<int>(node, where, "n", {g.n_x, g.n_y});
  std::tie(g.length_x, g.length_y) = read_pair<double>(node, where, "domain_length", {g.length_x, g.length_y});
  if (node.contains("refuge")) {
    const json& r = node.at("refuge");
    if (r.is_null()) {
      g.refuge.reset();
    } else {
      const std::string rw = where + ".refuge";
      require_object(r, rw);
      reject_unknown(r, rw, {"x0", "y0", "x1", "y1"});
      for (const char* k : {"x0", "y0", "x1", "y1"}) {
        if (!r.contains(k)) throw ConfigError(rw + ": missing key '" + k + "'");
      }
      g.refuge = RefugeBox{read_number(r, rw, "x0", 0), read_number(r, rw, "y0", 0), read_number(r, rw, "x1", 0),
                           read_number(r, rw, "y1", 0)};
    }
  }
}

void parse_params(const json& node, RunConfig& cfg) {
  const std::string where = "params";
  require_object(node, where);
  reject_unknown(node, where, {"lambda", "mu", "c", "m", "b", "d", "variant"});
  ModelParams& p = cfg.params;
  p.lambda = read_number(node, where, "lambda", p.lambda);
  p.mu = read_number(node, where, "mu", p.mu);
  p.c = read_number(node, where, "c", p.c);
  p.m = read_number(node, where, "m", p.m);
  p.b = read_number(node, where, "b", p.b);
  p.d = read_number(node, where, "d", p.d);
  if (node.contains("variant")) {
    if (!node.at("variant").is_string()) throw ConfigError(where + ".variant: expected a string");
    cfg.variants = parse_variant_selection(node.at("variant").get<std::string>());
  }
}

void parse_newton(const json& node, NewtonOptions& o) {
  const std::string where = "newton";
  require_object(node, where);
  reject_unknown(node, where, {"tol_residual", "max_iters", "damping", "min_step"});
  o.tol_residual = read_number(node, where, "tol_residual", o.tol_residual);
  o.max_iters = static_cast<int>(read_integer(node, where, "max_iters", o.max_iters));
  o.damping = read_number(node, where, "damping", o.damping);
  o.min_step = read_number(node, where, "min_step", o.min_step);
}

void parse_continuation(const json& node, ContinuationOptions& o) {
  const std::string where = "continuation";
  require_object(node, where);
  reject_unknown(node, where,
                 {"seed_offset", "initial_step", "min_step", "max_step", "fast_iterations", "mu_min", "max_points"});
  o.seed_offset = read_number(node, where, "seed_offset", o.seed_offset);
  o.initial_step = read_number(node, where, "initial_step", o.initial_step);
  o.min_step = read_number(node, where, "min_step", o.min_step);
  o.max_step = read_number(node, where, "max_step", o.max_step);
  o.fast_iterations = static_cast<int>(read_integer(node, where, "fast_iterations", o.fast_iterations));
  o.mu_min = read_number(node, where, "mu_min", o.mu_min);
  o.max_points = static_cast<int>(read_integer(node, where, "max_points", o.max_points));
}

void parse_time(const json& node, TimeOptions& o) {
  const std::string where = "time";
  require_object(node, where);
  reject_unknown(node, where, {"dt", "t_max", "steady_tol", "clamp_negative"});
  o.dt = read_number(node, where, "dt", o.dt);
  o.t_max = read_number(node, where, "t_max", o.t_max);
  o.steady_tol = read_number(node, where, "steady_tol", o.steady_tol);
  o.clamp_negative = read_bool(node, where, "clamp_negative", o.clamp_negative);
}

void parse_initial(const json& node, InitialCondition& o) {
  const std::string where = "initial";
  require_object(node, where);
  reject_unknown(node, where, {"u", "v", "perturbation", "seed"});
  o.u = read_number(node, where, "u", o.u);
  o.v = read_number(node, where, "v", o.v);
  o.perturbation = read_number(node, where, "perturbation", o.perturbation);
  const long seed = read_integer(node, where, "seed", static_cast<long>(o.seed));
  if (seed < 0) throw ConfigError(where + ".seed: must be non-negative");
  o.seed = static_cast<std::uint64_t>(seed);
}

void parse_output(const json& node, OutputSettings& o) {
  const std::string where = "output";
  require_object(node, where);
  reject_unknown(node, where, {"directory", "emit_svg", "snapshot_every"});
  if (node.contains("directory")) {
    if (!node.at("directory").is_string()) throw ConfigError(where + ".directory: expected a string");
    o.directory = node.at("directory").get<std::string>();
  }
  o.emit_svg = read_bool(node, where, "emit_svg", o.emit_svg);
  o.snapshot_every = read_integer(node, where, "snapshot_every", o.snapshot_every);
}

void parse_figure(const json& node, RunConfig& cfg) {
  const std::string where = "figure";
  require_object(node, where);
  reject_unknown(node, where, {"lambdas"});
  if (node.contains("lambdas")) {
    const json& l = node.at("lambdas");
    if (!l.is_array() || l.empty()) throw ConfigError(where + ".lambdas: expected a non-empty array");
    cfg.figure_lambdas.clear();
    for (const json& e : l) {
      if (!e.is_number()) throw ConfigError(where + ".lambdas: expected numbers");
      cfg.figure_lambdas.push_back(e.get<double>());
    }
  }
}

} // namespace

RunConfig parse_config(const json& doc) {
  require_object(doc, "config");
  reject_unknown(doc, "config",
                 {"geometry", "params", "newton", "continuation", "time", "initial", "output", "figure"});
  RunConfig cfg;
  if (doc.contains("geometry")) parse_geometry(doc.at("geometry"), cfg.geometry);
  if (doc.contains("params")) parse_params(doc.at("params"), cfg);
  if (doc.contains("newton")) parse_newton(doc.at("newton"), cfg.newton);
  if (doc.contains("continuation")) parse_continuation(doc.at("continuation"), cfg.continuation);
  if (doc.contains("time")) parse_time(doc.at("time"), cfg.time);
  if (doc.contains("initial")) parse_initial(doc.at("initial"), cfg.initial);
  if (doc.contains("output")) parse_output(doc.at("output"), cfg.output);
  if (doc.contains("figure")) parse_figure(doc.at("figure"), cfg);
  cfg.continuation.newton = cfg.newton;
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

void RunConfig::validate() const {
  auto wrap = [](const char* block, auto&& check) {
    try {
      check();
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(std::string(block) + ": " + e.what());
    }
  };
  wrap("geometry", [&] {
    const Grid grid = build_grid(geometry);
    if (grid.num_exterior() == 0) throw GeometryError("predator region is empty");
  });
  wrap("params", [&] { params.validate(); });
  if (variants.empty()) throw ConfigError("params.variant: no variant selected");
  wrap("newton", [&] { newton.validate(); });
  wrap("continuation", [&] {
    ContinuationOptions c = continuation;
    c.newton = newton;
    c.validate();
  });
  wrap("time", [&] { time.validate(); });
  if (!(initial.u >= 0.0) || !(initial.v >= 0.0)) throw ConfigError("initial: u and v must be non-negative");
  if (!(initial.perturbation >= 0.0 && initial.perturbation < 2.0)) {
    throw ConfigError("initial.perturbation must lie in [0, 2)");
  }
  if (output.directory.empty()) throw ConfigError("output.directory must not be empty");
  if (output.snapshot_every < 0) throw ConfigError("output.snapshot_every must be non-negative");
  for (double l : figure_lambdas) {
    if (!(l > 0.0)) throw ConfigError("figure.lambdas must be positive");
  }
}

} // namespace refuge
