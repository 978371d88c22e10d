#include <doctest.h>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "refuge/config.hpp"
#include "refuge/errors.hpp"
#include "refuge/io.hpp"
#include "test_support.hpp"

using namespace refuge;
using refuge::testing::Rng;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Fresh directory under the system temp dir, removed on scope exit.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("refuge_test_" + tag);
    fs::remove_all(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> data_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line[0] != '#') lines.push_back(line);
  }
  return lines;
}

// Small, fast configuration for end-to-end runs.
RunConfig small_config(const fs::path& out) {
  RunConfig c = parse_config(json::parse(R"({
    "geometry": {"n": 16, "refuge": {"x0": 0.375, "y0": 0.375, "x1": 0.625, "y1": 0.625}},
    "params": {"lambda": 1.0},
    "continuation": {"mu_min": 0.2},
    "time": {"dt": 0.1, "t_max": 2.0},
    "output": {"snapshot_every": 5}
  })"));
  c.output.directory = out.string();
  return c;
}

} // namespace

TEST_CASE("property: format_double round-trips") {
  Rng rng(123);
  for (int k = 0; k < 2000; ++k) {
    const double x = (rng.uniform() - 0.5) * std::pow(10.0, rng.integer(-300, 300));
    const std::string s = format_double(x);
    double back = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    CHECK(back == x);
  }
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-0.125) == "-0.125");
}

TEST_CASE("parse_config") {
  SUBCASE("empty document gives the figure defaults") {
    const RunConfig c = parse_config(json::object());
    CHECK(c.geometry.n_x == 64);
    CHECK(c.geometry.n_y == 64);
    REQUIRE(c.geometry.refuge.has_value());
    CHECK(c.geometry.refuge->x0 == 0.375);
    CHECK(c.params.b == 1.0);
    CHECK(c.variants.size() == 2);
    CHECK(c.figure_lambdas == std::vector<double>{0.5, 1.0, 1.5});
    CHECK_NOTHROW(c.validate());
  }
  SUBCASE("every block is read") {
    const RunConfig c = parse_config(json::parse(R"({
      "geometry": {"n": [8, 16], "domain_length": [2.0, 1.0], "refuge": null},
      "params": {"lambda": 1.5, "mu": 0.2, "c": 2, "m": 0.5, "b": 3, "d": 0.1, "variant": "linear"},
      "newton": {"tol_residual": 1e-9, "max_iters": 20, "damping": 0.25, "min_step": 1e-6},
      "continuation": {"seed_offset": 0.01, "initial_step": 0.002, "min_step": 1e-5, "max_step": 0.05,
                       "fast_iterations": 4, "mu_min": 0.1, "max_points": 100},
      "time": {"dt": 0.01, "t_max": 5, "steady_tol": 1e-6, "clamp_negative": false},
      "initial": {"u": 1.0, "v": 0.0, "perturbation": 0.1, "seed": 9},
      "output": {"directory": "elsewhere", "emit_svg": false, "snapshot_every": 0},
      "figure": {"lambdas": [2.0]}
    })"));
    CHECK(c.geometry.n_x == 8);
    CHECK(c.geometry.n_y == 16);
    CHECK(c.geometry.length_x == 2.0);
    CHECK_FALSE(c.geometry.refuge.has_value());
    CHECK(c.params.m == 0.5);
    CHECK(c.variants == std::vector<Variant>{Variant::LinearDiffusion});
    CHECK(c.newton.max_iters == 20);
    CHECK(c.continuation.newton.max_iters == 20);
    CHECK(c.continuation.fast_iterations == 4);
    CHECK(c.time.clamp_negative == false);
    CHECK(c.initial.seed == 9);
    CHECK(c.output.directory == "elsewhere");
    CHECK(c.figure_lambdas == std::vector<double>{2.0});
  }
  SUBCASE("malformed documents are rejected") {
    CHECK_THROWS_AS(parse_config(json::parse(R"({"params": {"lamda": 1}})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"solver": {}})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"params": {"lambda": "one"}})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"geometry": {"n": 12.5}})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"geometry": {"refuge": {"x0": 0.4}}})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"params": {"variant": "cubic"}})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse("[1, 2]")), ConfigError);
  }
  SUBCASE("validate names the failing block") {
    RunConfig c = parse_config(json::parse(R"({"geometry": {"refuge": {"x0": 0.4, "y0": 0.4, "x1": 0.6, "y1": 0.6}}})"));
    try {
      c.validate();
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).rfind("geometry", 0) == 0);
    }
    c = parse_config(json::parse(R"({"params": {"lambda": -1}})"));
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }
  SUBCASE("load_config reports missing and invalid files") {
    CHECK_THROWS_AS(load_config("/nonexistent/refuge.json"), ConfigError);
    TempDir tmp("badjson");
    fs::create_directories(tmp.path);
    std::ofstream(tmp.path / "c.json") << "{ not json";
    CHECK_THROWS_AS(load_config(tmp.path / "c.json"), ConfigError);
  }
  CHECK(parse_variant_selection("both").size() == 2);
  CHECK_THROWS_AS(parse_variant_selection("neither"), ConfigError);
}

TEST_CASE("initial_state is seeded and bounded") {
  const Grid g = refuge::testing::unit_square(8, refuge::testing::central_refuge());
  InitialCondition init;
  const State a = initial_state(g, init);
  const State b = initial_state(g, init);
  CHECK(a.u.values == b.u.values);
  CHECK(a.u.values.minCoeff() >= init.u * (1.0 - init.perturbation / 2));
  CHECK(a.u.values.maxCoeff() < init.u * (1.0 + init.perturbation / 2));
  init.seed = 2;
  CHECK(initial_state(g, init).u.values != a.u.values);
  init.v = 0.0;
  CHECK(initial_state(g, init).v.values.isZero(0.0));
}

TEST_CASE("run_analyze writes the onset table") {
  TempDir tmp("analyze");
  RunConfig c = small_config(tmp.path);
  const RunSummary s = run_analyze(c);
  REQUIRE(s.files.size() == 2);
  const auto lines = data_lines(slurp(tmp.path / "analysis.csv"));
  REQUIRE(lines.size() == 3);
  CHECK(lines[0].rfind("variant,lambda,c,m,b,mu_lambda,slope_at_onset", 0) == 0);
  CHECK(lines[1].rfind("nonlinear,1,1,1,1,0.5,", 0) == 0);
  CHECK(lines[2].rfind("linear,1,1,1,1,0.5,", 0) == 0);
  CHECK(data_lines(slurp(tmp.path / "kernel_field.csv")).size() == 16 * 16 + 1);
}

TEST_CASE("run_trace writes branches, comparison and figure") {
  TempDir tmp("trace");
  RunConfig c = small_config(tmp.path);
  run_trace(c);
  for (const char* name : {"branch_nonlinear.csv", "branch_linear.csv", "comparison.csv", "branches.svg"}) {
    CHECK(fs::exists(tmp.path / name));
  }
  const std::string nl = slurp(tmp.path / "branch_nonlinear.csv");
  const auto lines = data_lines(nl);
  CHECK(lines[0] == "variant,lambda,mu,avg_v,max_v,min_u,newton_iters");
  CHECK(lines.size() > 5);
  CHECK(nl.find("# mu_lambda=0.5\n") != std::string::npos);
  CHECK(nl.find("# onset_estimate=") != std::string::npos);
  CHECK(nl.find("# truncated") == std::string::npos);

  const std::string svg = slurp(tmp.path / "branches.svg");
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(svg.find("<polyline class=\"nonlinear\"") != std::string::npos);
  CHECK(svg.find("<polyline class=\"linear\"") != std::string::npos);
  CHECK(svg.find("<circle") != std::string::npos);
  CHECK(svg.find("stroke=\"#1f77b4\"") != std::string::npos);
  CHECK(svg.find("stroke=\"#ff7f0e\"") != std::string::npos);
}

TEST_CASE("run_trace with one variant skips the comparison") {
  TempDir tmp("trace_one");
  RunConfig c = small_config(tmp.path);
  c.variants = {Variant::LinearDiffusion};
  c.output.emit_svg = false;
  run_trace(c);
  CHECK(fs::exists(tmp.path / "branch_linear.csv"));
  CHECK_FALSE(fs::exists(tmp.path / "branch_nonlinear.csv"));
  CHECK_FALSE(fs::exists(tmp.path / "comparison.csv"));
  CHECK_FALSE(fs::exists(tmp.path / "branches.svg"));
}

TEST_CASE("run_simulate rows") {
  TempDir tmp("simulate");
  RunConfig c = small_config(tmp.path);
  c.params.mu = 0.4;
  SUBCASE("snapshot cadence") {
    run_simulate(c);
    const auto lines = data_lines(slurp(tmp.path / "simulate_nonlinear.csv"));
    REQUIRE(lines.size() == 1 + 5);
    CHECK(lines[0] == "t,avg_u,avg_v,min_u,max_v,clamped_fraction");
    CHECK(lines[1].rfind("0,", 0) == 0);
    CHECK(lines[5].rfind("2,", 0) == 0);
  }
  SUBCASE("t_max = 0 gives only the initial row") {
    c.time.t_max = 0.0;
    run_simulate(c);
    const std::string text = slurp(tmp.path / "simulate_linear.csv");
    CHECK(data_lines(text).size() == 2);
    CHECK(text.find("# steady=false t=0 steps=0") != std::string::npos);
  }
}

TEST_CASE("runners validate before touching the file system") {
  TempDir tmp("invalid");
  RunConfig c = small_config(tmp.path / "nested");
  c.geometry.refuge = RefugeBox{0.4, 0.4, 0.6, 0.6};
  CHECK_THROWS_AS(run_analyze(c), ConfigError);
  CHECK_THROWS_AS(run_trace(c), ConfigError);
  CHECK_THROWS_AS(run_simulate(c), ConfigError);
  CHECK_THROWS_AS(run_reproduce_fig1(c), ConfigError);
  CHECK_FALSE(fs::exists(tmp.path));
}

TEST_CASE("write_text_file reports the path on failure") {
  try {
    write_text_file("/nonexistent-dir/x/out.csv", "a");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("/nonexistent-dir/x/out.csv") != std::string::npos);
  }
}

TEST_CASE("figure SVG marks each point") {
  const Grid g = refuge::testing::unit_square(8, refuge::testing::central_refuge());
  ModelParams p;
  p.variant = Variant::NonlinearDiffusion;
  const Branch nl = trace_branch(g, p, 0.3);
  p.variant = Variant::LinearDiffusion;
  const Branch lin = trace_branch(g, p, 0.3);
  const std::string svg = branch_figure_svg({{1.0, 0.5, &nl, &lin}});
  auto count = [&](const std::string& needle) {
    std::size_t n = 0;
    for (std::size_t pos = svg.find(needle); pos != std::string::npos; pos = svg.find(needle, pos + 1)) ++n;
    return n;
  };
  // One extra marker of each kind in the legend.
  CHECK(count("<circle") == lin.points.size() + 1);
  CHECK(count("<polyline") == 2);
}
