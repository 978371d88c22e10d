#include "refuge/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <random>
#include <sstream>

#include "refuge/analytics.hpp"
#include "refuge/errors.hpp"

namespace refuge {

namespace fs = std::filesystem;

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

namespace {

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

std::vector<Variant> sorted_variants(std::vector<Variant> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::string fixed(double value, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, value);
  return buf;
}

ModelParams params_for(const RunConfig& cfg, Variant variant, double lambda) {
  ModelParams p = cfg.params;
  p.variant = variant;
  p.lambda = lambda;
  return p;
}

ContinuationOptions continuation_options(const RunConfig& cfg) {
  ContinuationOptions c = cfg.continuation;
  c.newton = cfg.newton;
  return c;
}

void check_trace_range(const RunConfig& cfg, double lambda) {
  ModelParams p = cfg.params;
  p.lambda = lambda;
  const double mu_lambda = bifurcation_point(p);
  if (!(cfg.continuation.mu_min < mu_lambda)) {
    std::ostringstream msg;
    msg << "continuation.mu_min = " << cfg.continuation.mu_min << " is not below mu_lambda = " << mu_lambda
        << " for lambda = " << lambda;
    throw ConfigError(msg.str());
  }
}

} // namespace

std::string branch_csv(const Branch& branch) {
  std::ostringstream out;
  out << "variant,lambda,mu,avg_v,max_v,min_u,newton_iters\n";
  const std::string variant(to_string(branch.variant));
  const std::string lambda = format_double(branch.params.lambda);
  for (const auto& p : branch.points) {
    out << variant << ',' << lambda << ',' << format_double(p.mu) << ',' << format_double(p.avg_v) << ','
        << format_double(p.max_v) << ',' << format_double(p.min_u) << ',' << p.newton_iters << '\n';
  }
  out << "# mu_lambda=" << format_double(branch.onset.mu_lambda) << '\n';
  out << "# slope_at_onset=" << format_double(branch.onset.slope_at_onset) << '\n';
  if (branch.points.size() >= 3) out << "# onset_estimate=" << format_double(detect_onset(branch)) << '\n';
  if (branch.truncated) out << "# truncated: " << branch.diagnostic << '\n';
  return out.str();
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  out << "mu,avg_v_nonlinear,avg_v_linear,ratio\n";
  for (const auto& r : rows) {
    out << format_double(r.mu) << ',' << format_double(r.avg_v_nonlinear) << ',' << format_double(r.avg_v_linear)
        << ',' << format_double(r.ratio) << '\n';
  }
  return out.str();
}

std::string branch_figure_svg(const std::vector<FigurePanel>& panels) {
  constexpr double panel_w = 320, panel_h = 300;
  constexpr double left = 56, right = 16, top = 34, bottom = 46;
  const double width = panel_w * static_cast<double>(std::max<std::size_t>(panels.size(), 1));

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << fixed(width, 0) << "\" height=\""
      << fixed(panel_h, 0) << "\" viewBox=\"0 0 " << fixed(width, 0) << ' ' << fixed(panel_h, 0) << "\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << fixed(width, 0) << "\" height=\"" << fixed(panel_h, 0)
      << "\" fill=\"white\"/>\n"
      << "<g font-family=\"sans-serif\" font-size=\"11\">\n";

  for (std::size_t k = 0; k < panels.size(); ++k) {
    const FigurePanel& panel = panels[k];
    const double ox = panel_w * static_cast<double>(k);
    const double plot_w = panel_w - left - right;
    const double plot_h = panel_h - top - bottom;

    const double x_max = panel.mu_lambda * 1.05;
    double y_max = 0.0;
    for (const Branch* b : {panel.nonlinear, panel.linear}) {
      if (!b) continue;
      for (const auto& p : b->points) y_max = std::max(y_max, p.avg_v);
    }
    y_max = y_max > 0.0 ? y_max * 1.1 : 1.0;
    auto px = [&](double mu) { return ox + left + plot_w * mu / x_max; };
    auto py = [&](double v) { return top + plot_h * (1.0 - v / y_max); };

    svg << "<g id=\"panel-" << k << "\">\n";
    svg << "<rect x=\"" << fixed(ox + left) << "\" y=\"" << fixed(top) << "\" width=\"" << fixed(plot_w)
        << "\" height=\"" << fixed(plot_h) << "\" fill=\"none\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << fixed(ox + left + plot_w / 2) << "\" y=\"" << fixed(top - 12)
        << "\" text-anchor=\"middle\">lambda = " << format_double(panel.lambda) << "</text>\n";
    for (int t = 0; t <= 4; ++t) {
      const double mu = x_max * t / 4.0;
      const double v = y_max * t / 4.0;
      svg << "<line x1=\"" << fixed(px(mu)) << "\" y1=\"" << fixed(top + plot_h) << "\" x2=\"" << fixed(px(mu))
          << "\" y2=\"" << fixed(top + plot_h + 4) << "\" stroke=\"black\"/>\n";
      svg << "<text x=\"" << fixed(px(mu)) << "\" y=\"" << fixed(top + plot_h + 16) << "\" text-anchor=\"middle\">"
          << fixed(mu, 3) << "</text>\n";
      svg << "<line x1=\"" << fixed(ox + left - 4) << "\" y1=\"" << fixed(py(v)) << "\" x2=\"" << fixed(ox + left)
          << "\" y2=\"" << fixed(py(v)) << "\" stroke=\"black\"/>\n";
      svg << "<text x=\"" << fixed(ox + left - 6) << "\" y=\"" << fixed(py(v) + 4) << "\" text-anchor=\"end\">"
          << fixed(v, 2) << "</text>\n";
    }
    svg << "<text x=\"" << fixed(ox + left + plot_w / 2) << "\" y=\"" << fixed(panel_h - 8)
        << "\" text-anchor=\"middle\">mu</text>\n";
    svg << "<text x=\"" << fixed(ox + 14) << "\" y=\"" << fixed(top + plot_h / 2) << "\" text-anchor=\"middle\""
        << " transform=\"rotate(-90 " << fixed(ox + 14) << ' ' << fixed(top + plot_h / 2) << ")\">avg v</text>\n";

    auto curve = [&](const Branch* b, const char* color, bool cross, const char* cls) {
      if (!b || b->points.empty()) return;
      svg << "<polyline class=\"" << cls << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
      for (std::size_t i = 0; i < b->points.size(); ++i) {
        if (i) svg << ' ';
        svg << fixed(px(b->points[i].mu)) << ',' << fixed(py(b->points[i].avg_v));
      }
      svg << "\"/>\n";
      svg << "<g class=\"" << cls << "-markers\" stroke=\"" << color << "\" fill=\"none\">\n";
      for (const auto& p : b->points) {
        const double x = px(p.mu), y = py(p.avg_v);
        if (cross) {
          svg << "<path d=\"M" << fixed(x - 3) << ',' << fixed(y - 3) << " L" << fixed(x + 3) << ',' << fixed(y + 3)
              << " M" << fixed(x - 3) << ',' << fixed(y + 3) << " L" << fixed(x + 3) << ',' << fixed(y - 3)
              << "\"/>\n";
        } else {
          svg << "<circle cx=\"" << fixed(x) << "\" cy=\"" << fixed(y) << "\" r=\"3\"/>\n";
        }
      }
      svg << "</g>\n";
    };
    curve(panel.nonlinear, "#1f77b4", true, "nonlinear");
    curve(panel.linear, "#ff7f0e", false, "linear");

    // Legend
    const double lx = ox + left + 8, ly = top + 12;
    svg << "<path d=\"M" << fixed(lx - 3) << ',' << fixed(ly - 3) << " L" << fixed(lx + 3) << ',' << fixed(ly + 3)
        << " M" << fixed(lx - 3) << ',' << fixed(ly + 3) << " L" << fixed(lx + 3) << ',' << fixed(ly - 3)
        << "\" stroke=\"#1f77b4\"/>\n";
    svg << "<text x=\"" << fixed(lx + 8) << "\" y=\"" << fixed(ly + 4) << "\">nonlinear</text>\n";
    svg << "<circle cx=\"" << fixed(lx) << "\" cy=\"" << fixed(ly + 14) << "\" r=\"3\" stroke=\"#ff7f0e\" fill=\"none\"/>\n";
    svg << "<text x=\"" << fixed(lx + 8) << "\" y=\"" << fixed(ly + 18) << "\">linear</text>\n";
    svg << "</g>\n";
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

State initial_state(const Grid& grid, const InitialCondition& init) {
  std::mt19937_64 rng(init.seed);
  // 53 random bits -> [0, 1); the engine output is fully specified, so this
  // is reproducible across standard libraries.
  auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  State s = semi_trivial_state(grid, 0.0);
  for (int c = 0; c < grid.num_cells(); ++c) {
    s.u.values[c] = init.u * (1.0 + init.perturbation * (uniform() - 0.5));
  }
  for (int c : grid.exterior_cells()) {
    s.v.values[c] = init.v * (1.0 + init.perturbation * (uniform() - 0.5));
  }
  return s;
}

RunSummary run_analyze(const RunConfig& config) {
  config.validate();
  const Grid grid = build_grid(config.geometry);
  const auto variants = sorted_variants(config.variants);

  std::ostringstream table;
  table << "variant,lambda,c,m,b,mu_lambda,slope_at_onset,omega1_area,kernel_min,kernel_max,kernel_integral,"
           "nondegeneracy_integral,exterior_components\n";
  std::vector<BifurcationData> data;
  RunSummary summary;
  for (Variant v : variants) {
    const ModelParams p = params_for(config, v, config.params.lambda);
    BifurcationData d = analyze_onset(grid, p);
    table << to_string(v) << ',' << format_double(p.lambda) << ',' << format_double(p.c) << ','
          << format_double(p.m) << ',' << format_double(p.b) << ',' << format_double(d.mu_lambda) << ','
          << format_double(d.slope_at_onset) << ',' << format_double(d.omega1_area) << ','
          << format_double(d.kernel_profile.values.minCoeff()) << ','
          << format_double(d.kernel_profile.values.maxCoeff()) << ','
          << format_double(integrate(grid, d.kernel_profile, Region::All)) << ','
          << format_double(d.nondegeneracy_integral) << ',' << grid.exterior_components() << '\n';
    summary.notes.push_back(std::string(to_string(v)) + ": mu_lambda=" + format_double(d.mu_lambda) +
                            " slope=" + format_double(d.slope_at_onset));
    data.push_back(std::move(d));
  }
  if (grid.exterior_components() > 1) {
    table << "# warning: predator region is disconnected; the zero eigenvalue is not simple\n";
  }

  std::ostringstream field;
  field << "i,j,x,y,region";
  for (Variant v : variants) field << ",kernel_" << to_string(v);
  field << '\n';
  for (int c = 0; c < grid.num_cells(); ++c) {
    const auto [x, y] = grid.center(c);
    field << grid.column_of(c) << ',' << grid.row_of(c) << ',' << format_double(x) << ',' << format_double(y) << ','
          << (grid.is_refuge(c) ? "refuge" : "exterior");
    for (const auto& d : data) field << ',' << format_double(d.kernel_profile.values[c]);
    field << '\n';
  }

  const fs::path dir(config.output.directory);
  ensure_directory(dir);
  write_text_file(dir / "analysis.csv", table.str());
  write_text_file(dir / "kernel_field.csv", field.str());
  summary.files = {dir / "analysis.csv", dir / "kernel_field.csv"};
  return summary;
}

RunSummary run_trace(const RunConfig& config) {
  config.validate();
  check_trace_range(config, config.params.lambda);
  const Grid grid = build_grid(config.geometry);
  const auto variants = sorted_variants(config.variants);
  const ContinuationOptions opts = continuation_options(config);

  std::vector<Branch> branches;
  for (Variant v : variants) {
    branches.push_back(trace_branch(grid, params_for(config, v, config.params.lambda), opts.mu_min, opts));
  }

  RunSummary summary;
  const fs::path dir(config.output.directory);
  ensure_directory(dir);
  for (const Branch& b : branches) {
    const fs::path path = dir / ("branch_" + std::string(to_string(b.variant)) + ".csv");
    write_text_file(path, branch_csv(b));
    summary.files.push_back(path);
    std::string note = std::string(to_string(b.variant)) + ": " + std::to_string(b.points.size()) + " points";
    if (b.points.size() >= 3) note += ", onset estimate " + format_double(detect_onset(b));
    if (b.truncated) note += " (truncated: " + b.diagnostic + ")";
    summary.notes.push_back(note);
  }
  if (branches.size() == 2) {
    const fs::path path = dir / "comparison.csv";
    write_text_file(path, comparison_csv(compare_branches(branches[0], branches[1])));
    summary.files.push_back(path);
  }
  if (config.output.emit_svg) {
    FigurePanel panel;
    panel.lambda = config.params.lambda;
    panel.mu_lambda = branches.front().onset.mu_lambda;
    for (const Branch& b : branches) {
      (b.variant == Variant::NonlinearDiffusion ? panel.nonlinear : panel.linear) = &b;
    }
    const fs::path path = dir / "branches.svg";
    write_text_file(path, branch_figure_svg({panel}));
    summary.files.push_back(path);
  }
  return summary;
}

RunSummary run_simulate(const RunConfig& config) {
  config.validate();
  const Grid grid = build_grid(config.geometry);
  const auto variants = sorted_variants(config.variants);
  const State initial = initial_state(grid, config.initial);
  const double area_all = grid.area(Region::All);
  const double area_ext = grid.area(Region::Exterior);

  RunSummary summary;
  std::vector<std::pair<fs::path, std::string>> outputs;
  for (Variant v : variants) {
    const ModelParams p = params_for(config, v, config.params.lambda);
    std::ostringstream csv;
    csv << "t,avg_u,avg_v,min_u,max_v,clamped_fraction\n";
    auto row = [&](double t, const State& s, double clamped) {
      const Eigen::VectorXd v_ext = gather_exterior(grid, s.v.values);
      csv << format_double(t) << ',' << format_double(integrate(grid, s.u, Region::All) / area_all) << ','
          << format_double(integrate(grid, s.v, Region::Exterior) / area_ext) << ','
          << format_double(s.u.values.minCoeff()) << ',' << format_double(v_ext.maxCoeff()) << ','
          << format_double(clamped) << '\n';
    };
    const EvolveResult res = evolve_to_steady(grid, p, initial, config.time, row, config.output.snapshot_every);
    csv << "# steady=" << (res.steady ? "true" : "false") << " t=" << format_double(res.t) << " steps=" << res.steps
        << " last_rate=" << format_double(res.last_rate) << '\n';
    if (res.clamp_flagged) {
      csv << "# warning: clamped fraction " << format_double(res.clamped_fraction) << " exceeds 0.001\n";
    }
    outputs.emplace_back(fs::path(config.output.directory) / ("simulate_" + std::string(to_string(v)) + ".csv"),
                         csv.str());
    summary.notes.push_back(std::string(to_string(v)) + ": " + (res.steady ? "steady" : "not steady") +
                            " at t=" + format_double(res.t));
  }
  ensure_directory(config.output.directory);
  for (const auto& [path, content] : outputs) {
    write_text_file(path, content);
    summary.files.push_back(path);
  }
  return summary;
}

RunSummary run_reproduce_fig1(const RunConfig& config) {
  config.validate();
  for (double lambda : config.figure_lambdas) check_trace_range(config, lambda);
  const Grid grid = build_grid(config.geometry);
  const ContinuationOptions opts = continuation_options(config);
  const std::vector<Variant> variants{Variant::NonlinearDiffusion, Variant::LinearDiffusion};

  // Independent traces; each task owns its result.
  std::vector<std::future<Branch>> futures;
  for (double lambda : config.figure_lambdas) {
    for (Variant v : variants) {
      const ModelParams p = params_for(config, v, lambda);
      futures.push_back(std::async(std::launch::async, [&grid, p, opts] {
        return trace_branch(grid, p, opts.mu_min, opts);
      }));
    }
  }
  std::vector<Branch> branches;
  branches.reserve(futures.size());
  for (auto& f : futures) branches.push_back(f.get());

  RunSummary summary;
  const fs::path dir(config.output.directory);
  ensure_directory(dir);

  std::ostringstream table;
  table << "lambda,mu_lambda,onset_nonlinear,onset_linear,slope_nonlinear,slope_linear,"
           "secant_slope_nonlinear,secant_slope_linear,truncated_nonlinear,truncated_linear\n";
  std::vector<FigurePanel> panels;
  for (std::size_t k = 0; k < config.figure_lambdas.size(); ++k) {
    const Branch& nl = branches[2 * k];
    const Branch& lin = branches[2 * k + 1];
    for (const Branch* b : {&nl, &lin}) {
      const fs::path path = dir / ("branch_" + std::string(to_string(b->variant)) + "_lambda_" +
                                   format_double(config.figure_lambdas[k]) + ".csv");
      write_text_file(path, branch_csv(*b));
      summary.files.push_back(path);
    }
    auto onset = [](const Branch& b) { return b.points.size() >= 3 ? format_double(detect_onset(b)) : ""; };
    auto secant = [](const Branch& b) { return b.points.size() >= 5 ? format_double(onset_secant_slope(b)) : ""; };
    table << format_double(config.figure_lambdas[k]) << ',' << format_double(nl.onset.mu_lambda) << ',' << onset(nl)
          << ',' << onset(lin) << ',' << format_double(nl.onset.slope_at_onset) << ','
          << format_double(lin.onset.slope_at_onset) << ',' << secant(nl) << ',' << secant(lin) << ','
          << (nl.truncated ? "true" : "false") << ',' << (lin.truncated ? "true" : "false") << '\n';
    panels.push_back({config.figure_lambdas[k], nl.onset.mu_lambda, &nl, &lin});
    summary.notes.push_back("lambda=" + format_double(config.figure_lambdas[k]) + ": onset " + onset(nl) + " / " +
                            onset(lin) + " (mu_lambda " + format_double(nl.onset.mu_lambda) + ")");
  }
  write_text_file(dir / "fig1_summary.csv", table.str());
  summary.files.push_back(dir / "fig1_summary.csv");
  if (config.output.emit_svg) {
    write_text_file(dir / "fig1.svg", branch_figure_svg(panels));
    summary.files.push_back(dir / "fig1.svg");
  }
  return summary;
}

} // namespace refuge
