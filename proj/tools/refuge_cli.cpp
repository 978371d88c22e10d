// Command-line front end: analyze | trace | simulate | reproduce-fig1.
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "refuge/config.hpp"
#include "refuge/errors.hpp"
#include "refuge/io.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::string variant;
  bool quiet = false;
};

void add_common(CLI::App* sub, CommonFlags& flags) {
  sub->add_option("--config", flags.config_path, "JSON run configuration");
  sub->add_option("--out", flags.out_dir, "output directory (overrides output.directory)");
  sub->add_option("--variant", flags.variant, "nonlinear | linear | both")
      ->check(CLI::IsMember({"nonlinear", "linear", "both"}));
  sub->add_flag("--quiet", flags.quiet, "suppress progress output");
}

refuge::RunConfig resolve(const CommonFlags& flags) {
  refuge::RunConfig cfg = flags.config_path.empty() ? refuge::parse_config(nlohmann::json::object())
                                                    : refuge::load_config(flags.config_path);
  if (!flags.out_dir.empty()) cfg.output.directory = flags.out_dir;
  if (!flags.variant.empty()) cfg.variants = refuge::parse_variant_selection(flags.variant);
  return cfg;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bifurcation toolkit for a predator-prey system with prey refuge"};
  app.require_subcommand(1);

  CommonFlags flags;
  CLI::App* analyze = app.add_subcommand("analyze", "closed-form onset data and kernel profiles");
  CLI::App* trace = app.add_subcommand("trace", "pseudo-arclength branch trace in mu");
  CLI::App* simulate = app.add_subcommand("simulate", "time integration of the parabolic system");
  CLI::App* figure = app.add_subcommand("reproduce-fig1", "branch traces for the three-panel figure");
  for (CLI::App* sub : {analyze, trace, simulate, figure}) add_common(sub, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    const refuge::RunConfig cfg = resolve(flags);
    refuge::RunSummary summary;
    if (analyze->parsed()) summary = refuge::run_analyze(cfg);
    else if (trace->parsed()) summary = refuge::run_trace(cfg);
    else if (simulate->parsed()) summary = refuge::run_simulate(cfg);
    else summary = refuge::run_reproduce_fig1(cfg);

    if (!flags.quiet) {
      for (const auto& note : summary.notes) std::cout << note << '\n';
      for (const auto& file : summary.files) std::cout << "wrote " << file.string() << '\n';
    }
  } catch (const refuge::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const refuge::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
