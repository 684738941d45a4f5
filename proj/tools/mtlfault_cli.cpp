// mtlfault: command-line front end for the fault-location pipeline.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "mtlfault/config.hpp"
#include "mtlfault/errors.hpp"
#include "mtlfault/pipeline.hpp"
#include "mtlfault/simd/kernels.hpp"

namespace {

using namespace mtlfault;

struct GlobalOptions {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string stages = "simulate,render,features,train,eval";
  std::string window;
  bool no_zones = false;
  bool quiet = false;
};

ViewWindow parse_window(const std::string& text) {
  std::stringstream ss(text);
  std::string tok;
  double v[4];
  int n = 0;
  while (std::getline(ss, tok, ',')) {
    if (n == 4) break;
    try {
      std::size_t used = 0;
      v[n] = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ValidationError("--window: bad number '" + tok + "'");
    }
    ++n;
  }
  if (n != 4 || std::getline(ss, tok, ',')) throw ValidationError("--window expects r_min,r_max,x_min,x_max");
  ViewWindow w{v[0], v[1], v[2], v[3]};
  validate(w);
  return w;
}

PipelineConfig resolve(const GlobalOptions& o) {
  PipelineConfig cfg = o.config.empty() ? PipelineConfig::defaults() : load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.window == "auto") {
    for (auto& d : cfg.datasets) {
      d.window.reset();
      d.auto_window = true;
    }
  } else if (!o.window.empty()) {
    cfg.render.window = parse_window(o.window);
    for (auto& d : cfg.datasets) {
      d.window.reset();
      d.auto_window = false;
    }
  }
  if (o.no_zones) cfg.render.draw_zones = false;
  validate(cfg);
  return cfg;
}

void print_summary(const PipelineConfig& cfg, const RunManifest& m) {
  for (const auto& w : m.warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& s : m.stages) {
    std::printf("%-9s %6.2fs  %zu artifacts\n", to_string(s.stage).c_str(), s.seconds, s.artifacts.size());
  }
  std::printf("output   %s\ncontent  %s\n", cfg.output_dir.c_str(), m.content_hash.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fault location on mixed overhead/cable lines from relay R-X images"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(kToolVersion));
  GlobalOptions o;
  app.add_option("--config", o.config, "JSON config file (defaults used when omitted)")->check(CLI::ExistingFile);
  app.add_option("--out", o.out, "Output directory (overrides output_dir)");
  app.add_option("--seed", o.seed, "Master seed (overrides seed)");
  app.add_option("--window", o.window, "View window r_min,r_max,x_min,x_max (or 'auto') for every dataset");
  app.add_flag("--no-zones", o.no_zones, "Do not draw the zone circles");
  app.add_flag("-q,--quiet", o.quiet, "Suppress the run summary");

  std::optional<Stage> single;
  for (const Stage s : all_stages()) {
    auto* sub = app.add_subcommand(to_string(s), "Run only the '" + to_string(s) + "' stage");
    sub->callback([&single, s] { single = s; });
  }
  auto* pipe = app.add_subcommand("pipeline", "Run several stages in order");
  pipe->add_option("--stages", o.stages, "Comma-separated subset of simulate,render,features,train,eval");
  auto* info = app.add_subcommand("info", "Print the resolved configuration and kernel backend");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const PipelineConfig cfg = resolve(o);
    if (info->parsed()) {
      std::cout << to_json(cfg);
      std::cerr << "config hash " << config_hash(cfg) << ", kernels " << simd::backend_name(simd::active_backend())
                << "\n";
      for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << "\n";
      return 0;
    }
    const std::vector<Stage> stages = single ? std::vector<Stage>{*single} : parse_stages(o.stages);
    const RunManifest m = run_pipeline(cfg, stages, cfg.output_dir);
    if (!o.quiet) print_summary(cfg, m);
    return 0;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
