// Command-line front end. Each subcommand runs one pipeline stage against the
// artifact directory; `pipeline` runs all enabled stages in order.
//
// Exit codes: 0 success, 1 stage failure, 2 bad input or usage.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stylo/stylo.hpp"

namespace {

struct Cli {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value pairs
  bool has_seed = false;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string corpus_root;
};

stylo::PipelineConfig effective_config(const Cli& cli) {
  stylo::PipelineConfig cfg;
  if (!cli.config_path.empty()) cfg = stylo::load_config(cli.config_path);
  for (const auto& kv : cli.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw stylo::InputError("--set expects key=value, got '" + kv + "'");
    stylo::apply_config_entry(cfg, stylo::detail::trim(std::string_view(kv).substr(0, eq)),
                              stylo::detail::trim(std::string_view(kv).substr(eq + 1)));
  }
  if (!cli.corpus_root.empty()) cfg.corpus_root = cli.corpus_root;
  if (!cli.out_dir.empty()) cfg.out_dir = cli.out_dir;
  if (cli.has_seed) cfg.seed = cli.seed;
  return cfg;
}

int run_stages(const Cli& cli, const std::vector<std::string>& stages) {
  std::string current;
  try {
    const stylo::PipelineConfig cfg = effective_config(cli);
    for (const auto& stage : stages) {
      current = stage;
      stylo::run_stage(cfg, stage);
    }
    return 0;
  } catch (const stylo::InputError& e) {
    std::fprintf(stderr, "stylo: %s%s: %s\n", current.empty() ? "" : "stage ",
                 current.empty() ? "bad input" : current.c_str(), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "stylo: stage %s failed: %s\n",
                 current.empty() ? "?" : current.c_str(), e.what());
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"temporal stylometry toolkit"};
  app.require_subcommand(1);

  Cli cli;
  app.add_option("--config", cli.config_path, "config file (key = value lines)");
  app.add_option("--set", cli.overrides, "override a config entry, e.g. --set reduce.epochs=200")
      ->take_all();
  app.add_option("--seed", cli.seed, "global random seed")->each([&](const std::string&) {
    cli.has_seed = true;
  });
  app.add_option("--out", cli.out_dir, "artifact directory");
  app.add_option("--corpus", cli.corpus_root, "corpus root directory");

  // Options may follow the subcommand name; they all belong to the app.
  for (const auto& stage : stylo::all_stage_names())
    app.add_subcommand(stage, "run the " + stage + " stage")->fallthrough();
  app.add_subcommand("pipeline", "run all enabled stages in order")->fallthrough();

  auto* init = app.add_subcommand("init-config", "print an annotated example config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (init->parsed()) {
    std::fputs(stylo::example_config_text().c_str(), stdout);
    return 0;
  }

  const std::string sub = app.get_subcommands().front()->get_name();
  if (sub == "pipeline") {
    try {
      const stylo::PipelineConfig cfg = effective_config(cli);
      return run_stages(cli, stylo::enabled_stages_in_order(cfg));
    } catch (const stylo::InputError& e) {
      std::fprintf(stderr, "stylo: bad input: %s\n", e.what());
      return 2;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "stylo: %s\n", e.what());
      return 1;
    }
  }
  return run_stages(cli, {sub});
}
