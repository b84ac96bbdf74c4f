#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "depthsep/cli.hpp"

using namespace depthsep;

int main(int argc, char** argv) {
  CLI::App app{"Radial hard functions, three-layer constructions and two-layer width sweeps"};
  app.require_subcommand(1, 1);

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::vector<std::string> only;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--threads", threads, "worker thread cap (0 = hardware)");
  };
  CLI::App* verify = app.add_subcommand("verify", "run the numerical checks, write reports.csv");
  add_common(verify);
  verify->add_option("--only", only, "restrict to these check ids")->delimiter(',');
  CLI::App* build = app.add_subcommand("build", "build the hard function and its three-layer network");
  add_common(build);
  CLI::App* sweep = app.add_subcommand("sweep", "train two-layer nets over a width list against a built target");
  add_common(sweep);
  CLI::App* sample = app.add_subcommand("sample", "draw points from the radial measure");
  add_common(sample);
  CLI::App* eval = app.add_subcommand("eval", "evaluate a built network against the hard function");
  add_common(eval);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (seed) apply_setting(cfg, "seed", std::to_string(*seed));
    if (threads) apply_setting(cfg, "threads", std::to_string(*threads));
    if (!out_dir.empty()) cfg.out = out_dir;
    cfg.validate();

    if (verify->parsed()) return cmd_verify(cfg, only, std::cout, std::cerr);
    if (build->parsed()) return cmd_build(cfg, std::cout, std::cerr);
    if (sweep->parsed()) return cmd_sweep(cfg, std::cout, std::cerr);
    if (sample->parsed()) return cmd_sample(cfg, std::cout, std::cerr);
    if (eval->parsed()) return cmd_eval(cfg, std::cout, std::cerr);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid parameters: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::domain_error& e) {
    std::cerr << "invalid parameters: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::length_error& e) {
    std::cerr << "build too large: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitHardFailure;
  }
  return kExitUsage;
}
