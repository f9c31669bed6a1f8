// frforge: command-line entry point for the false-reject detection pipeline.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "frforge/cli/pipeline.hpp"
#include "frforge/cli/triage.hpp"
#include "frforge/common/error.hpp"

namespace {

using namespace frforge;

struct Options {
  std::string config_path;
  std::string run_dir = "run";
  bool print_config = false;
  bool quiet = false;
  int port = 8080;
};

int run(const std::string& command, const Options& opt) {
  const auto config = cli::load_run_config(opt.config_path);
  if (opt.print_config) {
    std::cout << cli::run_config_to_json(config).dump(2) << "\n";
    return 0;
  }
  const cli::RunPaths paths{opt.run_dir};
  if (command == "gen-corpus") cli::stage_gen_corpus(config, paths);
  else if (command == "simulate") cli::stage_simulate(config, paths);
  else if (command == "build-dataset") cli::stage_build_dataset(config, paths);
  else if (command == "train") cli::stage_train(config, paths);
  else if (command == "detect") cli::stage_detect(config, paths);
  else if (command == "evaluate") {
    const auto report = cli::stage_evaluate(config, paths);
    std::cout << eval::render_comparison(report);
  } else if (command == "feedback") {
    std::cout << cli::stage_feedback(config, paths).dump(2) << "\n";
  } else if (command == "triage-serve") {
    if (!std::filesystem::exists(paths.candidates())) {
      throw ConfigError("missing " + paths.candidates().string() + "; run the 'detect' subcommand first");
    }
    cli::TriageService service(paths.candidates(), paths.pool_logs(), paths.annotations());
    cli::serve_triage(service, opt.port);
  } else if (command == "run-all") {
    cli::run_all(config, paths);
    std::cout << read_text_file(paths.eval() / "comparison.txt");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"False-reject detection workbench"};
  app.require_subcommand(1, 1);
  Options opt;
  app.add_option("-c,--config", opt.config_path, "Run configuration (JSON); defaults apply when omitted");
  app.add_option("-d,--run-dir", opt.run_dir, "Directory holding the run's artifacts")->capture_default_str();
  app.add_flag("--print-config", opt.print_config, "Print the effective configuration and exit");
  app.add_flag("-q,--quiet", opt.quiet, "Only log warnings and errors");
  for (const char* name : {"gen-corpus", "simulate", "build-dataset", "train", "detect", "evaluate", "feedback",
                           "run-all"}) {
    app.add_subcommand(name);
  }
  auto* serve = app.add_subcommand("triage-serve", "Serve the review queue on 127.0.0.1");
  serve->add_option("-p,--port", opt.port, "Port")->capture_default_str();
  app.fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  spdlog::set_default_logger(spdlog::default_logger());
  spdlog::set_level(opt.quiet ? spdlog::level::warn : spdlog::level::info);
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, opt);
  } catch (const ContractError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const ParseError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const RatioInfeasibleError& e) {
    spdlog::error("{} (achievable ratio 1:{:.2f})", e.what(), e.achievable_ratio());
    return 2;
  } catch (const EmptyDatasetError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}
