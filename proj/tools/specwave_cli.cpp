#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "specwave/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"spectral simulation and verification experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string manifest_path;
  std::string output;
  int workers = 0;

  CLI::App* run = app.add_subcommand("run", "execute an experiment config");
  run->add_option("config", config_path, "config file, one 'key = value' per line")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--output", output, "output directory, overriding the config");
  run->add_option("--workers", workers, "worker threads, overriding the config")
      ->check(CLI::PositiveNumber);

  CLI::App* rerun = app.add_subcommand("rerun", "reproduce a run from its manifest");
  rerun->add_option("manifest", manifest_path, "manifest.txt of a previous run")
      ->required()
      ->check(CLI::ExistingFile);
  rerun->add_option("--output", output, "output directory, default <manifest dir>/rerun");
  rerun->add_option("--workers", workers, "worker threads, overriding the manifest")
      ->check(CLI::PositiveNumber);

  CLI::App* list = app.add_subcommand("list-experiments", "print the experiment names");
  CLI::App* schema = app.add_subcommand("print-schema", "print every config key");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (list->parsed()) {
    for (const std::string& name : specwave::experiment_names()) std::cout << name << "\n";
    return 0;
  }
  if (schema->parsed()) {
    std::cout << specwave::schema_text();
    return 0;
  }
  if (run->parsed()) return specwave::run_config_file(config_path, output, workers, std::cout);
  return specwave::rerun_manifest_file(manifest_path, output, workers, std::cout);
}
