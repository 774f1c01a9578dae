#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "nls/cli_io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"nls: principal spectrum points of time-periodic nonlocal dispersal operators"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  int workers = 0;

  for (const auto& name : nls::command_names()) {
    CLI::App* sub = app.add_subcommand(name, "");
    sub->add_option("--config", config_path, "path to the JSON run configuration")->required();
    sub->add_option("--out", out_dir, "output directory (default: out)");
    sub->add_option("--workers", workers, "worker count override");
  }

  CLI11_PARSE(app, argc, argv);
  std::string command = app.get_subcommands().front()->get_name();

  try {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "error: cannot open config file: " << config_path << "\n";
      return 1;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    nls::RunConfig cfg = nls::parse_config(ss.str());
    if (cfg.command != command) {
      std::cerr << "error: config command \"" << cfg.command
                << "\" does not match the CLI subcommand \"" << command << "\"\n";
      return 1;
    }
    if (workers > 0) cfg.workers = workers;
    int rc = nls::run(cfg, out_dir);
    if (rc == 0)
      std::cout << "ok: results written to " << out_dir << "\n";
    else
      std::cout << "failure: see " << out_dir << "/results.json\n";
    return rc;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
