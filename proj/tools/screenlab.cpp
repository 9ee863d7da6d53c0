// screenlab <scenario> --config path [--threads N] [--out dir]

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include <screenlab/parallel.hpp>
#include <screenlab/run.hpp>

int main(int argc, char** argv) {
  CLI::App app{"Plane-wave screening and SCF experiments"};
  std::string scenario;
  std::string config_path;
  std::string out_dir = ".";
  int threads = 0;
  bool echo = false;
  app.add_option("scenario", scenario, "Scenario to run")
      ->required()
      ->check(CLI::IsMember(screenlab::scenario_names()));
  app.add_option("--config", config_path, "Configuration file")->required();
  app.add_option("--threads", threads, "Worker threads (0: logical cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--out", out_dir, "Output directory");
  app.add_flag("--print-config", echo, "Print the effective configuration before running");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : screenlab::exit_config;
  }

  std::ifstream in(config_path);
  if (!in) {
    std::cerr << "screenlab " << scenario << ": config error: cannot read " << config_path << '\n';
    return screenlab::exit_config;
  }
  std::stringstream text;
  text << in.rdbuf();

  screenlab::RunConfig config;
  try {
    config = screenlab::parse_config(text.str(), scenario);
  } catch (const screenlab::ConfigError& e) {
    std::cerr << "screenlab " << scenario << ": config error: " << config_path << ": " << e.what() << '\n';
    return screenlab::exit_config;
  }
  if (echo) std::cout << screenlab::effective_config(config);
  screenlab::set_num_threads(threads);
  return screenlab::run(config, out_dir);
}
