#include "alignlab/pipelines.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <sstream>

namespace {

std::string default_out_dir(const std::string& command, std::uint64_t seed) {
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  const auto stamp =
      std::chrono::duration_cast<std::chrono::seconds>(now).count();
  std::ostringstream os;
  os << "runs/" << command << "-" << stamp << "-seed" << seed;
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale testbed for unsupervised cross-domain mapping "
               "bounds"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::uint64_t seed_flag = 0;
  bool seed_set = false;
  int jobs = 1;
  app.add_option("--config", config_path, "Run configuration file");
  app.add_option("--set", overrides,
                 "Override a config entry, e.g. --set train.epochs=300");
  app.add_option("--out", out_dir, "Output directory (default: timestamped)");
  app.add_option("--seed", seed_flag, "Shorthand for --set train.seed=<n>")
      ->each([&](const std::string&) { seed_set = true; });
  app.add_option("--jobs", jobs, "Parallel independent runs");

  for (const std::string& name : alignlab::pipeline_commands())
    app.add_subcommand(name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : alignlab::kExitUsage;
  }

  try {
    alignlab::RunConfig cfg;
    if (!config_path.empty())
      cfg = alignlab::RunConfig::from_file(config_path);
    for (const std::string& entry : overrides) {
      const size_t eq = entry.find('=');
      if (eq == std::string::npos) {
        std::cerr << "--set expects key=value, got '" << entry << "'\n";
        return alignlab::kExitUsage;
      }
      cfg.set(entry.substr(0, eq), entry.substr(eq + 1));
    }
    if (seed_set) cfg.set("train.seed", std::to_string(seed_flag));

    const std::string command = app.get_subcommands().front()->get_name();
    if (out_dir.empty())
      out_dir = default_out_dir(command, cfg.get_u64("train.seed", 1));
    const int code = alignlab::run_command(command, cfg, out_dir, jobs);
    std::cout << "outputs: " << out_dir << "\n";
    return code;
  } catch (const alignlab::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return alignlab::kExitUsage;
  } catch (const alignlab::ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return alignlab::kExitContract;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return alignlab::kExitContract;
  }
}
