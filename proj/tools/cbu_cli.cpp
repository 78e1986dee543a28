#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cbu/config.hpp"
#include "cbu/runner.hpp"

namespace {

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

// One line on stderr, stable key order.
int report(const std::string& kind, int code, const std::string& message, int line = 0,
           const std::string& field = "") {
  std::cerr << "error kind=" << kind << " code=" << code;
  if (line > 0) std::cerr << " line=" << line;
  if (!field.empty()) std::cerr << " field=" << field;
  std::cerr << " message=" << quoted(message) << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Completely bounded unraveling toolkit"};
  app.set_version_flag("--version", std::string(cbu::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  unsigned threads = 0;

  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("--config", config_path, "Config file")->required();
  auto* out_opt = run->add_option("--out", out_dir, "Output directory (overrides config)");
  auto* seed_opt = run->add_option("--seed", seed, "Master seed (overrides config)");
  auto* threads_opt = run->add_option("--threads", threads, "Worker threads, 0 for all cores");

  auto* validate = app.add_subcommand("validate", "Parse and validate a config without running it");
  validate->add_option("--config", config_path, "Config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report("usage", 64, e.what());
  }

  try {
    cbu::ExperimentConfig cfg = cbu::load_config(config_path);
    if (*seed_opt) cfg.seed = seed;
    if (*threads_opt) cfg.threads = threads;
    if (*validate) {
      bool passed = false;
      std::cout << cbu::validation_report(cfg, passed);
      return passed ? 0 : report("validation", 3, "validation failed");
    }
    const std::string dir = *out_opt ? out_dir : cfg.output;
    const auto result = cbu::run_experiment(cfg, dir);
    for (const auto& f : result.files) std::cout << "wrote " << f << "\n";
    return 0;
  } catch (const cbu::ConfigError& e) {
    return report("config", 2, e.what(), e.line(), e.field());
  } catch (const cbu::NumericalError& e) {
    return report("numerical", 4, e.what());
  } catch (const std::invalid_argument& e) {
    return report("validation", 3, e.what());
  } catch (const std::exception& e) {
    return report("runtime", 5, e.what());
  }
}
