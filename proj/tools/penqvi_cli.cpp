#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <sstream>

#include <penqvi/acceptance.hpp>
#include <penqvi/scenario.hpp>

namespace fs = std::filesystem;
using namespace penqvi;

namespace {

fs::path output_root() {
  const char* env = std::getenv("PENQVI_OUTPUT_ROOT");
  return env && *env ? fs::path(env) : fs::path("penqvi-out");
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw ConfigError("--values: '" + item + "' is not a number");
    out.push_back(v);
  }
  return out;
}

Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

int cmd_solve(const std::string& config_path, const std::string& out_override) {
  const auto cfg = load_config(config_path);
  const fs::path out = out_override.empty() ? output_root() / cfg.output_directory : fs::path(out_override);
  const auto outcome = run_scenario(cfg, out);
  std::cout << cfg.name << ": " << outcome.summary["status"].get<std::string>() << ", results in " << out.string()
            << "\n";
  if (outcome.exit_code != 0) std::cerr << "error: " << outcome.message << "\n";
  return outcome.exit_code;
}

int cmd_sweep(const std::string& config_path, const std::string& axis, const std::string& values, int threads,
              const std::string& out_override) {
  const Json base = read_json(config_path);
  const auto cfg = parse_config(base);
  const fs::path out =
      out_override.empty() ? output_root() / (cfg.output_directory + "-sweep-" + axis) : fs::path(out_override);
  const auto rows = run_sweep(base, axis, parse_values(values), out, threads);
  int failed = 0;
  for (const auto& r : rows)
    if (!r.ok) {
      ++failed;
      std::cerr << "row value=" << fmt17(r.value) << " failed: " << r.message << "\n";
    }
  std::cout << rows.size() << " rows (" << failed << " failed), table in " << (out / "sweep.csv").string() << "\n";
  return 0;
}

int cmd_plot(const std::string& bundle, const std::string& kind) {
  emit_plot_data(bundle, kind);
  std::cout << (fs::path(bundle) / ("plot_" + kind + ".dat")).string() << "\n";
  return 0;
}

int cmd_verify(const std::vector<std::string>& ids, std::uint64_t seed, const std::string& out_override) {
  const fs::path out = out_override.empty() ? output_root() / "verify" : fs::path(out_override);
  const auto results = acceptance::run(ids, seed, out, [](const acceptance::Criterion& c) {
    std::cout << acceptance::console_line(c) << std::endl;
  });
  int failed = 0;
  for (const auto& c : results) failed += c.pass() ? 0 : 1;
  std::cout << results.size() - static_cast<std::size_t>(failed) << "/" << results.size()
            << " criteria passed, summary in " << (out / "summary.json").string() << "\n";
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Penalty/continuation solver for gradient-constrained evolution problems.\n"
               "Results go under $PENQVI_OUTPUT_ROOT (default ./penqvi-out)."};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  auto* solve = app.add_subcommand("solve", "run one scenario from a JSON config");
  solve->add_option("config", config_path, "config file")->required();
  solve->add_option("--out", out_dir, "output directory (overrides the output root)");

  std::string axis, values;
  int threads = 1;
  auto* sweep = app.add_subcommand("sweep", "run a scenario once per value of one parameter");
  sweep->add_option("config", config_path, "base config file")->required();
  sweep->add_option("--axis", axis, "dotted key of a numeric parameter, e.g. schedule.epsilons")->required();
  sweep->add_option("--values", values, "comma-separated values (may be empty)")->required()->expected(0, 1);
  sweep->add_option("--threads", threads, "concurrent rows")->check(CLI::PositiveNumber);
  sweep->add_option("--out", out_dir, "output directory (overrides the output root)");

  std::string bundle, kind;
  auto* plot = app.add_subcommand("plot", "write whitespace-delimited plot columns from a result directory");
  plot->add_option("bundle", bundle, "directory written by solve or sweep")->required();
  plot->add_option("--kind", kind, "profile, residual, outer or sweep")->required();

  std::vector<std::string> criteria;
  std::uint64_t seed = 20240917;
  auto* verify = app.add_subcommand("verify", "run the acceptance criteria");
  verify->add_option("--criterion", criteria, "criterion id such as AC-3 (repeatable; default all)");
  verify->add_option("--seed", seed, "seed of the randomized criteria");
  verify->add_option("--out", out_dir, "output directory (overrides the output root)");

  auto* list = app.add_subcommand("list", "list the built-in scenarios");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*solve) return cmd_solve(config_path, out_dir);
    if (*sweep) return cmd_sweep(config_path, axis, values, threads, out_dir);
    if (*plot) return cmd_plot(bundle, kind);
    if (*verify) return cmd_verify(criteria, seed, out_dir);
    if (*list) {
      for (const auto& [name, text] : builtin_descriptions()) std::cout << name << "  " << text << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
