// numeraire_lab: batch driver for the experiments in include/numeraire.
//
//   numeraire_lab <solve|simulate|stability|sensitivity|counterexample|tree|density-check>
//                 --config PATH [--seed U64] [--paths N] [--out DIR] [--threads N]
//
// Exit status: 0 all thresholds pass, 1 a threshold fails, 2 bad input,
// 3 numerical failure.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "numeraire/experiment.hpp"

namespace {

using numeraire::ExperimentKind;

bool subcommand_accepts(const std::string& sub, ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Solve: return sub == "solve";
    case ExperimentKind::Simulate: return sub == "simulate";
    case ExperimentKind::StabilityFiltration:
    case ExperimentKind::StabilityProbability:
    case ExperimentKind::StabilityConstraint: return sub == "stability";
    case ExperimentKind::Sensitivity: return sub == "sensitivity";
    case ExperimentKind::Counterexample: return sub == "counterexample";
    case ExperimentKind::TreeProjection: return sub == "tree";
    case ExperimentKind::DensityCheck: return sub == "density-check";
  }
  return false;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numeraire portfolio stability lab"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;
  std::optional<std::string> out;
  std::optional<int> threads;
  for (const char* name : {"solve", "simulate", "stability", "sensitivity", "counterexample", "tree", "density-check"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "overrides the config seed");
    sub->add_option("--paths", paths, "overrides the path count")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "output directory");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string sub = app.get_subcommands().front()->get_name();

  try {
    numeraire::ExperimentConfig c = numeraire::load_config(config_path);
    if (!subcommand_accepts(sub, c.kind)) {
      throw numeraire::ConfigError("config describes a " + numeraire::to_string(c.kind) + " experiment, not '" + sub + "'");
    }
    if (seed) {
      c.seed = *seed;
      if (c.market) c.market->seed = *seed;
    }
    if (paths) c.paths = *paths;
    if (out) c.output_dir = *out;
    if (threads) c.threads = *threads;

    const numeraire::RunResult r = numeraire::run(c);
    std::cout << r.message << '\n';
    for (const auto& cr : r.manifest.criteria) {
      std::cout << (cr.pass ? "PASS " : "FAIL ") << cr.name << ": " << cr.detail << '\n';
    }
    std::cout << "outputs in " << c.output_dir << '\n';
    return r.manifest.all_pass() ? 0 : 1;
  } catch (const numeraire::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const numeraire::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  }
}
