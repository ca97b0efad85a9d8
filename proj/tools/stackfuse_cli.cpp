// stackfuse command-line front end.
//
//   stackfuse run      --manifest <path> --out <dir> [--seed N]
//   stackfuse evaluate --manifest <path> [--seed N]
//   stackfuse simulate --spec <path> --out <dir> [--seed N]
//
// Exit codes: 0 success, 2 invalid input, 1 internal error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "stackfuse/stackfuse.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitInvalid = 2;

stackfuse::ExperimentManifest manifest_with_seed(const std::string& path, std::optional<std::uint64_t> seed) {
  auto manifest = stackfuse::load_manifest(path);
  if (seed) {
    manifest.seed = stackfuse::Seed{*seed};
    manifest.train.seed = manifest.seed;
  }
  return manifest;
}

int cmd_run(const std::string& manifest_path, const std::string& out_dir, std::optional<std::uint64_t> seed) {
  const auto manifest = manifest_with_seed(manifest_path, seed);
  const auto result = stackfuse::run_experiment(manifest);
  stackfuse::write_run_outputs(result, out_dir);

  const auto& chosen = result.chosen_config();
  std::cout << "task " << result.task << ", seed " << result.seed.value << "\n";
  for (const auto& c : result.configs) {
    std::cout << "  " << stackfuse::config_label(c.fusion, c.meta) << ": ";
    if (c.val) {
      std::cout << "val f_macro " << stackfuse::format3(c.val->f_macro);
    } else {
      std::cout << "failed (" << c.error << ")";
    }
    std::cout << (&c == &chosen ? "  <- chosen" : "") << "\n";
  }
  if (result.test) {
    std::cout << "\n" << stackfuse::render_table(result);
  } else {
    std::cout << "\ntest split unlabeled; wrote predictions only\n";
  }
  std::cout << "\nwrote " << out_dir << "/result.json\n";
  return kExitOk;
}

int cmd_evaluate(const std::string& manifest_path, std::optional<std::uint64_t> seed) {
  const auto manifest = manifest_with_seed(manifest_path, seed);
  std::cout << stackfuse::render_table(stackfuse::evaluate_base_models(manifest));
  return kExitOk;
}

int cmd_simulate(const std::string& spec_path, const std::string& out_dir, std::optional<std::uint64_t> seed) {
  auto spec = stackfuse::load_synth_spec(spec_path);
  if (seed) spec.seed = stackfuse::Seed{*seed};
  const auto task = stackfuse::generate_synthetic_task(spec);
  stackfuse::write_synthetic_task(task, spec, out_dir);
  std::cout << "wrote " << task.sets.size() << " probability files, labels.jsonl and manifest.json to " << out_dir
            << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stackfuse: stacked ensembles over base-model class probabilities"};
  app.require_subcommand(1);

  std::string manifest_path;
  std::string out_dir;
  std::string spec_path;
  std::optional<std::uint64_t> seed;

  auto* run = app.add_subcommand("run", "select a meta-classifier on validation data and evaluate it on test");
  run->add_option("--manifest", manifest_path, "experiment manifest (JSON)")->required();
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_option("--seed", seed, "override the manifest seed");

  auto* evaluate = app.add_subcommand("evaluate", "print the base-model table for the test split");
  evaluate->add_option("--manifest", manifest_path, "experiment manifest (JSON)")->required();
  evaluate->add_option("--seed", seed, "override the manifest seed");

  auto* simulate = app.add_subcommand("simulate", "generate synthetic base-model probability files");
  simulate->add_option("--spec", spec_path, "synthetic task spec (JSON)")->required();
  simulate->add_option("--out", out_dir, "output directory")->required();
  simulate->add_option("--seed", seed, "override the spec seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*run) return cmd_run(manifest_path, out_dir, seed);
    if (*evaluate) return cmd_evaluate(manifest_path, seed);
    if (*simulate) return cmd_simulate(spec_path, out_dir, seed);
  } catch (const stackfuse::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
