// Command-line driver for the three-phase training pipeline.
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "diagan/errors.hpp"
#include "diagan/io.hpp"
#include "diagan/pipeline.hpp"

namespace {

diagan::ExperimentConfig build_config(const std::string& preset, const std::string& config_path,
                                      const std::vector<std::string>& overrides, std::optional<std::uint64_t> seed) {
  std::string text;
  if (!preset.empty()) text += "preset = " + preset + "\n";
  if (!config_path.empty()) text += diagan::read_text_file(config_path);
  std::vector<std::string> all = overrides;
  if (seed) all.push_back("seed=" + std::to_string(*seed));
  return diagan::load_config(text, all);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diagan: diagnose-and-resample GAN training on 2-D toy data"};
  app.require_subcommand(1);

  std::string run_dir;
  std::string preset;
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;

  const auto add_config_flags = [&](CLI::App* cmd) {
    cmd->add_option("--preset", preset, "single_gaussian or twenty_five_gaussians");
    cmd->add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", overrides, "override a config key (key=value), repeatable");
    cmd->add_option("--seed", seed, "experiment seed (required unless the config sets one)");
  };

  auto* train = app.add_subcommand("train", "phase 1: train and record LDR");
  train->add_option("run", run_dir, "run directory")->required();
  add_config_flags(train);

  std::optional<double> k;
  auto* diagnose = app.add_subcommand("diagnose", "discrepancy scores and sampling frequencies");
  diagnose->add_option("run", run_dir)->required();
  diagnose->add_option("-k", k, "score coefficient (default: config diag.k)");

  std::optional<std::string> scores;
  auto* resample = app.add_subcommand("resample-train", "phase 2: score-weighted training with D_aux");
  resample->add_option("run", run_dir)->required();
  resample->add_option("--scores", scores, "score CSV (default: diagnose/scores.csv)");

  std::size_t count = 0;
  bool count_set = false;
  auto* drs = app.add_subcommand("drs", "phase 3: discriminator rejection sampling");
  drs->add_option("run", run_dir)->required();
  auto* count_opt = drs->add_option("-n,--count", count, "samples to accept (default: config drs.samples)");

  std::optional<std::string> samples;
  std::string eval_name = "evaluate";
  auto* evaluate = app.add_subcommand("evaluate", "metrics and plot tables");
  evaluate->add_option("run", run_dir)->required();
  evaluate->add_option("--samples", samples, "samples CSV (default: drs/samples.csv or fresh generator samples)");
  evaluate->add_option("--name", eval_name, "output subdirectory");

  std::vector<double> ks = diagan::kScoreSweep;
  std::string sort_by = "k";
  auto* sweep = app.add_subcommand("sweep", "phase 2 + DRS for several score coefficients");
  sweep->add_option("run", run_dir)->required();
  add_config_flags(sweep);
  sweep->add_option("--k", ks, "k values")->delimiter(',');
  sweep->add_option("--sort", sort_by, "sort column")->check(
      CLI::IsMember({"k", "frechet", "precision", "recall", "acceptance_rate"}));

  auto* report = app.add_subcommand("report", "summary JSON of a run directory");
  report->add_option("run", run_dir)->required();

  CLI11_PARSE(app, argc, argv);
  count_set = count_opt->count() > 0;

  try {
    if (train->parsed()) {
      const auto manifest = diagan::cmd_train(build_config(preset, config_path, overrides, seed), run_dir);
      std::cout << manifest.to_json();
    } else if (diagnose->parsed()) {
      const auto table = diagan::cmd_diagnose(run_dir, k);
      std::cout << "scored " << table.size() << " samples (k = " << table.k << ")\n";
    } else if (resample->parsed()) {
      const auto manifest = diagan::cmd_resample_train(
          run_dir, scores ? std::optional<std::filesystem::path>(*scores) : std::nullopt);
      std::cout << manifest.to_json();
    } else if (drs->parsed()) {
      const std::size_t n = count_set ? count : diagan::load_run_config(run_dir).drs_samples;
      const auto result = diagan::cmd_drs(run_dir, n);
      std::cout << "accepted " << result.accepted << " of " << result.proposed << " proposals\n";
    } else if (evaluate->parsed()) {
      std::cout << diagan::cmd_evaluate(run_dir, samples ? std::optional<std::filesystem::path>(*samples) : std::nullopt,
                                        eval_name);
    } else if (sweep->parsed()) {
      const auto rows = diagan::cmd_sweep(build_config(preset, config_path, overrides, seed), run_dir, ks, sort_by);
      std::cout << diagan::read_text_file(std::filesystem::path(run_dir) / "sweep" / "sweep.csv");
      (void)rows;
    } else if (report->parsed()) {
      std::cout << diagan::cmd_report(run_dir);
    }
  } catch (const diagan::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
