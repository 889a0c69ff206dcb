#include "camp/cli.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "camp/checkpoint.hpp"
#include "camp/config.hpp"
#include "camp/dataset.hpp"
#include "camp/harness.hpp"
#include "camp/metrics.hpp"

namespace camp {

namespace {

namespace fs = std::filesystem;

// Per-subcommand config assembly: optional --config file, then one flag per
// documented key overriding it.
struct ConfigFlags {
  std::string config_path;
  std::vector<std::pair<std::string, CLI::Option*>> options;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "config file (key = value lines)");
    for (const std::string& key : config_keys()) {
      auto* opt = cmd->add_option("--" + key);
      opt->expected(1);
      options.emplace_back(key, opt);
    }
  }

  RunConfig resolve() const {
    RunConfig config;
    if (!config_path.empty()) config = load_config(config_path);
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) apply_config_override(config, key, opt->results().back());
    }
    validate_config(config);
    return config;
  }
};

BuildDatasetOptions dataset_options_from(const RunConfig& c) {
  BuildDatasetOptions options;
  options.num_tasks = c.tasks;
  options.episodes_per_task = c.episodes_per_task;
  options.episode_steps = c.episode_steps;
  options.segment_horizon = c.horizon;
  options.pairs_per_task = c.pairs_per_task;
  options.quality_levels = c.quality_levels;
  options.env.action_max = c.action_max;
  options.env.controller_gain = c.controller_gain;
  options.seed = c.seed;
  options.intra_only = c.tasks == 1;
  return options;
}

Pipeline load_pipeline(const std::string& checkpoint_path) {
  return Pipeline::from_checkpoint(load_checkpoint(checkpoint_path));
}

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"CAMP: preference representations, conditional diffusion, and control"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate an offline preference dataset");
  ConfigFlags gen_cfg;
  gen_cfg.attach(gen);
  std::string gen_out;
  gen->add_option("--out", gen_out, "output .campds path")->required();

  // train
  auto* train = app.add_subcommand("train", "train the full pipeline on a dataset");
  ConfigFlags train_cfg;
  train_cfg.attach(train);
  std::string train_dataset, train_out;
  train->add_option("--dataset", train_dataset, "input .campds path")->required();
  train->add_option("--out", train_out, "run directory")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "receding-horizon control evaluation");
  std::string eval_ckpt;
  int32_t eval_task = 0, eval_episodes = 50, eval_cond_task = -1;
  uint64_t eval_seed = 0;
  eval->add_option("--checkpoint", eval_ckpt, "pipeline checkpoint")->required();
  eval->add_option("--task", eval_task, "task id to execute")->required();
  eval->add_option("--episodes", eval_episodes, "episode count");
  eval->add_option("--seed", eval_seed, "base seed");
  eval->add_option("--condition-task",
                   eval_cond_task, "condition on this task's w* (default: --task)");

  // align
  auto* align = app.add_subcommand("align", "condition-vs-return alignment sweep");
  std::string align_ckpt, align_dataset, align_out;
  int32_t align_task = 0, align_episodes = 50;
  uint64_t align_seed = 0;
  align->add_option("--checkpoint", align_ckpt, "pipeline checkpoint")->required();
  align->add_option("--dataset", align_dataset, "dataset used for the low-return anchor")
      ->required();
  align->add_option("--out", align_out, "run directory for plots")->required();
  align->add_option("--task", align_task, "target task id")->required();
  align->add_option("--episodes", align_episodes, "rollouts per grid point");
  align->add_option("--seed", align_seed, "base seed");

  // embed-report
  auto* embed = app.add_subcommand("embed-report", "PCA projection of embedding space");
  std::string embed_ckpt, embed_dataset, embed_out;
  uint64_t embed_seed = 0;
  embed->add_option("--checkpoint", embed_ckpt, "pipeline checkpoint")->required();
  embed->add_option("--dataset", embed_dataset, "dataset to embed")->required();
  embed->add_option("--out", embed_out, "output directory")->required();
  embed->add_option("--seed", embed_seed, "PCA power-iteration seed");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "sweep repr_dim or zeta over a shared dataset");
  ConfigFlags ablate_cfg;
  ablate_cfg.attach(ablate);
  std::string ablate_dataset, ablate_out, ablate_sweep = "dim", ablate_values;
  ablate->add_option("--dataset", ablate_dataset, "input .campds path")->required();
  ablate->add_option("--out", ablate_out, "run directory")->required();
  ablate->add_option("--sweep", ablate_sweep, "dim | zeta");
  ablate->add_option("--values", ablate_values, "comma-separated sweep values");

  // inspect
  auto* inspect = app.add_subcommand("inspect", "print the header of a dataset or checkpoint");
  std::string inspect_path;
  inspect->add_option("path", inspect_path, "file to inspect")->required();

  app.failure_message([](const CLI::App*, const CLI::Error& e) {
    return std::string("camp: error: usage: ") + e.what() + "\n";
  });
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help for --help, one error line otherwise
    return code == 0 ? 0 : 2;
  }

  if (gen->parsed()) {
    const RunConfig config = gen_cfg.resolve();
    const OfflineDataset data = build_dataset(dataset_options_from(config));
    save_dataset(data, gen_out);
    std::cout << "wrote " << gen_out << " (" << data.segments.size() << " segments, "
              << data.pairs.size() << " pairs, digest " << file_digest(gen_out) << ")\n";
    return 0;
  }
  if (train->parsed()) {
    const RunConfig config = train_cfg.resolve();
    const TrainRunResult result = run_training(config, train_dataset, train_out);
    std::cout << "trained " << config.train_steps << " steps; checkpoint "
              << result.final_checkpoint << "; metrics " << result.metrics_csv << "\n";
    return 0;
  }
  if (eval->parsed()) {
    const Pipeline pipeline = load_pipeline(eval_ckpt);
    const ControlEval result =
        evaluate_control(pipeline, eval_task, eval_episodes, eval_seed, eval_cond_task);
    std::cout << "task=" << eval_task << " condition_task="
              << (eval_cond_task < 0 ? eval_task : eval_cond_task)
              << " episodes=" << result.episodes << " success_rate="
              << format_metric_value(result.success_rate)
              << " mean_return=" << format_metric_value(result.mean_return) << "\n";
    return 0;
  }
  if (align->parsed()) {
    const Pipeline pipeline = load_pipeline(align_ckpt);
    const OfflineDataset data = load_dataset(align_dataset);
    RunLock lock(align_out);
    fs::create_directories(align_out + "/plots");
    const AlignmentResult result = alignment_sweep(pipeline, data, align_task,
                                                   {0.0, 0.25, 0.5, 0.75, 1.0}, align_episodes,
                                                   align_seed);
    write_alignment_csv(align_out + "/plots/alignment.csv", result);
    write_alignment_svg(align_out + "/plots/alignment.svg", result);
    std::cout << "alignment spearman=" << format_metric_value(result.spearman) << " ("
              << align_out << "/plots/alignment.csv)\n";
    return 0;
  }
  if (embed->parsed()) {
    const Pipeline pipeline = load_pipeline(embed_ckpt);
    const OfflineDataset data = load_dataset(embed_dataset);
    const EmbeddingReportPaths paths =
        embedding_report(pipeline.encoder, pipeline.wstar, data, embed_out, embed_seed);
    std::cout << "wrote " << paths.csv_path << " and " << paths.svg_path << "\n";
    return 0;
  }
  if (ablate->parsed()) {
    const RunConfig config = ablate_cfg.resolve();
    const OfflineDataset data = load_dataset(ablate_dataset);
    AblationSweep sweep;
    std::vector<double> values;
    if (ablate_sweep == "dim") {
      sweep = AblationSweep::repr_dim;
      values = {1, 8, 16, 32, 64};
    } else if (ablate_sweep == "zeta") {
      sweep = AblationSweep::zeta;
      values = {0.0, config.zeta};
    } else {
      throw std::invalid_argument("--sweep must be 'dim' or 'zeta'");
    }
    if (!ablate_values.empty()) {
      values.clear();
      std::stringstream ss(ablate_values);
      std::string item;
      while (std::getline(ss, item, ',')) values.push_back(std::stod(item));
    }
    RunLock lock(ablate_out);
    const std::string digest = file_digest(ablate_dataset);
    const auto cells = ablation_runner(config, sweep, values, data, digest);
    write_ablation_csv(ablate_out + "/ablation.csv", cells);
    std::cout << "wrote " << ablate_out << "/ablation.csv (" << cells.size() << " cells)\n";
    return 0;
  }
  if (inspect->parsed()) {
    std::ifstream probe(inspect_path, std::ios::binary);
    if (!probe) throw std::runtime_error("cannot open " + inspect_path);
    char magic[8] = {};
    probe.read(magic, 8);
    if (std::memcmp(magic, "CAMPDS1\n", 8) == 0) {
      std::cout << dataset_header_json(inspect_path) << "\n";
    } else if (std::memcmp(magic, "CAMPCKPT", 8) == 0) {
      std::cout << checkpoint_header_json(inspect_path) << "\n";
    } else {
      throw std::invalid_argument(inspect_path + ": unrecognized file magic");
    }
    return 0;
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  try {
    return dispatch(args);
  } catch (const std::invalid_argument& e) {
    std::cerr << "camp: error: invalid: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "camp: error: runtime: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace camp
