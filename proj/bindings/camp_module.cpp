#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "camp/checkpoint.hpp"
#include "camp/config.hpp"
#include "camp/dataset.hpp"
#include "camp/gaussian.hpp"
#include "camp/harness.hpp"
#include "camp/rng.hpp"
#include "camp/schedule.hpp"

namespace py = pybind11;

namespace {

camp::RunConfig config_from_text(const std::string& text) {
  return camp::parse_config_text(text);
}

}  // namespace

PYBIND11_MODULE(_camp, m) {
  m.doc() = "CAMP core: preference representations, conditional diffusion, control";

  py::class_<camp::RunConfig>(m, "RunConfig")
      .def(py::init(&config_from_text), py::arg("text") = "")
      .def_readwrite("tasks", &camp::RunConfig::tasks)
      .def_readwrite("horizon", &camp::RunConfig::horizon)
      .def_readwrite("episodes_per_task", &camp::RunConfig::episodes_per_task)
      .def_readwrite("pairs_per_task", &camp::RunConfig::pairs_per_task)
      .def_readwrite("repr_dim", &camp::RunConfig::repr_dim)
      .def_readwrite("denoise_steps", &camp::RunConfig::denoise_steps)
      .def_readwrite("zeta", &camp::RunConfig::zeta)
      .def_readwrite("guidance", &camp::RunConfig::guidance)
      .def_readwrite("train_steps", &camp::RunConfig::train_steps)
      .def_readwrite("batch_size", &camp::RunConfig::batch_size)
      .def_readwrite("eval_episodes", &camp::RunConfig::eval_episodes)
      .def_readwrite("seed", &camp::RunConfig::seed)
      .def("serialize", &camp::serialize_config)
      .def("validate", &camp::validate_config);

  m.def("config_keys", &camp::config_keys, "documented config keys");

  m.def(
      "generate_dataset",
      [](const camp::RunConfig& config, const std::string& out_path) {
        camp::BuildDatasetOptions options;
        options.num_tasks = config.tasks;
        options.episodes_per_task = config.episodes_per_task;
        options.episode_steps = config.episode_steps;
        options.segment_horizon = config.horizon;
        options.pairs_per_task = config.pairs_per_task;
        options.quality_levels = config.quality_levels;
        options.env.action_max = config.action_max;
        options.env.controller_gain = config.controller_gain;
        options.seed = config.seed;
        options.intra_only = config.tasks == 1;
        const camp::OfflineDataset data = camp::build_dataset(options);
        camp::save_dataset(data, out_path);
        return camp::file_digest(out_path);
      },
      py::arg("config"), py::arg("out_path"),
      "Build a preference dataset and return its digest");

  m.def("dataset_header", &camp::dataset_header_json, py::arg("path"),
        "JSON header of a .campds file");
  m.def("checkpoint_header", &camp::checkpoint_header_json, py::arg("path"),
        "JSON header of a .campckpt file");
  m.def("file_digest", &camp::file_digest, py::arg("path"));

  m.def(
      "kl_diag_gauss",
      [](const std::vector<double>& mean_p, const std::vector<double>& log_var_p,
         const std::vector<double>& mean_q, const std::vector<double>& log_var_q) {
        camp::GaussianEmbedding p{mean_p, log_var_p};
        camp::GaussianEmbedding q{mean_q, log_var_q};
        return camp::kl_diag_gauss(p, q);
      },
      py::arg("mean_p"), py::arg("log_var_p"), py::arg("mean_q"), py::arg("log_var_q"),
      "Closed-form KL between diagonal Gaussians");

  m.def(
      "cosine_schedule",
      [](int32_t steps) {
        const auto s = camp::DiffusionSchedule::make(steps, camp::ScheduleKind::cosine);
        py::dict out;
        out["alpha"] = s.alpha_vec();
        out["alpha_bar"] = s.alpha_bar_vec();
        out["posterior_var"] = s.posterior_var_vec();
        return out;
      },
      py::arg("steps"));

  m.def(
      "normal_stream",
      [](uint64_t seed, int64_t count) {
        camp::Rng rng(seed);
        std::vector<double> out(static_cast<size_t>(count));
        for (double& v : out) v = rng.normal();
        return out;
      },
      py::arg("seed"), py::arg("count"), "Deterministic standard-normal draws");

  m.def(
      "train",
      [](const camp::RunConfig& config, const std::string& dataset_path,
         const std::string& run_dir) {
        const camp::TrainRunResult result = camp::run_training(config, dataset_path, run_dir);
        py::dict out;
        out["run_dir"] = result.run_dir;
        out["final_checkpoint"] = result.final_checkpoint;
        out["metrics_csv"] = result.metrics_csv;
        out["dataset_digest"] = result.dataset_digest;
        return out;
      },
      py::arg("config"), py::arg("dataset_path"), py::arg("run_dir"),
      "Train the full pipeline; returns the run artifacts");

  m.def(
      "evaluate",
      [](const std::string& checkpoint_path, int32_t task, int32_t episodes, uint64_t seed,
         int32_t condition_task) {
        const camp::Pipeline pipeline =
            camp::Pipeline::from_checkpoint(camp::load_checkpoint(checkpoint_path));
        const camp::ControlEval eval =
            camp::evaluate_control(pipeline, task, episodes, seed, condition_task);
        py::dict out;
        out["success_rate"] = eval.success_rate;
        out["mean_return"] = eval.mean_return;
        out["episodes"] = eval.episodes;
        return out;
      },
      py::arg("checkpoint_path"), py::arg("task"), py::arg("episodes") = 50,
      py::arg("seed") = 0, py::arg("condition_task") = -1,
      "Receding-horizon control evaluation from a checkpoint");

#ifdef VERSION_INFO
  m.attr("__version__") = VERSION_INFO;
#else
  m.attr("__version__") = "dev";
#endif
}
