#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "idlab/analysis.hpp"
#include "idlab/config.hpp"
#include "idlab/nn.hpp"
#include "idlab/optim.hpp"

namespace idlab {

struct TracePoint {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;  // before the update of this step
};

// Normalised training images, all channels x size x size.
struct TrainingSet {
  std::vector<Tensor> examples;
  std::vector<std::size_t> indices;  // dataset indices (empty for synthetic)
  std::size_t channels = 1;
  std::size_t size = 0;
};

TrainingSet load_training_set(const ExperimentConfig& cfg);
// Normalised, resized labelled images for probing and digit_blend patterns.
LabeledSet load_eval_set(const ExperimentConfig& cfg, bool test_split, std::size_t count);

struct NamedImage {
  std::string label;
  Tensor image;
};

// The configured evaluation patterns at channels x size x size. digit_blend
// operands index the test split and are skipped for synthetic data.
std::vector<NamedImage> evaluation_patterns(const ExperimentConfig& cfg, std::size_t channels, std::size_t size);

struct TrainResult {
  std::vector<TracePoint> trace;
  std::size_t steps_run = 0;
  double final_loss = 0.0;  // evaluated after the last update
  bool ok = true;
  std::string failure;
  std::optional<std::size_t> failed_step;
};

using TraceCallback = std::function<void(const TracePoint&)>;

// Identity-task training loop. Full batch when the set fits in one batch,
// otherwise minibatches drawn from sub-stream (batch, step) of batch_state.
// The trace records step 0, every trace_every-th step and the last step.
TrainResult train_identity(Network& net, const std::vector<Tensor>& examples, const OptimizerSpec& opt,
                           const TrainConfig& train, const RngState& batch_state,
                           const TraceCallback& on_trace = {});

struct RunRecord {
  ExperimentConfig config;
  std::vector<std::size_t> train_indices;
  std::vector<TracePoint> trace;
  std::map<std::string, double> metrics;
  double wall_seconds = 0.0;
  std::vector<std::string> manifest;  // paths relative to the run directory
  bool ok = true;
  std::string failure;
  std::optional<std::size_t> failed_step;

  nlohmann::json to_json() const;
};

// Trains per cfg and writes the run directory cfg.out_dir: config.resolved,
// weights.init, weights.final, trace.csv, grids/predictions.*, report.json.
RunRecord run_train(const ExperimentConfig& cfg, const TraceCallback& on_trace = {});

// Reads config.resolved and the weights of a run directory.
ExperimentConfig load_run_config(const std::filesystem::path& run_dir);
Network load_run_network(const ExperimentConfig& cfg, const std::filesystem::path& run_dir,
                         const char* weights = "weights.final");

// Analyses listed in cfg.eval.analyses, written below run_dir. Returns the
// manifest of produced files relative to run_dir and appends it to
// analysis.json.
std::vector<std::string> run_analysis(const ExperimentConfig& cfg, const std::filesystem::path& run_dir);

struct CheckResult {
  std::string name;
  std::string group;  // "oracle" or "construction"
  double measured = 0.0;
  double threshold = 0.0;
  bool passed = false;
  std::string detail;
};

struct CheckReport {
  std::vector<CheckResult> checks;

  bool all_passed() const;
  nlohmann::json to_json() const;
};

struct CheckOptions {
  std::uint64_t seed = 0;
  // Replaces every threshold when set.
  std::optional<double> tolerance;
};

// A check passes when measured <= threshold.
CheckReport run_oracle_checks(const CheckOptions& opts);
CheckReport run_construct_checks(const CheckOptions& opts);

enum class SweepAxis { depth, filter_size, channels, init, optimizer, image_size };
SweepAxis parse_sweep_axis(std::string_view text);
std::string_view sweep_axis_name(SweepAxis a);

struct SweepRow {
  std::string value;
  std::uint64_t seed = 0;
  std::filesystem::path run_dir;
  bool ok = false;
  std::string failure;
  double final_loss = 0.0;
  // Mean correlations at the smallest rho of the grid, and the curves.
  double corr_identity = 0.0;
  double corr_constant = 0.0;
  CorrelationCurve curve;
};

struct SweepReport {
  SweepAxis axis = SweepAxis::depth;
  std::vector<double> rho;
  std::vector<SweepRow> rows;
};

// One run per value under base.out_dir/<axis>-<value>, seed base.seed + i.
// Writes sweep.csv and sweep_curves.csv to base.out_dir. Failed runs are
// recorded and the sweep continues. jobs > 1 runs that many at once.
SweepReport run_sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<std::string>& values,
                      std::size_t jobs = 1);

}  // namespace idlab
