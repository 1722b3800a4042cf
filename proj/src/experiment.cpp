#include "idlab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include "idlab/constructions.hpp"
#include "idlab/data_io.hpp"
#include "idlab/errors.hpp"
#include "idlab/linalg.hpp"
#include "idlab/oracles.hpp"
#include "idlab/random.hpp"

namespace idlab {
namespace fs = std::filesystem;

namespace {

struct RawSplit {
  Tensor images;  // N x C x H x W, 0..255
  std::vector<int> labels;
};

RawSplit load_split(const DataConfig& d, bool test) {
  if (d.dataset == "synthetic") throw ParameterError("the synthetic dataset has no image files");
  if (d.dataset == "cifar10") {
    CifarData c = load_cifar10(test ? d.cifar_test : d.cifar_train);
    return {std::move(c.images), std::move(c.labels)};
  }
  RawSplit s;
  s.images = load_idx_images(test ? d.test_images : d.train_images);
  s.labels = load_idx_labels(test ? d.test_labels : d.train_labels);
  if (s.labels.size() != s.images.dim(0)) {
    throw FormatError("image and label files disagree on the number of items", 0);
  }
  return s;
}

std::size_t target_size(const DataConfig& d, std::size_t native) { return d.image_size ? d.image_size : native; }

Tensor prepared_item(const RawSplit& s, std::size_t i, std::size_t size) {
  const Tensor img = normalize(batch_item(s.images, i));
  return resize_area(img, size, size);
}

std::string ext(ImageFormat f) { return f == ImageFormat::png ? ".png" : ".pgm"; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

ByteImage grid_of(const std::vector<std::vector<Tensor>>& rows, ValueMapping mapping) {
  std::vector<std::vector<ByteImage>> tiles;
  for (const auto& r : rows) {
    auto& out = tiles.emplace_back();
    for (const auto& t : r) out.push_back(to_bytes(t, mapping));
  }
  return tile_grid(tiles);
}

void save_grid(const ByteImage& img, const fs::path& path, ImageFormat f) {
  if (f == ImageFormat::png) {
    write_png(img, path);
  } else {
    write_pgm(img, path);
  }
}

// Evaluation patterns at the given geometry. digit_blend operands are test
// split indices; datasets without image files skip them.
std::vector<NamedImage> eval_patterns(const ExperimentConfig& cfg, std::size_t channels, std::size_t size,
                                      const RawSplit* digits) {
  std::vector<NamedImage> out;
  for (std::size_t i = 0; i < cfg.eval.patterns.size(); ++i) {
    PatternSpec p = parse_pattern(cfg.eval.patterns[i]);
    if (p.kind == PatternKind::digit_blend) {
      if (!digits) continue;
      const std::size_t n = digits->images.dim(0);
      if (p.index_a >= n || p.index_b >= n) {
        throw ParameterError("digit_blend index out of range in pattern " + cfg.eval.patterns[i]);
      }
      p.a = prepared_item(*digits, p.index_a, size);
      p.b = prepared_item(*digits, p.index_b, size);
      if (p.a.dim(0) != channels) {
        p.a = replicate_channels(p.a, channels);
        p.b = replicate_channels(p.b, channels);
      }
    }
    Rng rng(substream(RngState{cfg.seed, 1, 0}, purpose::eval, i));
    out.push_back({pattern_label(p), gen_pattern(p, size, channels, rng)});
  }
  return out;
}

std::string trace_csv(const std::vector<TracePoint>& trace) {
  std::string s = "step,lr,loss\n";
  for (const auto& p : trace) s += std::to_string(p.step) + "," + format_double(p.lr) + "," + format_double(p.loss) + "\n";
  return s;
}

bool is_cnn(const NetworkSpec& spec) { return spec.convolutional(); }

double mean_loss(const Network& net, const std::vector<Tensor>& examples) {
  double total = 0.0;
  for (const auto& x : examples) total += loss_mse(predict(net, x), x);
  return total / static_cast<double>(examples.size());
}

}  // namespace

std::vector<NamedImage> evaluation_patterns(const ExperimentConfig& cfg, std::size_t channels, std::size_t size) {
  std::optional<RawSplit> digits;
  if (cfg.data.dataset != "synthetic") digits = load_split(cfg.data, true);
  return eval_patterns(cfg, channels, size, digits ? &*digits : nullptr);
}

TrainingSet load_training_set(const ExperimentConfig& cfg) {
  const DataConfig& d = cfg.data;
  TrainingSet ts;
  if (d.dataset == "synthetic") {
    ts.channels = d.synthetic_channels;
    ts.size = target_size(d, d.synthetic_size);
    Rng rng(substream(RngState{d.train_index_seed, 0, 0}, purpose::data, 0));
    for (std::size_t i = 0; i < d.n_train_examples; ++i) {
      ts.examples.push_back(rng.sample(Gaussian{0.0, 1.0}, {ts.channels, ts.size, ts.size}));
    }
    return ts;
  }
  const RawSplit s = load_split(d, false);
  const std::size_t n = s.images.dim(0);
  ts.channels = s.images.dim(1);
  ts.size = target_size(d, s.images.dim(2));
  if (!d.train_indices.empty()) {
    ts.indices = d.train_indices;
  } else {
    const auto first = std::find(s.labels.begin(), s.labels.end(), d.train_label);
    if (first == s.labels.end()) throw ParameterError("no training item has label " + std::to_string(d.train_label));
    const std::size_t a = static_cast<std::size_t>(first - s.labels.begin());
    ts.indices.push_back(a);
    if (d.n_train_examples > n) throw ParameterError("n_train_examples exceeds the dataset size");
    std::vector<std::size_t> rest(n);
    std::iota(rest.begin(), rest.end(), 0);
    rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(a));
    Rng rng(substream(RngState{d.train_index_seed, 0, 0}, purpose::data, 1));
    for (std::size_t k = 0; k + 1 < d.n_train_examples; ++k) {
      const std::size_t j = k + rng.below(rest.size() - k);
      std::swap(rest[k], rest[j]);
      ts.indices.push_back(rest[k]);
    }
  }
  for (std::size_t i : ts.indices) {
    if (i >= n) throw ParameterError("training index " + std::to_string(i) + " out of range");
    ts.examples.push_back(prepared_item(s, i, ts.size));
  }
  return ts;
}

LabeledSet load_eval_set(const ExperimentConfig& cfg, bool test_split, std::size_t count) {
  const RawSplit s = load_split(cfg.data, test_split);
  const std::size_t n = s.images.dim(0);
  if (count > n) throw ParameterError("requested " + std::to_string(count) + " items from a split of " + std::to_string(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(substream(RngState{cfg.data.train_index_seed, 0, 0}, purpose::data, test_split ? 3 : 2));
  for (std::size_t k = 0; k < count; ++k) std::swap(order[k], order[k + rng.below(n - k)]);
  const std::size_t size = target_size(cfg.data, s.images.dim(2));
  LabeledSet out;
  for (std::size_t k = 0; k < count; ++k) {
    out.images.push_back(prepared_item(s, order[k], size));
    out.labels.push_back(s.labels[order[k]]);
  }
  return out;
}

TrainResult train_identity(Network& net, const std::vector<Tensor>& examples, const OptimizerSpec& opt,
                           const TrainConfig& train, const RngState& batch_state, const TraceCallback& on_trace) {
  if (examples.empty()) throw ParameterError("no training examples");
  validate(opt);
  const std::size_t n = examples.size();
  const bool full = n <= train.batch_size;
  OptimizerState state;
  TrainResult res;
  auto record = [&](const TracePoint& p) {
    res.trace.push_back(p);
    if (on_trace) on_trace(p);
  };
  std::vector<std::size_t> order(n);
  std::vector<Tensor> batch;
  for (std::size_t t = 0; t < opt.total_steps; ++t) {
    BackwardResult br;
    if (n == 1) {
      br = backward(net, examples[0], examples[0]);
    } else if (full) {
      br = backward_batch(net, examples, examples);
    } else {
      std::iota(order.begin(), order.end(), 0);
      Rng rng(substream(batch_state, purpose::batch, t));
      batch.clear();
      for (std::size_t k = 0; k < train.batch_size; ++k) {
        std::swap(order[k], order[k + rng.below(n - k)]);
        batch.push_back(examples[order[k]]);
      }
      br = backward_batch(net, batch, batch);
    }
    const double lr = lr_at_step(opt, t);
    if (!std::isfinite(br.loss)) {
      record({t, lr, br.loss});
      res.ok = false;
      res.failure = "loss became non-finite";
      res.failed_step = t;
      break;
    }
    const bool stop = train.early_stop_loss > 0.0 && br.loss < train.early_stop_loss;
    if (t % train.trace_every == 0 || t + 1 == opt.total_steps || stop) record({t, lr, br.loss});
    if (stop) break;
    try {
      optimizer_step(opt, state, net.params, br.grads);
    } catch (const DivergenceError& e) {
      res.ok = false;
      res.failure = e.what();
      res.failed_step = e.step();
      break;
    }
    res.steps_run = t + 1;
  }
  res.final_loss = mean_loss(net, examples);
  if (res.ok && !std::isfinite(res.final_loss)) {
    res.ok = false;
    res.failure = "final loss is non-finite";
    res.failed_step = res.steps_run;
  }
  return res;
}

nlohmann::json RunRecord::to_json() const {
  nlohmann::json j;
  j["schema"] = "idlab-run/1";
  j["status"] = ok ? "ok" : "failed";
  if (!ok) {
    j["failure"] = {{"message", failure}};
    if (failed_step) j["failure"]["step"] = *failed_step;
  }
  nlohmann::json c;
  const auto tree = to_ptree(config);
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      c[name] = node.data();
    } else {
      for (const auto& [key, leaf] : node) c[name][key] = leaf.data();
    }
  }
  j["config"] = c;
  j["train_indices"] = train_indices;
  j["metrics"] = metrics;
  j["wall_seconds"] = wall_seconds;
  j["trace"] = {{"file", "trace.csv"}, {"points", trace.size()}};
  if (!trace.empty()) {
    j["trace"]["first_loss"] = trace.front().loss;
    j["trace"]["last_loss"] = trace.back().loss;
  }
  j["manifest"] = manifest;
  return j;
}

RunRecord run_train(const ExperimentConfig& cfg_in, const TraceCallback& on_trace) {
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.config = cfg_in;
  const fs::path out = cfg_in.out_dir;
  fs::create_directories(out / "grids");
  fs::create_directories(out / "metrics");

  const TrainingSet ts = load_training_set(cfg_in);
  rec.train_indices = ts.indices;
  if (!ts.indices.empty()) rec.config.data.train_indices = ts.indices;
  const ExperimentConfig& cfg = rec.config;
  save_config(cfg, out / "config.resolved");
  rec.manifest.push_back("config.resolved");

  Network net = build_network(model_spec(cfg, ts.channels, ts.size));
  save_params(out / "weights.init", net.initial_params);
  rec.manifest.push_back("weights.init");

  const TrainResult tr = train_identity(net, ts.examples, cfg.optimizer, cfg.train, RngState{cfg.seed, 0, 0}, on_trace);
  rec.trace = tr.trace;
  rec.ok = tr.ok;
  rec.failure = tr.failure;
  rec.failed_step = tr.failed_step;
  save_params(out / "weights.final", net.params);
  rec.manifest.push_back("weights.final");
  write_text(out / "trace.csv", trace_csv(tr.trace));
  rec.manifest.push_back("trace.csv");

  const ParamCount pc = count_params(net.spec);
  rec.metrics["final_loss"] = tr.final_loss;
  rec.metrics["steps_run"] = static_cast<double>(tr.steps_run);
  rec.metrics["params"] = static_cast<double>(pc.with_bias);
  rec.metrics["params_weights_only"] = static_cast<double>(pc.weights_only);
  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [k, v] : rec.metrics) rows.push_back({k, format_double(v)});
    write_csv(out / "metrics" / "train.csv", {"metric", "value"}, rows);
    rec.manifest.push_back("metrics/train.csv");
  }

  if (tr.ok) {
    std::optional<RawSplit> digits;
    if (cfg.data.dataset != "synthetic") digits = load_split(cfg.data, true);
    std::vector<std::vector<Tensor>> rows;
    for (const auto& x : ts.examples) rows.push_back({x, predict(net, x)});
    for (const auto& p : eval_patterns(cfg, ts.channels, ts.size, digits ? &*digits : nullptr)) {
      rows.push_back({p.image, predict(net, p.image)});
    }
    const std::string name = "grids/predictions" + ext(cfg.eval.image_format);
    save_grid(grid_of(rows, ValueMapping::normalized), out / name, cfg.eval.image_format);
    rec.manifest.push_back(name);
  }

  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  rec.manifest.push_back("report.json");
  write_text(out / "report.json", rec.to_json().dump(2) + "\n");
  return rec;
}

ExperimentConfig load_run_config(const fs::path& run_dir) {
  const fs::path p = run_dir / "config.resolved";
  if (!fs::exists(p)) throw IoError("missing " + p.string());
  return load_config(p);
}

Network load_run_network(const ExperimentConfig& cfg, const fs::path& run_dir, const char* weights) {
  const fs::path wf = run_dir / weights;
  const fs::path wi = run_dir / "weights.init";
  if (!fs::exists(wf)) throw IoError("missing weights " + wf.string());
  NetworkSpec spec;
  if (cfg.data.dataset == "synthetic") {
    spec = model_spec(cfg, cfg.data.synthetic_channels, target_size(cfg.data, cfg.data.synthetic_size));
  } else {
    const RawSplit s = load_split(cfg.data, false);
    spec = model_spec(cfg, s.images.dim(1), target_size(cfg.data, s.images.dim(2)));
  }
  Network net;
  net.spec = spec;
  net.params = load_params(wf, spec);
  net.initial_params = fs::exists(wi) ? load_params(wi, spec) : net.params;
  return net;
}

std::vector<std::string> run_analysis(const ExperimentConfig& cfg, const fs::path& run_dir) {
  const Network net = load_run_network(cfg, run_dir);
  const TrainingSet ts = load_training_set(cfg);
  const Tensor& xhat = ts.examples.front();
  const std::set<std::string> want(cfg.eval.analyses.begin(), cfg.eval.analyses.end());
  const std::string fx = ext(cfg.eval.image_format);
  const bool has_labels = cfg.data.dataset != "synthetic";
  fs::create_directories(run_dir / "metrics");
  fs::create_directories(run_dir / "grids");
  std::vector<std::string> manifest;
  auto emit_csv = [&](const std::string& name, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
    write_csv(run_dir / name, header, rows);
    manifest.push_back(name);
  };
  auto emit_grid = [&](const std::string& stem, const std::vector<std::vector<Tensor>>& rows, ValueMapping m) {
    const std::string name = stem + fx;
    save_grid(grid_of(rows, m), run_dir / name, cfg.eval.image_format);
    manifest.push_back(name);
  };

  if (want.count("heatmap") || want.count("curves")) {
    const RngState st{cfg.seed, 0, 0};
    const CorrelationHeatmap h = reference_heatmap({predictor(net)}, {"trained"}, xhat, cfg.eval.rho_grid,
                                                   cfg.eval.samples_per_cell, st, cfg.eval.correlation);
    if (want.count("heatmap")) {
      std::vector<std::vector<std::string>> rows;
      std::vector<Tensor> inputs;
      std::vector<Tensor> outputs;
      for (std::size_t c = 0; c < h.rho.size(); ++c) {
        rows.push_back({"trained", format_double(h.rho[c]), format_double(h.corr_identity.at(0, c)),
                        format_double(h.corr_constant.at(0, c))});
        Rng rng(substream(st, purpose::eval, c * h.samples_per_cell));
        inputs.push_back(gen_correlated_image(xhat, h.rho[c], rng, cfg.eval.correlation));
        outputs.push_back(predict(net, inputs.back()));
      }
      emit_csv("metrics/heatmap.csv", {"model", "rho", "corr_identity", "corr_constant"}, rows);
      emit_grid("grids/heatmap", {inputs, outputs}, ValueMapping::normalized);
    }
    if (want.count("curves")) {
      const CorrelationCurve curve = mean_correlation_curve(h);
      emit_csv("metrics/mean_corr.csv", {"model", "corr_identity", "corr_constant"},
               {{"trained", format_double(curve.identity[0]), format_double(curve.constant[0])}});
    }
  }

  if (want.count("probe") && has_labels) {
    const LabeledSet train = load_eval_set(cfg, false, cfg.eval.probe_train);
    const LabeledSet test = load_eval_set(cfg, true, cfg.eval.probe_test);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t level = 0; level <= representation_depth(net.spec); ++level) {
      rows.push_back({std::to_string(level), format_double(probe_error_rate(net, level, train, test))});
    }
    emit_csv("metrics/probe.csv", {"level", "error_rate"}, rows);
  }

  if (want.count("channels") && is_cnn(net.spec)) {
    // Colour inputs are shown (and matched against) as their channel mean.
    const std::size_t P = xhat.dim(1) * xhat.dim(2);
    Tensor gray({1, xhat.dim(1), xhat.dim(2)});
    for (std::size_t c = 0; c < xhat.dim(0); ++c)
      for (std::size_t i = 0; i < P; ++i) gray[i] += xhat[c * P + i] / static_cast<double>(xhat.dim(0));
    std::vector<Tensor> row{gray};
    for (std::size_t level = 1; level <= representation_depth(net.spec); ++level) {
      const Tensor act = layer_representation(net, xhat, level);
      row.push_back(channel_viz(act, cfg.eval.viz, &gray, 0).reshaped({1, act.dim(1), act.dim(2)}));
    }
    emit_grid("grids/channels", {row}, ValueMapping::minmax);
  }

  if (want.count("weights")) {
    std::vector<std::vector<std::string>> rows;
    const auto layers = param_layer_indices(net.spec);
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const auto& p = net.params[layers[k]];
      const auto& p0 = net.initial_params[layers[k]];
      const bool residual = net.spec.layers[layers[k]].kind == LayerKind::residual_fc_block;
      const bool bias = net.spec.layers[layers[k]].has_bias;
      const std::size_t stride = bias ? 2 : 1;
      for (std::size_t t = 0; t < p.size(); t += stride) {
        const std::string name = residual ? "W" + std::to_string(t / stride + 1) : "W";
        rows.push_back({std::to_string(k), name, format_double(weight_distance(p0[t], p[t]))});
      }
    }
    emit_csv("metrics/weight_distance.csv", {"layer", "tensor", "relative_distance"}, rows);
  }

  std::optional<RawSplit> digits;
  if ((want.count("sizes") || want.count("upper")) && is_cnn(net.spec) && has_labels) {
    digits = load_split(cfg.data, true);
  }
  if (want.count("sizes") && is_cnn(net.spec)) {
    for (std::size_t s : cfg.eval.input_sizes) {
      std::vector<std::vector<Tensor>> rows;
      for (const auto& p : eval_patterns(cfg, ts.channels, s, digits ? &*digits : nullptr)) {
        rows.push_back({p.image, eval_at_size(net, p.image)});
      }
      emit_grid("grids/size-" + std::to_string(s), rows, ValueMapping::normalized);
    }
  }

  std::size_t convs = 0;
  for (const auto& l : net.spec.layers) convs += l.kind == LayerKind::conv2d;
  if (want.count("upper") && is_cnn(net.spec) && convs >= 2) {
    std::vector<std::vector<Tensor>> rows;
    for (const auto& p : eval_patterns(cfg, 1, ts.size, digits ? &*digits : nullptr)) {
      std::vector<Tensor> row{p.image};
      for (std::size_t start = 1; start < convs; ++start) {
        const Tensor y = upper_subnet_predict(net, start, p.image);
        row.push_back(y.dim(0) == 1 ? y : channel_viz(y, VizMode::index, nullptr, 0).reshaped({1, y.dim(1), y.dim(2)}));
      }
      rows.push_back(std::move(row));
    }
    emit_grid("grids/upper", rows, ValueMapping::normalized);
  }

  nlohmann::json j;
  j["schema"] = "idlab-analysis/1";
  j["analyses"] = cfg.eval.analyses;
  j["manifest"] = manifest;
  write_text(run_dir / "analysis.json", j.dump(2) + "\n");
  manifest.push_back("analysis.json");
  return manifest;
}

// ---------------------------------------------------------------------------
// Oracle and construction checks

bool CheckReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

nlohmann::json CheckReport::to_json() const {
  nlohmann::json j;
  j["schema"] = "idlab-checks/1";
  j["passed"] = all_passed();
  j["checks"] = nlohmann::json::array();
  for (const auto& c : checks) {
    j["checks"].push_back({{"name", c.name},
                           {"group", c.group},
                           {"measured", c.measured},
                           {"threshold", c.threshold},
                           {"passed", c.passed},
                           {"detail", c.detail}});
  }
  return j;
}

namespace {

class CheckCollector {
 public:
  CheckCollector(const CheckOptions& opts, std::string group) : opts_(opts), group_(std::move(group)) {}

  void add(std::string name, double measured, double threshold, std::string detail = {}) {
    const double thr = opts_.tolerance ? *opts_.tolerance : threshold;
    const bool ok = std::isfinite(measured) && measured <= thr;
    report_.checks.push_back({std::move(name), group_, measured, thr, ok, std::move(detail)});
  }
  // Runs body; an exception becomes a failed check.
  template <class F>
  void guarded(const std::string& name, F&& body) {
    try {
      body();
    } catch (const std::exception& e) {
      report_.checks.push_back({name, group_, NAN, opts_.tolerance.value_or(0.0), false, e.what()});
    }
  }

  CheckReport take() { return std::move(report_); }

 private:
  const CheckOptions& opts_;
  std::string group_;
  CheckReport report_;
};

OptimizerSpec plain_gd(double lr, std::size_t steps) {
  OptimizerSpec o;
  o.kind = OptimizerKind::sgd;
  o.base_lr = lr;
  o.momentum = 0.0;
  o.total_steps = steps;
  o.milestones.clear();
  return o;
}

// Gradient descent on 0.5 * mean((X W - Y)^2) with step 1 / L.
Tensor gd_linear(Tensor w, const Tensor& x, const Tensor& y, std::size_t steps) {
  const double s0 = singular_values(x).front();
  const double scale = 1.0 / static_cast<double>(y.size());
  const double lr = 1.0 / (s0 * s0 * scale);
  for (std::size_t t = 0; t < steps; ++t) {
    const Tensor r = matmul(x, w) - y;
    w -= (lr * scale) * matmul(transpose(x), r);
  }
  return w;
}

// 1 x n x n image supported on its last `rows` rows; nullity 5 * (3 - rows)
// for 5x5 kernels when rows < 3.
Tensor bottom_rows_image(std::size_t n, std::size_t rows, Rng& rng) {
  Tensor img({1, n, n});
  for (std::size_t i = n - rows; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) img.at(0, i, j) = rng.gaussian();
  return img;
}

double train_conv1_gd(Network& net, const Tensor& image, std::size_t steps) {
  const PatchMatrix pm = extract_patches(image, net.spec.layers[0].kh, net.spec.layers[0].kw);
  const double s0 = singular_values(pm.x).front();
  const double lr = static_cast<double>(image.size()) / (s0 * s0);
  const TrainResult tr = train_identity(net, {image}, plain_gd(lr, steps), TrainConfig{}, RngState{});
  return tr.final_loss;
}

double max_grad_rel_error(Network net, const Tensor& x, const Tensor& y) {
  const BackwardResult br = backward(net, x, y);
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t l = 0; l < net.params.size(); ++l) {
    for (std::size_t t = 0; t < net.params[l].size(); ++t) {
      for (std::size_t i = 0; i < net.params[l][t].size(); ++i) {
        double& p = net.params[l][t][i];
        const double keep = p;
        p = keep + h;
        const double up = loss_mse(predict(net, x), y);
        p = keep - h;
        const double down = loss_mse(predict(net, x), y);
        p = keep;
        const double fd = (up - down) / (2.0 * h);
        const double bp = br.grads[l][t][i];
        const double scale = std::max(std::abs(fd), std::abs(bp));
        if (scale > 1e-10) worst = std::max(worst, std::abs(fd - bp) / scale);
      }
    }
  }
  return worst;
}

}  // namespace

CheckReport run_oracle_checks(const CheckOptions& opts) {
  CheckCollector cc(opts, "oracle");
  const RngState root{opts.seed, 0, 0};

  cc.guarded("projection_gd_vs_closed_form", [&] {
    NetworkSpec spec = dense_stack(1, 16, 16, false, false);
    spec.seed = opts.seed;
    Network net = build_network(spec);
    Rng rng(substream(root, purpose::oracle, 1));
    const Tensor x = rng.sample(Gaussian{}, {1, 1, 16});
    train_identity(net, {x}, plain_gd(0.01, 100000), TrainConfig{}, root);
    const Tensor expect = theorem1_weights(net.initial_params[0][0], x.reshaped({16}));
    cc.add("projection_gd_vs_closed_form", relative_error(net.params[0][0], expect), 1e-6, "d=16, lr 0.01, 1e5 steps");
  });

  cc.guarded("min_norm_overparam", [&] {
    Rng rng(substream(root, purpose::oracle, 2));
    const Tensor x = rng.sample(Gaussian{}, {2, 8});
    const Tensor y = rng.sample(Gaussian{}, {2, 8});
    const Tensor w0 = rng.sample(Gaussian{0.0, 0.3}, {8, 8});
    const Tensor gd = gd_linear(w0, x, y, 20000);
    cc.add("min_norm_overparam", relative_error(gd, gd_limit_overparam(w0, x, y)), 1e-6, "N=2, D=8, d=8");
  });

  cc.guarded("least_squares_underparam", [&] {
    Rng rng(substream(root, purpose::oracle, 3));
    const Tensor x = rng.sample(Gaussian{}, {20, 4});
    const Tensor y = rng.sample(Gaussian{}, {20, 4});
    const Tensor w0 = rng.sample(Gaussian{0.0, 0.3}, {4, 4});
    const Tensor gd = gd_linear(w0, x, y, 20000);
    cc.add("least_squares_underparam", relative_error(gd, least_squares_underparam(x, y)), 1e-6, "N=20, D=4");
    const Tensor lambda = rng.sample(Gaussian{}, {4, 4});
    const Tensor fit = least_squares_underparam(x, matmul(x, lambda));
    cc.add("least_squares_exact_fit", max_abs_diff(fit, lambda), 1e-8, "Y = X Lambda");
  });

  cc.guarded("conv1_underparam_gd", [&] {
    Rng rng(substream(root, purpose::oracle, 4));
    const Tensor img = rng.sample(Gaussian{}, {1, 10, 10});
    NetworkSpec spec = conv_stack(1, 1, 3, 1, false);
    spec.height = spec.width = 10;
    spec.seed = opts.seed;
    Network net = build_network(spec);
    train_conv1_gd(net, img, 20000);
    const Tensor closed = conv1_closed_form(conv_to_flat(net.initial_params[0][0]), extract_patches(img, 3, 3));
    cc.add("conv1_underparam_gd", relative_error(conv_to_flat(net.params[0][0]), closed), 1e-6, "10x10 noise, 3x3");
  });

  cc.guarded("conv1_overparam_gd", [&] {
    Rng rng(substream(root, purpose::oracle, 5));
    const Tensor img = bottom_rows_image(8, 1, rng);
    NetworkSpec spec = conv_stack(1, 1, 5, 1, false);
    spec.height = spec.width = 8;
    spec.seed = opts.seed;
    Network net = build_network(spec);
    train_conv1_gd(net, img, 50000);
    const Tensor closed = conv1_closed_form(conv_to_flat(net.initial_params[0][0]), extract_patches(img, 5, 5));
    cc.add("conv1_overparam_gd", relative_error(conv_to_flat(net.params[0][0]), closed), 1e-6,
           "8x8 image on its last row, 5x5");
  });

  cc.guarded("nullity_bound", [&] {
    const std::size_t trials = 20;
    std::vector<double> ratios;
    for (std::size_t t = 0; t < trials; ++t) {
      Rng rng(substream(root, purpose::oracle, 100 + t));
      const Tensor img = bottom_rows_image(16, 1 + t % 2, rng);
      const PatchMatrix pm = extract_patches(img, 5, 5);
      const Tensor w0 = rng.sample(Gaussian{0.0, 0.2}, {25, 1});
      const Tensor w = conv1_closed_form(w0, pm);
      Thm2BoundInputs in;
      in.nullity = 25 - rank_with_tol(pm.x);
      const double bound = thm2_bound_unchecked(in);
      double worst = 0.0;
      for (std::size_t k = 0; k < 10; ++k) {
        const Tensor x = rng.sample(Uniform{-1.0, 1.0}, {1, 16, 16});
        const Tensor y = conv1_apply(w, x, 5, 5);
        double se = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) se += (y[i] - x[i]) * (y[i] - x[i]);
        worst = std::max(worst, se / static_cast<double>(x.size()));
      }
      ratios.push_back(worst / bound);
    }
    std::sort(ratios.begin(), ratios.end());
    cc.add("nullity_bound", ratios[18], 1.0, "19th smallest of 20 MSE/bound ratios");
  });

  cc.guarded("gradient_check", [&] {
    Rng rng(substream(root, purpose::oracle, 6));
    double worst = 0.0;
    NetworkSpec dense = dense_stack(3, 6, 7, true);
    dense.seed = opts.seed;
    NetworkSpec conv = conv_stack(2, 3, 3, 1);
    conv.height = conv.width = 5;
    conv.seed = opts.seed;
    NetworkSpec res = residual_stack(2, 6);
    res.seed = opts.seed;
    for (const NetworkSpec& s : {dense, conv, res}) {
      Network net = build_network(s);
      for (auto& layer : net.params)
        for (auto& t : layer)
          for (auto& v : t.values()) v += 0.1 * rng.gaussian();
      const Tensor x = rng.sample(Gaussian{}, s.input_shape());
      const Tensor y = rng.sample(Gaussian{}, s.input_shape());
      worst = std::max(worst, max_grad_rel_error(net, x, y));
    }
    cc.add("gradient_check", worst, 1e-4, "central differences, h = 1e-5");
  });

  cc.guarded("rho_generator", [&] {
    Rng rng(substream(root, purpose::oracle, 7));
    const Tensor xhat = rng.sample(Gaussian{}, {1, 12, 12});
    const double norm = frobenius_norm(xhat);
    double worst_corr = 0.0;
    double worst_norm = 0.0;
    for (double rho : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      for (int k = 0; k < 200; ++k) {
        const Tensor x = gen_correlated_image(xhat, rho, rng);
        worst_corr = std::max(worst_corr, std::abs(pearson_corr(x, xhat).value - rho));
        worst_norm = std::max(worst_norm, std::abs(frobenius_norm(x) - norm) / norm);
      }
    }
    cc.add("rho_generator_corr", worst_corr, 1e-6);
    cc.add("rho_generator_norm", worst_norm, 1e-6);
  });

  CheckReport out = cc.take();
  CheckReport cons = run_construct_checks(opts);
  out.checks.insert(out.checks.end(), cons.checks.begin(), cons.checks.end());
  return out;
}

CheckReport run_construct_checks(const CheckOptions& opts) {
  CheckCollector cc(opts, "construction");
  auto check = [&](const std::string& name, Network net, std::size_t c, std::size_t size) {
    cc.guarded(name, [&] {
      net.spec.channels = c;
      net.spec.height = net.spec.width = size;
      const double err = verify_identity(net, 3, opts.seed);
      Rng rng(substream(RngState{opts.seed, 0, 0}, purpose::verify, 1));
      const Tensor x = rng.sample(Gaussian{}, net.spec.input_shape());
      const double g = grad_norm(backward(net, x, x).grads);
      cc.add(name, err, 1e-10, "max |f(x) - x|");
      cc.add(name + "_grad", g, 1e-10, "gradient norm at the construction");
    });
  };
  for (std::size_t size : {7, 14, 28}) {
    const std::size_t d = size * size;
    for (std::size_t depth : {1, 3}) {
      check("linear_fcn_d" + std::to_string(depth) + "_s" + std::to_string(size), identity_linear_fcn(depth, d), 1, size);
    }
    for (std::size_t depth : {2, 4}) {
      Network n = identity_relu_fcn(depth, d);
      n.spec.height = n.spec.width = size;
      check("relu_fcn_d" + std::to_string(depth) + "_s" + std::to_string(size), n, 1, size);
    }
  }
  for (std::size_t size : {7, 14, 28, 56, 112}) {
    for (std::size_t depth : {1, 2, 5}) {
      for (std::size_t c : {1, 3}) {
        check("cnn_d" + std::to_string(depth) + "_c" + std::to_string(c) + "_s" + std::to_string(size),
              identity_cnn(depth, c, 5), c, size);
      }
    }
  }
  return cc.take();
}

// ---------------------------------------------------------------------------
// Sweeps

SweepAxis parse_sweep_axis(std::string_view text) {
  for (SweepAxis a : {SweepAxis::depth, SweepAxis::filter_size, SweepAxis::channels, SweepAxis::init,
                      SweepAxis::optimizer, SweepAxis::image_size}) {
    if (sweep_axis_name(a) == text) return a;
  }
  throw ParameterError("unknown sweep axis '" + std::string(text) + "'");
}

std::string_view sweep_axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::depth: return "depth";
    case SweepAxis::filter_size: return "filter_size";
    case SweepAxis::channels: return "channels";
    case SweepAxis::init: return "init";
    case SweepAxis::optimizer: return "optimizer";
    case SweepAxis::image_size: return "image_size";
  }
  return "?";
}

namespace {

std::string axis_key(SweepAxis a) {
  switch (a) {
    case SweepAxis::depth: return "model.depth";
    case SweepAxis::filter_size: return "model.kernel";
    case SweepAxis::channels: return "model.channels";
    case SweepAxis::init: return "model.init";
    case SweepAxis::optimizer: return "optimizer.kind";
    case SweepAxis::image_size: return "data.image_size";
  }
  return {};
}

SweepRow sweep_one(const ExperimentConfig& base, SweepAxis axis, const std::string& value, std::size_t index) {
  SweepRow row;
  row.value = value;
  row.seed = base.seed + index;
  row.run_dir = base.out_dir / (std::string(sweep_axis_name(axis)) + "-" + value);
  try {
    if ((axis == SweepAxis::channels || axis == SweepAxis::filter_size) && base.model.family != "cnn") {
      throw ParameterError("axis " + std::string(sweep_axis_name(axis)) + " needs the cnn family");
    }
    ExperimentConfig cfg = apply_overrides(base, {axis_key(axis) + "=" + value});
    cfg.seed = row.seed;
    cfg.out_dir = row.run_dir;
    const RunRecord rec = run_train(cfg);
    row.final_loss = rec.metrics.at("final_loss");
    if (!rec.ok) throw DivergenceError(rec.failure, rec.failed_step.value_or(0));
    ExperimentConfig acfg = rec.config;
    acfg.eval.analyses = {"heatmap", "curves"};
    run_analysis(acfg, row.run_dir);
    const Network net = load_run_network(acfg, row.run_dir);
    const TrainingSet ts = load_training_set(acfg);
    const CorrelationHeatmap h = reference_heatmap({predictor(net)}, {value}, ts.examples.front(), acfg.eval.rho_grid,
                                                   acfg.eval.samples_per_cell, RngState{acfg.seed, 0, 0},
                                                   acfg.eval.correlation);
    for (std::size_t c = 0; c < h.rho.size(); ++c) {
      row.curve.identity.push_back(h.corr_identity.at(0, c));
      row.curve.constant.push_back(h.corr_constant.at(0, c));
    }
    row.corr_identity = row.curve.identity.front();
    row.corr_constant = row.curve.constant.front();
    row.ok = true;
  } catch (const std::exception& e) {
    row.ok = false;
    row.failure = e.what();
  }
  return row;
}

}  // namespace

SweepReport run_sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<std::string>& values,
                      std::size_t jobs) {
  SweepReport rep;
  rep.axis = axis;
  rep.rho = base.eval.rho_grid;
  if (values.empty()) return rep;
  rep.rows.resize(values.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < values.size(); i = next++) rep.rows[i] = sweep_one(base, axis, values[i], i);
  };
  const std::size_t n = std::clamp<std::size_t>(jobs, 1, values.size());
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  fs::create_directories(base.out_dir);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::vector<std::string>> curves;
  for (const auto& r : rep.rows) {
    rows.push_back({std::string(sweep_axis_name(axis)), r.value, std::to_string(r.seed), r.ok ? "ok" : "failed",
                    format_double(r.final_loss), format_double(r.corr_identity), format_double(r.corr_constant),
                    r.run_dir.string(), r.failure});
    for (std::size_t c = 0; c < r.curve.identity.size(); ++c) {
      curves.push_back({r.value, format_double(rep.rho[c]), format_double(r.curve.identity[c]),
                        format_double(r.curve.constant[c])});
    }
  }
  write_csv(base.out_dir / "sweep.csv",
            {"axis", "value", "seed", "status", "final_loss", "corr_identity_rho_min", "corr_constant_rho_min",
             "run_dir", "failure"},
            rows);
  write_csv(base.out_dir / "sweep_curves.csv", {"value", "rho", "corr_identity", "corr_constant"}, curves);
  return rep;
}

}  // namespace idlab
