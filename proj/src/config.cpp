#include "idlab/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>

#include "idlab/errors.hpp"

namespace idlab {
namespace pt = boost::property_tree;

namespace {

std::string join(const std::vector<std::string>& items) { return boost::algorithm::join(items, ";"); }

template <class T>
std::string join_numbers(const std::vector<T>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += format_double(items[i]);
    } else {
      out += std::to_string(items[i]);
    }
  }
  return out;
}

std::vector<std::string> split(const std::string& text, const char* seps) {
  std::vector<std::string> parts;
  std::string trimmed = boost::algorithm::trim_copy(text);
  if (trimmed.empty()) return parts;
  boost::algorithm::split(parts, trimmed, boost::algorithm::is_any_of(seps));
  for (auto& p : parts) boost::algorithm::trim(p);
  return parts;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw ParameterError("config key '" + key + "': cannot parse '" + value + "'");
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const std::string s = boost::algorithm::trim_copy(text);
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) bad_value(key, text);
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string s = boost::algorithm::to_lower_copy(boost::algorithm::trim_copy(text));
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  bad_value(key, text);
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  for (const auto& p : split(text, ",")) out.push_back(parse_number<T>(key, p));
  return out;
}

std::string_view format_name(ImageFormat f) { return f == ImageFormat::png ? "png" : "pgm"; }

ImageFormat parse_format(const std::string& key, const std::string& text) {
  if (text == "pgm") return ImageFormat::pgm;
  if (text == "png") return ImageFormat::png;
  bad_value(key, text);
}

std::string_view viz_name(VizMode m) {
  switch (m) {
    case VizMode::top_singular: return "top_singular";
    case VizMode::max_corr: return "max_corr";
    case VizMode::index: return "index";
  }
  return "?";
}

VizMode parse_viz(const std::string& key, const std::string& text) {
  if (text == "top_singular") return VizMode::top_singular;
  if (text == "max_corr") return VizMode::max_corr;
  if (text == "index") return VizMode::index;
  bad_value(key, text);
}

// Every key that may appear, as "section.key" (root keys have no dot).
std::set<std::string> known_keys() {
  std::set<std::string> keys;
  const pt::ptree defaults = to_ptree(ExperimentConfig{});
  for (const auto& [name, node] : defaults) {
    if (node.empty()) {
      keys.insert(name);
      continue;
    }
    for (const auto& [key, leaf] : node) keys.insert(name + "." + key);
  }
  return keys;
}

void merge_into(pt::ptree& base, const pt::ptree& extra) {
  const auto keys = known_keys();
  for (const auto& [name, node] : extra) {
    if (node.empty()) {
      if (!keys.count(name)) throw ParameterError("unknown config key '" + name + "'");
      base.put(pt::ptree::path_type(name, '/'), node.data());
      continue;
    }
    for (const auto& [key, leaf] : node) {
      const std::string full = name + "." + key;
      if (!keys.count(full)) throw ParameterError("unknown config key '" + full + "'");
      base.put(full, leaf.data());
    }
  }
}

}  // namespace

pt::ptree to_ptree(const ExperimentConfig& cfg) {
  pt::ptree t;
  t.put("seed", cfg.seed);
  t.put("out_dir", cfg.out_dir.string());

  const DataConfig& d = cfg.data;
  t.put("data.dataset", d.dataset);
  t.put("data.train_images", d.train_images.string());
  t.put("data.train_labels", d.train_labels.string());
  t.put("data.test_images", d.test_images.string());
  t.put("data.test_labels", d.test_labels.string());
  t.put("data.cifar_train", d.cifar_train.string());
  t.put("data.cifar_test", d.cifar_test.string());
  t.put("data.n_train_examples", d.n_train_examples);
  t.put("data.train_indices", join_numbers(d.train_indices));
  t.put("data.train_label", d.train_label);
  t.put("data.train_index_seed", d.train_index_seed);
  t.put("data.image_size", d.image_size);
  t.put("data.synthetic_size", d.synthetic_size);
  t.put("data.synthetic_channels", d.synthetic_channels);

  const ModelConfig& m = cfg.model;
  t.put("model.family", m.family);
  t.put("model.depth", m.depth);
  t.put("model.channels", m.channels);
  t.put("model.kernel", m.kernel);
  t.put("model.hidden", m.hidden);
  t.put("model.bias", m.bias ? "true" : "false");
  t.put("model.init", std::string(init_name(m.init)));
  t.put("model.frozen", join_numbers(m.frozen));

  const OptimizerSpec& o = cfg.optimizer;
  t.put("optimizer.kind", std::string(optimizer_name(o.kind)));
  t.put("optimizer.lr", format_double(o.base_lr));
  t.put("optimizer.momentum", format_double(o.momentum));
  t.put("optimizer.beta1", format_double(o.beta1));
  t.put("optimizer.beta2", format_double(o.beta2));
  t.put("optimizer.rms_decay", format_double(o.rms_decay));
  t.put("optimizer.eps", format_double(o.eps));
  t.put("optimizer.total_steps", o.total_steps);
  t.put("optimizer.milestones", join_numbers(o.milestones));
  t.put("optimizer.decay", format_double(o.decay_factor));

  t.put("train.batch_size", cfg.train.batch_size);
  t.put("train.early_stop_loss", format_double(cfg.train.early_stop_loss));
  t.put("train.trace_every", cfg.train.trace_every);

  const EvalConfig& e = cfg.eval;
  t.put("eval.rho_grid", join_numbers(e.rho_grid));
  t.put("eval.samples_per_cell", e.samples_per_cell);
  t.put("eval.patterns", join(e.patterns));
  t.put("eval.input_sizes", join_numbers(e.input_sizes));
  t.put("eval.probe_train", e.probe_train);
  t.put("eval.probe_test", e.probe_test);
  t.put("eval.correlation", std::string(corr_mode_name(e.correlation)));
  t.put("eval.image_format", std::string(format_name(e.image_format)));
  t.put("eval.viz", std::string(viz_name(e.viz)));
  t.put("eval.analyses", boost::algorithm::join(e.analyses, ","));
  return t;
}

ExperimentConfig from_ptree(const pt::ptree& tree) {
  pt::ptree t = to_ptree(ExperimentConfig{});
  merge_into(t, tree);
  auto get = [&](const std::string& key) { return t.get<std::string>(key); };
  auto num = [&]<class T>(const std::string& key, T) { return parse_number<T>(key, get(key)); };

  ExperimentConfig cfg;
  cfg.seed = num("seed", std::uint64_t{});
  cfg.out_dir = get("out_dir");

  DataConfig& d = cfg.data;
  d.dataset = get("data.dataset");
  if (d.dataset != "mnist" && d.dataset != "fashion" && d.dataset != "cifar10" && d.dataset != "synthetic") {
    bad_value("data.dataset", d.dataset);
  }
  d.train_images = get("data.train_images");
  d.train_labels = get("data.train_labels");
  d.test_images = get("data.test_images");
  d.test_labels = get("data.test_labels");
  d.cifar_train = get("data.cifar_train");
  d.cifar_test = get("data.cifar_test");
  d.n_train_examples = num("data.n_train_examples", std::size_t{});
  d.train_indices = parse_list<std::size_t>("data.train_indices", get("data.train_indices"));
  d.train_label = num("data.train_label", int{});
  d.train_index_seed = num("data.train_index_seed", std::uint64_t{});
  d.image_size = num("data.image_size", std::size_t{});
  d.synthetic_size = num("data.synthetic_size", std::size_t{});
  d.synthetic_channels = num("data.synthetic_channels", std::size_t{});
  if (d.n_train_examples == 0) throw ParameterError("data.n_train_examples must be positive");
  if (!d.train_indices.empty() && d.train_indices.size() != d.n_train_examples) {
    throw ParameterError("data.train_indices lists " + std::to_string(d.train_indices.size()) +
                         " indices but data.n_train_examples is " + std::to_string(d.n_train_examples));
  }

  ModelConfig& m = cfg.model;
  m.family = get("model.family");
  if (m.family != "cnn" && m.family != "fcn" && m.family != "relu_fcn" && m.family != "residual_fcn") {
    bad_value("model.family", m.family);
  }
  m.depth = num("model.depth", std::size_t{});
  m.channels = num("model.channels", std::size_t{});
  m.kernel = num("model.kernel", std::size_t{});
  m.hidden = num("model.hidden", std::size_t{});
  m.bias = parse_bool("model.bias", get("model.bias"));
  m.init = parse_init(get("model.init"));
  m.frozen = parse_list<std::size_t>("model.frozen", get("model.frozen"));

  OptimizerSpec& o = cfg.optimizer;
  o.kind = parse_optimizer(get("optimizer.kind"));
  o.base_lr = num("optimizer.lr", double{});
  o.momentum = num("optimizer.momentum", double{});
  o.beta1 = num("optimizer.beta1", double{});
  o.beta2 = num("optimizer.beta2", double{});
  o.rms_decay = num("optimizer.rms_decay", double{});
  o.eps = num("optimizer.eps", double{});
  o.total_steps = num("optimizer.total_steps", std::size_t{});
  o.milestones = parse_list<double>("optimizer.milestones", get("optimizer.milestones"));
  o.decay_factor = num("optimizer.decay", double{});
  validate(o);

  cfg.train.batch_size = num("train.batch_size", std::size_t{});
  cfg.train.early_stop_loss = num("train.early_stop_loss", double{});
  cfg.train.trace_every = num("train.trace_every", std::size_t{});
  if (cfg.train.batch_size == 0 || cfg.train.trace_every == 0) {
    throw ParameterError("train.batch_size and train.trace_every must be positive");
  }

  EvalConfig& e = cfg.eval;
  e.rho_grid = parse_list<double>("eval.rho_grid", get("eval.rho_grid"));
  for (double r : e.rho_grid) {
    if (!(r >= -1.0 && r <= 1.0)) bad_value("eval.rho_grid", get("eval.rho_grid"));
  }
  e.samples_per_cell = num("eval.samples_per_cell", std::size_t{});
  e.patterns = split(get("eval.patterns"), ";");
  for (const auto& p : e.patterns) parse_pattern(p);
  e.input_sizes = parse_list<std::size_t>("eval.input_sizes", get("eval.input_sizes"));
  e.probe_train = num("eval.probe_train", std::size_t{});
  e.probe_test = num("eval.probe_test", std::size_t{});
  e.correlation = parse_corr_mode(get("eval.correlation"));
  e.image_format = parse_format("eval.image_format", get("eval.image_format"));
  e.viz = parse_viz("eval.viz", get("eval.viz"));
  e.analyses = split(get("eval.analyses"), ",");
  static const std::set<std::string> analyses{"heatmap", "curves", "probe", "channels", "weights", "sizes", "upper"};
  for (const auto& a : e.analyses) {
    if (!analyses.count(a)) bad_value("eval.analyses", a);
  }
  return cfg;
}

ExperimentConfig apply_overrides(const ExperimentConfig& base, const std::vector<std::string>& overrides) {
  pt::ptree t = to_ptree(base);
  pt::ptree extra;
  for (const std::string& o : overrides) {
    std::string s = o;
    if (s.rfind("--", 0) == 0) s.erase(0, 2);
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ParameterError("override '" + o + "' is not key=value");
    extra.put(s.substr(0, eq), s.substr(eq + 1));
  }
  merge_into(t, extra);
  return from_ptree(t);
}

ExperimentConfig load_config(const std::filesystem::path& file, const std::vector<std::string>& overrides) {
  ExperimentConfig cfg;
  if (!file.empty()) {
    pt::ptree t;
    try {
      pt::read_ini(file.string(), t);
    } catch (const pt::ini_parser_error& e) {
      throw IoError("cannot read config " + file.string() + ": " + e.message());
    }
    cfg = from_ptree(t);
  }
  return apply_overrides(cfg, overrides);
}

std::string config_text(const ExperimentConfig& cfg) {
  std::ostringstream os;
  pt::write_ini(os, to_ptree(cfg));
  return os.str();
}

void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << config_text(cfg);
  if (!out) throw IoError("write failed: " + path.string());
}

NetworkSpec model_spec(const ExperimentConfig& cfg, std::size_t channels, std::size_t size) {
  const ModelConfig& m = cfg.model;
  const std::size_t d = channels * size * size;
  NetworkSpec spec;
  if (m.family == "cnn") {
    spec = conv_stack(m.depth, m.channels, m.kernel, channels, m.bias);
  } else if (m.family == "fcn") {
    spec = dense_stack(m.depth, d, m.hidden ? m.hidden : d, false, m.bias);
  } else if (m.family == "relu_fcn") {
    spec = dense_stack(m.depth, d, m.hidden ? m.hidden : d, true, m.bias);
  } else if (m.family == "residual_fcn") {
    spec = residual_stack(m.depth, d, m.bias);
  } else {
    throw ParameterError("model.family: unknown family '" + m.family + "'");
  }
  spec.channels = channels;
  spec.height = size;
  spec.width = size;
  spec.init = m.init;
  spec.seed = cfg.seed;
  const auto params = param_layer_indices(spec);
  for (std::size_t f : m.frozen) {
    if (f >= params.size()) {
      throw ParameterError("model.frozen names layer " + std::to_string(f) + " but the model has " +
                           std::to_string(params.size()) + " parameterised layers");
    }
    spec.layers[params[f]].trainable = false;
  }
  validate(spec);
  return spec;
}

}  // namespace idlab
