#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "idlab/config.hpp"
#include "idlab/data_io.hpp"
#include "idlab/errors.hpp"
#include "idlab/experiment.hpp"
#include "idlab/kernels.hpp"

using namespace idlab;
namespace fs = std::filesystem;

namespace {

// Unrecognised "--section.key=value" arguments become config overrides.
std::vector<std::string> overrides_of(CLI::App* sub) {
  std::vector<std::string> out;
  for (const std::string& s : sub->remaining()) {
    if (s.rfind("--", 0) != 0 || s.find('=') == std::string::npos) {
      throw CLI::ExtrasError({s});
    }
    out.push_back(s);
  }
  return out;
}

int report_checks(const CheckReport& rep, const std::string& out) {
  std::size_t failed = 0;
  for (const auto& c : rep.checks) {
    std::printf("%-4s %-28s measured %-12.4g threshold %-10.3g %s\n", c.passed ? "ok" : "FAIL", c.name.c_str(),
                c.measured, c.threshold, c.detail.c_str());
    failed += !c.passed;
  }
  if (!out.empty()) {
    std::ofstream f(out);
    f << rep.to_json().dump(2) << "\n";
    if (!f) throw IoError("cannot write " + out);
  }
  if (failed) {
    for (const auto& c : rep.checks) {
      if (!c.passed) std::fprintf(stderr, "failed check: %s\n", c.name.c_str());
    }
    return 1;
  }
  std::printf("%zu checks passed\n", rep.checks.size());
  return 0;
}

void print_trace(const TracePoint& p) {
  std::printf("step %zu lr %.3g loss %.10g\n", p.step, p.lr, p.loss);
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"identity-mapping experiments"};
  app.require_subcommand(1);
  std::string config_file;

  auto* train = app.add_subcommand("train", "train a model and write its run directory");
  train->add_option("-c,--config", config_file, "INI config file")->check(CLI::ExistingFile);
  train->allow_extras();
  bool quiet = false;
  train->add_flag("-q,--quiet", quiet, "no progress lines");

  auto* analyze = app.add_subcommand("analyze", "run the configured analyses on a finished run");
  std::string run_dir;
  analyze->add_option("run_dir", run_dir, "run directory")->required()->check(CLI::ExistingDirectory);
  analyze->allow_extras();

  std::uint64_t check_seed = 0;
  std::optional<double> tolerance;
  std::string report_path;
  auto* oracle = app.add_subcommand("oracle-check", "closed-form oracle and construction checks");
  auto* construct = app.add_subcommand("construct-check", "identity construction checks only");
  for (auto* sub : {oracle, construct}) {
    sub->add_option("--seed", check_seed, "seed");
    sub->add_option("--tolerance", tolerance, "replace every threshold");
    sub->add_option("--report", report_path, "write the JSON report here");
  }

  auto* sweep = app.add_subcommand("sweep", "one training run per value of an axis");
  std::string axis;
  std::vector<std::string> values;
  std::size_t jobs = 1;
  sweep->add_option("-c,--config", config_file, "INI config file")->check(CLI::ExistingFile);
  sweep->add_option("--axis", axis, "depth | filter_size | channels | init | optimizer | image_size")->required();
  sweep->add_option("--values", values, "comma separated values")->delimiter(',');
  sweep->add_option("-j,--jobs", jobs, "concurrent runs");
  sweep->allow_extras();

  auto* render = app.add_subcommand("render", "render evaluation patterns and optional predictions");
  std::string render_run;
  std::string render_out;
  std::size_t render_size = 0;
  std::string mapping = "normalized";
  render->add_option("-c,--config", config_file, "INI config file")->check(CLI::ExistingFile);
  render->add_option("--run", render_run, "run directory whose model predicts each pattern")
      ->check(CLI::ExistingDirectory);
  render->add_option("--size", render_size, "image size (default: the data size)");
  render->add_option("--mapping", mapping, "normalized | unit | minmax");
  render->add_option("-o,--out", render_out, "output .pgm or .png")->required();
  render->allow_extras();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const ExperimentConfig cfg = load_config(config_file, overrides_of(train));
      std::fprintf(stderr, "kernels: %s, out_dir: %s\n", std::string(kernels::name(kernels::active().isa)).c_str(),
                   cfg.out_dir.c_str());
      const RunRecord rec = run_train(cfg, quiet ? TraceCallback{} : TraceCallback{print_trace});
      std::printf("final loss %.10g after %.0f steps, %.1f s\n", rec.metrics.at("final_loss"),
                  rec.metrics.at("steps_run"), rec.wall_seconds);
      if (!rec.ok) {
        std::fprintf(stderr, "training failed at step %zu: %s\n", rec.failed_step.value_or(0), rec.failure.c_str());
        return 2;
      }
      return 0;
    }
    if (*analyze) {
      const ExperimentConfig cfg = apply_overrides(load_run_config(run_dir), overrides_of(analyze));
      for (const auto& f : run_analysis(cfg, run_dir)) std::printf("%s\n", (fs::path(run_dir) / f).c_str());
      return 0;
    }
    if (*oracle) return report_checks(run_oracle_checks({check_seed, tolerance}), report_path);
    if (*construct) return report_checks(run_construct_checks({check_seed, tolerance}), report_path);
    if (*sweep) {
      const ExperimentConfig cfg = load_config(config_file, overrides_of(sweep));
      const SweepReport rep = run_sweep(cfg, parse_sweep_axis(axis), values, jobs);
      int failed = 0;
      for (const auto& r : rep.rows) {
        std::printf("%s=%s seed %llu %s loss %.4g corr_id %.4f corr_const %.4f %s\n", axis.c_str(), r.value.c_str(),
                    static_cast<unsigned long long>(r.seed), r.ok ? "ok" : "FAILED", r.final_loss, r.corr_identity,
                    r.corr_constant, r.failure.c_str());
        failed += !r.ok;
      }
      return failed ? 1 : 0;
    }
    if (*render) {
      ExperimentConfig cfg = load_config(config_file, overrides_of(render));
      std::optional<Network> net;
      if (!render_run.empty()) {
        cfg = apply_overrides(load_run_config(render_run), overrides_of(render));
        net = load_run_network(cfg, render_run);
      }
      const TrainingSet ts = load_training_set(cfg);
      const std::size_t size = render_size ? render_size : ts.size;
      const ValueMapping vm = parse_value_mapping(mapping);
      std::vector<std::vector<ByteImage>> rows;
      for (const auto& p : evaluation_patterns(cfg, ts.channels, size)) {
        std::vector<ByteImage> row{to_bytes(p.image, vm)};
        if (net) row.push_back(to_bytes(predict(*net, p.image), vm));
        rows.push_back(std::move(row));
      }
      const ByteImage grid = tile_grid(rows);
      if (fs::path(render_out).extension() == ".png") {
        write_png(grid, render_out);
      } else {
        write_pgm(grid, render_out);
      }
      std::printf("%s\n", render_out.c_str());
      return 0;
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
