// Command-line harness: config-driven experiment runner over the training
// engine, with per-problem presets, persistent run directories, aggregate
// reports and plot-ready exports.
//
//   gapinn init <problem> <mode> [-o config.ini]
//   gapinn run <config.ini> [--resume] [--fallback-reference] [--threads N]
//   gapinn report <results_dir> [-o report.csv]
//   gapinn export <run_dir> --kind curves --names L_PINN,...
//   gapinn export <run_dir> --kind heatmap [--resolution N] [--axes i,j] [--fix c=v]
//
// Exit codes: 0 success, 2 usage/validation failure, 3 numeric divergence
// (partial results are kept on disk).

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gapinn/checkpoint.hpp"
#include "gapinn/config.hpp"
#include "gapinn/metrics.hpp"
#include "gapinn/reference.hpp"
#include "gapinn/results.hpp"
#include "gapinn/trainer.hpp"

namespace fs = std::filesystem;
using namespace gapinn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

// Reference data lookup order: explicit path in the config, then
// $GAPINN_DATA_ROOT/<problem>.txt, then the in-repo fallback oracle when
// enabled.
std::optional<Dataset> resolve_reference(const ExperimentConfig& cfg, bool allow_fallback,
                                         std::string* source) {
  PdeProblem p = make_problem(cfg.problem, ProblemOptions{cfg.helmholtz_k});
  if (!p.needs_reference) return std::nullopt;
  const int value_dim = p.output_dim;
  if (!cfg.dataset_path.empty()) {
    if (source) *source = cfg.dataset_path;
    return load_dataset(cfg.dataset_path, p.input_dim, value_dim);
  }
  if (const char* root = std::getenv("GAPINN_DATA_ROOT")) {
    fs::path candidate = fs::path(root) / (cfg.problem + ".txt");
    if (fs::exists(candidate)) {
      if (source) *source = candidate.string();
      return load_dataset(candidate, p.input_dim, value_dim);
    }
  }
  if (allow_fallback || cfg.fallback_reference) {
    if (source) *source = "built-in fallback oracle";
    if (cfg.problem == "burgers") return burgers_reference();
    return schrodinger_reference();
  }
  throw std::invalid_argument(
      "no reference dataset for '" + cfg.problem +
      "': set dataset_path, point GAPINN_DATA_ROOT at a directory containing " + cfg.problem +
      ".txt, or pass --fallback-reference to use the built-in oracle");
}

int cmd_init(const std::string& problem, const std::string& mode_name,
             const std::string& out_path) {
  TrainMode mode = parse_mode(mode_name);
  ExperimentConfig cfg = preset_config(problem, mode);
  fs::path out = out_path.empty() ? fs::path(problem + "_" + mode_name + ".ini")
                                  : fs::path(out_path);
  std::ofstream os(out, std::ios::trunc);
  if (!os) throw IoError("cannot write config to " + out.string());
  os << write_experiment_config(cfg);
  std::cout << "wrote " << out.string() << "\n";
  return kExitOk;
}

int cmd_run(const std::string& config_path, bool resume, bool fallback, int threads_override) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (threads_override > 0) cfg.threads = threads_override;
  if (fallback) cfg.fallback_reference = true;
  cfg.validate();

  std::string source;
  std::optional<Dataset> reference = resolve_reference(cfg, fallback, &source);
  if (reference) {
    std::cout << "reference data: " << source << " (" << reference->size() << " rows)\n";
  }

  std::string config_text;
  {
    std::ifstream is(config_path);
    std::ostringstream ss;
    ss << is.rdbuf();
    config_text = ss.str();
  }

  PdeProblem problem = make_problem(cfg.problem, ProblemOptions{cfg.helmholtz_k});
  bool any_aborted = false;

  for (TrainMode mode : cfg.modes) {
    for (std::uint64_t seed : cfg.seeds) {
      TrainConfig tc = cfg.to_train_config(mode, seed);
      RunPaths rp = RunPaths::under(cfg.output_dir, cfg.problem, mode, seed);
      fs::create_directories(rp.dir);
      {
        std::ofstream snap(rp.config_snapshot(), std::ios::trunc);
        snap << config_text;
      }

      std::optional<ResumeState> resume_state;
      if (resume && fs::exists(rp.gen_checkpoint())) {
        Checkpoint ck = load_checkpoint(rp.gen_checkpoint());
        ResumeState rs;
        rs.gen = ck.params;
        rs.epoch = int(ck.epoch);
        if (tc.is_ga() && fs::exists(rp.disc_checkpoint())) {
          rs.disc = load_checkpoint(rp.disc_checkpoint()).params;
        }
        resume_state = std::move(rs);
        std::cout << "resuming " << rp.dir.filename().string() << " from epoch "
                  << resume_state->epoch << "\n";
      }

      const bool pw = tc.is_pw();
      RecordWriter writer(rp.record_csv(), int(problem.boundary.size()), tc.is_ga(),
                          pw && tc.pw.interior, pw, resume_state.has_value());

      TrainHooks hooks;
      hooks.on_row = [&](const TrainRow& row) { writer.write(row); };
      hooks.on_checkpoint = [&](int epoch, const ParamVector& gen, const ParamVector* disc) {
        save_checkpoint(rp.gen_checkpoint(),
                        Checkpoint{MlpSpec::dense(problem.input_dim, tc.gen_layers,
                                                  tc.gen_width, problem.output_dim),
                                   gen, seed, epoch});
        if (disc) {
          save_checkpoint(
              rp.disc_checkpoint(),
              Checkpoint{MlpSpec::dense(problem.input_dim + problem.output_dim, tc.disc_layers,
                                        tc.disc_width, 1, OutputActivation::sigmoid),
                         *disc, seed, epoch});
        }
      };

      auto t0 = std::chrono::steady_clock::now();
      TrainRecord rec = train(tc, hooks, reference ? &*reference : nullptr,
                              resume_state ? &*resume_state : nullptr);
      double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

      RunSummary summary;
      summary.problem = cfg.problem;
      summary.mode = to_string(mode);
      summary.seed = seed;
      summary.reason = to_string(rec.reason);
      summary.epochs = rec.final_epoch;
      summary.nrmse = rec.final_nrmse;
      summary.aborted = rec.reason == StopReason::numeric_error;
      summary.error = rec.error;
      summary.wall_seconds = wall;
      write_summary(rp.summary_json(), summary);

      std::cout << rp.dir.filename().string() << ": " << to_string(rec.reason) << " at epoch "
                << rec.final_epoch;
      if (std::isfinite(rec.final_nrmse)) std::cout << ", nrmse " << rec.final_nrmse;
      if (!rec.error.empty()) std::cout << " (" << rec.error << ")";
      std::cout << "\n";
      if (summary.aborted) any_aborted = true;
    }
  }
  return any_aborted ? kExitNumeric : kExitOk;
}

int cmd_report(const std::string& results_dir, const std::string& out_csv) {
  auto rows = build_report(results_dir);
  std::cout << format_report_text(rows);
  if (!out_csv.empty()) {
    std::ofstream os(out_csv, std::ios::trunc);
    if (!os) throw IoError("cannot write report to " + out_csv);
    os << format_report_csv(rows);
    std::cout << "wrote " << out_csv << "\n";
  }
  return kExitOk;
}

ExperimentConfig run_dir_config(const fs::path& run_dir) {
  fs::path snap = run_dir / "config.ini";
  if (!fs::exists(snap)) {
    throw std::invalid_argument("not a run directory (no config.ini): " + run_dir.string());
  }
  return load_experiment_config(snap);
}

int cmd_export_curves(const fs::path& run_dir, const std::string& names_arg,
                      const std::string& out_path) {
  TrainRecord rec = read_record_csv(run_dir / "record.csv");
  std::vector<std::string> names;
  {
    std::istringstream ss(names_arg);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (!tok.empty()) names.push_back(tok);
    }
  }
  if (names.empty()) names = {"L_PINN"};
  auto curves = extract_curves(rec, names);
  fs::path out = out_path.empty() ? run_dir / "curves.csv" : fs::path(out_path);
  std::ofstream os(out, std::ios::trunc);
  if (!os) throw IoError("cannot write curves to " + out.string());
  os << "epoch";
  for (const auto& [name, col] : curves) os << ',' << name;
  os << '\n';
  for (std::size_t i = 0; i < rec.rows.size(); ++i) {
    os << rec.rows[i].epoch;
    for (const auto& [name, col] : curves) os << ',' << fmt_g17(col[i]);
    os << '\n';
  }
  std::cout << "wrote " << out.string() << "\n";
  return kExitOk;
}

int cmd_export_heatmap(const fs::path& run_dir, int resolution, const std::string& axes_arg,
                       const std::vector<std::string>& fixes, bool fallback,
                       const std::string& out_path) {
  ExperimentConfig cfg = run_dir_config(run_dir);
  PdeProblem problem = make_problem(cfg.problem, ProblemOptions{cfg.helmholtz_k});
  fs::path ck_path = run_dir / "checkpoint_gen.ckpt";
  if (!fs::exists(ck_path)) {
    throw std::invalid_argument("no generator checkpoint in " + run_dir.string());
  }
  Checkpoint ck = load_checkpoint(ck_path);
  MlpField field(ck.spec, ck.params);
  fs::path out = out_path.empty() ? run_dir / "heatmap.csv" : fs::path(out_path);

  if (!problem.has_analytic) {
    std::string source;
    std::optional<Dataset> ref = resolve_reference(cfg, fallback, &source);
    Dataset table = native_error_table(field, *ref);
    std::ofstream os(out, std::ios::trunc);
    if (!os) throw IoError("cannot write heatmap to " + out.string());
    os << "# discrepancy on the native reference grid (" << source << ")\n";
    os << "t,x,abs_err\n";
    for (int i = 0; i < table.size(); ++i) {
      auto c = table.point(i);
      os << fmt_g17(c[0]) << ',' << fmt_g17(c[1]) << ',' << fmt_g17(table.value(i)[0]) << '\n';
    }
    std::cout << "wrote " << out.string() << "\n";
    return kExitOk;
  }

  SliceSpec slice = SliceSpec::centered(problem);
  if (!axes_arg.empty()) {
    if (std::sscanf(axes_arg.c_str(), "%d,%d", &slice.axis_x, &slice.axis_y) != 2) {
      throw std::invalid_argument("--axes expects two comma-separated indices");
    }
  }
  for (const auto& fix : fixes) {
    int coord = 0;
    double value = 0;
    if (std::sscanf(fix.c_str(), "%d=%lf", &coord, &value) != 2) {
      throw std::invalid_argument("--fix expects coord=value, got '" + fix + "'");
    }
    if (coord < 0 || coord >= problem.input_dim) {
      throw std::invalid_argument("--fix coordinate out of range");
    }
    slice.fixed[std::size_t(coord)] = value;
  }

  ErrorGrid grid = error_grid(field, problem, resolution, slice);
  std::ofstream os(out, std::ios::trunc);
  if (!os) throw IoError("cannot write heatmap to " + out.string());
  os << "# discrepancy heat map: problem=" << cfg.problem << " axis_x=x" << grid.axis_x
     << " axis_y=x" << grid.axis_y;
  bool first = true;
  for (int c = 0; c < problem.input_dim; ++c) {
    if (c == grid.axis_x || c == grid.axis_y) continue;
    os << (first ? " slice:" : ",") << " x" << c << "=" << fmt_g17(grid.slice[std::size_t(c)]);
    first = false;
  }
  os << "\n";
  os << "y\\x";
  for (double x : grid.xs) os << ',' << fmt_g17(x);
  os << '\n';
  for (std::size_t iy = 0; iy < grid.ys.size(); ++iy) {
    os << fmt_g17(grid.ys[iy]);
    for (std::size_t ix = 0; ix < grid.xs.size(); ++ix) {
      os << ',' << fmt_g17(grid.err.at(int(iy), int(ix)));
    }
    os << '\n';
  }
  std::cout << "wrote " << out.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"physics-informed network training harness"};
  app.require_subcommand(1);

  auto* init = app.add_subcommand("init", "write a preset experiment config");
  std::string init_problem, init_mode, init_out;
  init->add_option("problem", init_problem, "problem name")->required();
  init->add_option("mode", init_mode, "training mode")->required();
  init->add_option("-o,--output", init_out, "output path");

  auto* run = app.add_subcommand("run", "execute every (mode x seed) run in a config");
  std::string run_config;
  bool run_resume = false, run_fallback = false;
  int run_threads = 0;
  run->add_option("config", run_config, "experiment config file")->required();
  run->add_flag("--resume", run_resume, "continue from the latest checkpoints");
  run->add_flag("--fallback-reference", run_fallback,
                "use the built-in oracle when reference files are absent");
  run->add_option("--threads", run_threads, "worker thread count");

  auto* report = app.add_subcommand("report", "aggregate run summaries into a table");
  std::string report_dir, report_out;
  report->add_option("results_dir", report_dir, "directory holding run subdirectories")
      ->required();
  report->add_option("-o,--output", report_out, "also write the table as CSV");

  auto* exp = app.add_subcommand("export", "emit plot-ready CSV data from a run");
  std::string exp_dir, exp_kind, exp_names, exp_axes, exp_out;
  int exp_resolution = 128;
  bool exp_fallback = false;
  std::vector<std::string> exp_fixes;
  exp->add_option("run_dir", exp_dir, "a single run directory")->required();
  exp->add_option("--kind", exp_kind, "curves or heatmap")->required();
  exp->add_option("--names", exp_names, "comma-separated curve names (curves)");
  exp->add_option("--resolution", exp_resolution, "grid resolution per axis (heatmap)");
  exp->add_option("--axes", exp_axes, "two free coordinate indices, e.g. 0,1 (heatmap)");
  exp->add_option("--fix", exp_fixes, "pin a coordinate, e.g. 2=0.5 (heatmap)");
  exp->add_flag("--fallback-reference", exp_fallback,
                "use the built-in oracle when reference files are absent");
  exp->add_option("-o,--output", exp_out, "output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    (void)app.exit(e);
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (init->parsed()) return cmd_init(init_problem, init_mode, init_out);
    if (run->parsed()) return cmd_run(run_config, run_resume, run_fallback, run_threads);
    if (report->parsed()) return cmd_report(report_dir, report_out);
    if (exp->parsed()) {
      if (exp_kind == "curves") return cmd_export_curves(exp_dir, exp_names, exp_out);
      if (exp_kind == "heatmap") {
        return cmd_export_heatmap(exp_dir, exp_resolution, exp_axes, exp_fixes, exp_fallback,
                                  exp_out);
      }
      throw std::invalid_argument("--kind must be curves or heatmap");
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
