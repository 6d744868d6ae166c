// Run persistence: one directory per (problem, mode, seed) holding the config
// snapshot, record CSV, checkpoints and a metrics summary. A completed run
// directory is self-contained and re-evaluable without retraining.
#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gapinn/common.hpp"
#include "gapinn/trainer.hpp"

namespace gapinn {

inline std::string fmt_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct RunPaths {
  std::filesystem::path dir;

  static RunPaths under(const std::filesystem::path& root, const std::string& problem,
                        TrainMode mode, std::uint64_t seed) {
    RunPaths rp;
    rp.dir = root / (problem + "_" + to_string(mode) + "_seed" + std::to_string(seed));
    return rp;
  }

  std::filesystem::path record_csv() const { return dir / "record.csv"; }
  std::filesystem::path summary_json() const { return dir / "summary.json"; }
  std::filesystem::path config_snapshot() const { return dir / "config.ini"; }
  std::filesystem::path gen_checkpoint() const { return dir / "checkpoint_gen.ckpt"; }
  std::filesystem::path disc_checkpoint() const { return dir / "checkpoint_disc.ckpt"; }
};

// Streams TrainRows to a CSV, one flush per row so aborted runs keep their
// partial record. Column layout is fixed up front by the run shape.
class RecordWriter {
 public:
  RecordWriter(const std::filesystem::path& path, int boundary_terms, bool ga_columns,
               bool pw_interior, bool pw_boundary, bool append = false)
      : terms_(boundary_terms),
        ga_(ga_columns),
        pw_f_(pw_interior),
        pw_b_(pw_boundary),
        os_(path, append ? std::ios::app : std::ios::trunc) {
    if (!os_) throw IoError("cannot open record file: " + path.string());
    if (!append) {
      os_ << header_line() << "\n";
      os_.flush();
    }
  }

  std::string header_line() const {
    std::string h = "epoch,L_f";
    for (int t = 1; t <= terms_; ++t) h += ",L_b" + std::to_string(t);
    h += ",L_PINN";
    if (ga_) h += ",L_T,L_D,L_G";
    if (pw_f_) h += ",rho_f";
    if (pw_b_) {
      for (int t = 1; t <= terms_; ++t) h += ",rho_b" + std::to_string(t);
    }
    return h;
  }

  void write(const TrainRow& r) {
    os_ << r.epoch << ',' << fmt_g17(r.l_f);
    for (int t = 0; t < terms_; ++t) {
      os_ << ',' << fmt_g17(t < int(r.l_b.size()) ? r.l_b[std::size_t(t)]
                                                  : std::numeric_limits<double>::quiet_NaN());
    }
    os_ << ',' << fmt_g17(r.l_pinn);
    if (ga_) os_ << ',' << fmt_g17(r.l_t) << ',' << fmt_g17(r.l_d) << ',' << fmt_g17(r.l_g);
    if (pw_f_) os_ << ',' << fmt_g17(r.rho_f);
    if (pw_b_) {
      for (int t = 0; t < terms_; ++t) {
        os_ << ','
            << fmt_g17(t < int(r.rho_b.size()) ? r.rho_b[std::size_t(t)]
                                               : std::numeric_limits<double>::quiet_NaN());
      }
    }
    os_ << '\n';
    os_.flush();
  }

 private:
  int terms_;
  bool ga_, pw_f_, pw_b_;
  std::ofstream os_;
};

// Reads a record CSV back into a TrainRecord shell (rows and column flags;
// specs and parameters live in the checkpoints).
inline TrainRecord read_record_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open record file: " + path.string());
  std::string header;
  if (!std::getline(is, header)) throw IoError("empty record file: " + path.string());

  std::vector<std::string> cols;
  {
    std::istringstream hs(header);
    std::string tok;
    while (std::getline(hs, tok, ',')) cols.push_back(tok);
  }
  TrainRecord rec;
  rec.boundary_terms = 0;
  for (const auto& cl : cols) {
    if (cl.rfind("L_b", 0) == 0 && cl.size() > 3 && std::isdigit((unsigned char)cl[3])) {
      rec.boundary_terms = std::max(rec.boundary_terms, std::stoi(cl.substr(3)));
    }
    if (cl == "L_D") rec.ga_columns = true;
    if (cl == "rho_f") rec.pw_interior_column = true;
    if (cl.rfind("rho_b", 0) == 0) rec.pw_boundary_columns = true;
  }

  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    std::vector<double> vals;
    while (std::getline(ls, tok, ',')) vals.push_back(std::strtod(tok.c_str(), nullptr));
    if (vals.size() != cols.size()) {
      throw ParseError("record row has " + std::to_string(vals.size()) + " columns, expected " +
                           std::to_string(cols.size()),
                       0);
    }
    TrainRow r;
    std::size_t i = 0;
    r.epoch = int(vals[i++]);
    r.l_f = vals[i++];
    for (int t = 0; t < rec.boundary_terms; ++t) r.l_b.push_back(vals[i++]);
    r.l_pinn = vals[i++];
    if (rec.ga_columns) {
      r.l_t = vals[i++];
      r.l_d = vals[i++];
      r.l_g = vals[i++];
    }
    if (rec.pw_interior_column) r.rho_f = vals[i++];
    if (rec.pw_boundary_columns) {
      for (int t = 0; t < rec.boundary_terms; ++t) r.rho_b.push_back(vals[i++]);
    }
    rec.rows.push_back(std::move(r));
  }
  return rec;
}

struct RunSummary {
  std::string problem;
  std::string mode;
  std::uint64_t seed = 0;
  std::string reason;
  int epochs = 0;
  double nrmse = std::numeric_limits<double>::quiet_NaN();
  bool aborted = false;
  std::string error;
  double wall_seconds = 0.0;
};

inline void write_summary(const std::filesystem::path& path, const RunSummary& s) {
  nlohmann::json j;
  j["schema"] = 1;
  j["problem"] = s.problem;
  j["mode"] = s.mode;
  j["seed"] = s.seed;
  j["reason"] = s.reason;
  j["epochs"] = s.epochs;
  if (std::isfinite(s.nrmse)) j["nrmse"] = s.nrmse;
  j["aborted"] = s.aborted;
  if (!s.error.empty()) j["error"] = s.error;
  j["wall_seconds"] = s.wall_seconds;
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write summary: " + path.string());
  os << j.dump(2) << "\n";
}

inline RunSummary read_summary(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open summary: " + path.string());
  nlohmann::json j = nlohmann::json::parse(is);
  RunSummary s;
  s.problem = j.at("problem").get<std::string>();
  s.mode = j.at("mode").get<std::string>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.reason = j.at("reason").get<std::string>();
  s.epochs = j.at("epochs").get<int>();
  if (j.contains("nrmse")) s.nrmse = j.at("nrmse").get<double>();
  s.aborted = j.value("aborted", false);
  s.error = j.value("error", std::string{});
  s.wall_seconds = j.value("wall_seconds", 0.0);
  return s;
}

struct ReportRow {
  std::string problem;
  std::string mode;
  int completed = 0;
  int aborted = 0;
  double median_epochs = std::numeric_limits<double>::quiet_NaN();
  double median_nrmse = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

// Scans run subdirectories for summaries and aggregates per (problem, mode).
// Aborted runs are counted but excluded from the medians.
inline std::vector<ReportRow> build_report(const std::filesystem::path& results_dir) {
  if (!std::filesystem::is_directory(results_dir)) {
    throw std::invalid_argument("not a results directory: " + results_dir.string());
  }
  std::map<std::pair<std::string, std::string>, std::vector<RunSummary>> groups;
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(results_dir)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs) {
    auto summary = d / "summary.json";
    if (std::filesystem::exists(summary)) {
      RunSummary s = read_summary(summary);
      groups[{s.problem, s.mode}].push_back(s);
    }
  }
  if (groups.empty()) {
    throw std::invalid_argument("no completed runs under " + results_dir.string());
  }
  std::vector<ReportRow> rows;
  for (auto& [key, runs] : groups) {
    ReportRow r;
    r.problem = key.first;
    r.mode = key.second;
    std::vector<double> epochs, nrmses;
    for (const auto& s : runs) {
      if (s.aborted) {
        ++r.aborted;
        continue;
      }
      ++r.completed;
      epochs.push_back(double(s.epochs));
      if (std::isfinite(s.nrmse)) nrmses.push_back(s.nrmse);
    }
    r.median_epochs = detail::median_of(epochs);
    r.median_nrmse = detail::median_of(nrmses);
    rows.push_back(r);
  }
  return rows;
}

inline std::string format_report_text(std::span<const ReportRow> rows) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-12s %-10s %9s %8s %14s %12s\n", "problem", "mode", "runs",
                "aborted", "median_epochs", "median_nrmse");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-12s %-10s %9d %8d %14.1f %12.4g\n", r.problem.c_str(),
                  r.mode.c_str(), r.completed, r.aborted, r.median_epochs, r.median_nrmse);
    os << buf;
  }
  return os.str();
}

inline std::string format_report_csv(std::span<const ReportRow> rows) {
  std::string s = "problem,mode,completed,aborted,median_epochs,median_nrmse\n";
  for (const auto& r : rows) {
    s += r.problem + "," + r.mode + "," + std::to_string(r.completed) + "," +
         std::to_string(r.aborted) + "," + fmt_g17(r.median_epochs) + "," +
         fmt_g17(r.median_nrmse) + "\n";
  }
  return s;
}

}  // namespace gapinn
