// Experiment configuration: a sectioned key=value text format with '#'
// comments, plus built-in per-problem presets carrying the benchmark
// hyperparameters. Unknown keys are hard errors; files carry an explicit
// schema version.
#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gapinn/common.hpp"
#include "gapinn/trainer.hpp"

namespace gapinn {

struct ExperimentConfig {
  int schema_version = 1;

  // [experiment]
  std::string problem = "poisson";
  std::vector<TrainMode> modes = {TrainMode::pinn};
  std::vector<std::uint64_t> seeds = {1};
  std::string output_dir = "runs";
  std::string dataset_path;  // empty: resolve via GAPINN_DATA_ROOT or fallback
  bool fallback_reference = false;
  int threads = 0;

  // [problem]
  double helmholtz_k = 1.0;

  // [generator] / [discriminator]
  int gen_layers = 4, gen_width = 100;
  int disc_layers = 1, disc_width = 100;
  WeightInit init = WeightInit::glorot_uniform;

  // [training]
  int n_interior = 5000;
  int m_boundary = 100;
  int j_labeled = 10;
  double eta_g = 1e-3, eta_p = 1e-3, eta_d = 5e-3;
  double lambda1 = 1.0, lambda2 = 1.0, lambda_pw = 1.0;
  double tc = 1e-4;
  int max_epochs = 50000;
  int checkpoint_every = 500;

  // [pw]
  bool pw_interior = false;
  double q_interior = 0.0, e_interior = 0.0;
  std::vector<double> q_boundary, e_boundary;
  double pw_epsilon = 0.0;
  PwTermination pw_termination = PwTermination::hl_mass;

  // [dgm]
  int dgm_batch = 256;
  int dgm_epochs = 6000;

  // [test]
  int n_test = 10000;

  TrainConfig to_train_config(TrainMode mode, std::uint64_t seed) const {
    TrainConfig c;
    c.problem = problem;
    c.problem_opts.helmholtz_k = helmholtz_k;
    c.mode = mode;
    c.gen_layers = gen_layers;
    c.gen_width = gen_width;
    c.disc_layers = disc_layers;
    c.disc_width = disc_width;
    c.init = init;
    c.n_interior = n_interior;
    c.m_boundary = m_boundary;
    c.j_labeled = j_labeled;
    c.eta_g = eta_g;
    c.eta_p = eta_p;
    c.eta_d = eta_d;
    c.lambda1 = lambda1;
    c.lambda2 = lambda2;
    c.lambda_pw = lambda_pw;
    c.pw.interior = pw_interior;
    c.pw.q_interior = q_interior;
    c.pw.e_interior = e_interior;
    c.pw.q_boundary = q_boundary;
    c.pw.e_boundary = e_boundary;
    c.pw.epsilon = pw_epsilon;
    c.pw.termination = pw_termination;
    c.tc = tc;
    c.max_epochs = mode == TrainMode::dgm ? dgm_epochs : max_epochs;
    c.seed = seed;
    c.dgm_batch = dgm_batch;
    c.n_test = n_test;
    c.threads = threads;
    c.checkpoint_every = checkpoint_every;
    return c;
  }

  void validate() const {
    if (schema_version != 1) {
      throw std::invalid_argument("unsupported schema_version " +
                                  std::to_string(schema_version));
    }
    if (modes.empty()) throw std::invalid_argument("no modes selected");
    if (seeds.empty()) throw std::invalid_argument("no seeds listed");
    for (TrainMode m : modes) {
      to_train_config(m, seeds.front()).validate();
    }
  }
};

// Benchmark hyperparameters per problem (point-weighting constants, budgets,
// rates and layer shapes), with the named mode preselected.
inline ExperimentConfig preset_config(const std::string& problem, TrainMode mode) {
  ExperimentConfig c;
  c.problem = problem;
  c.modes = {mode};
  c.output_dir = "runs/" + problem;
  if (problem == "burgers") {
    c.q_boundary = {1e-4, 1e-4};
    c.e_boundary = {0.02, 5e-4};
    c.tc = 1e-4;
    c.n_interior = 10000;
    c.m_boundary = 100;
    c.j_labeled = 10;
    c.eta_g = 1e-3;
    c.eta_p = 1e-3;
    c.eta_d = 5e-3;
    c.gen_layers = 7;
    c.gen_width = 20;
    c.disc_layers = 8;
    c.disc_width = 20;
    c.dgm_epochs = 50000;
  } else if (problem == "schrodinger") {
    c.q_boundary = {0.005, 0.005, 0.005};
    c.e_boundary = {5e-4, 1e-4, 1e-4};
    c.tc = 1e-3;
    c.n_interior = 20000;
    c.m_boundary = 100;
    c.j_labeled = 10;
    c.eta_g = 1e-3;
    c.eta_p = 1e-3;
    c.eta_d = 5e-3;
    c.gen_layers = 4;
    c.gen_width = 100;
    c.disc_layers = 3;
    c.disc_width = 100;
    c.dgm_epochs = 20000;
  } else if (problem == "helmholtz") {
    c.q_boundary = {6e-5, 6e-5};
    c.e_boundary = {5e-4, 5e-4};
    c.tc = 0.01;
    c.n_interior = 20000;
    c.m_boundary = 200;
    c.j_labeled = 3;
    c.eta_g = 1e-3;
    c.eta_p = 1e-5;
    c.eta_d = 5e-5;
    c.gen_layers = 4;
    c.gen_width = 100;
    c.disc_layers = 1;
    c.disc_width = 100;
    c.dgm_epochs = 8000;
  } else if (problem == "poisson") {
    c.q_boundary = {5e-5, 5e-5};
    c.e_boundary = {5e-6, 5e-6};
    c.tc = 5e-5;
    c.n_interior = 5000;
    c.m_boundary = 100;
    c.j_labeled = 5;
    c.eta_g = 1e-3;
    c.eta_p = 1e-6;
    c.eta_d = 5e-6;
    c.gen_layers = 4;
    c.gen_width = 100;
    c.disc_layers = 1;
    c.disc_width = 100;
    c.pw_interior = true;  // the one problem whose equation set is weighted
    c.q_interior = 5e-5;
    c.e_interior = 0.001;
    c.dgm_epochs = 6000;
  } else if (problem == "hd_poisson") {
    c.q_boundary.assign(10, 0.001);
    c.e_boundary.assign(10, 0.05);
    c.tc = 0.002;
    c.n_interior = 10000;
    c.m_boundary = 500;
    c.j_labeled = 100;
    c.eta_g = 1e-3;
    c.eta_p = 1e-3;
    c.eta_d = 5e-3;
    c.gen_layers = 4;
    c.gen_width = 100;
    c.disc_layers = 1;
    c.disc_width = 100;
    c.dgm_epochs = 6000;
  } else if (problem == "heat") {
    c.q_boundary = {5e-5};
    c.e_boundary = {5e-6};
    c.tc = 5e-6;
    c.n_interior = 5000;
    c.m_boundary = 100;
    c.j_labeled = 10;
    c.eta_g = 1e-3;
    c.eta_p = 1e-3;
    c.eta_d = 5e-3;
    c.gen_layers = 4;
    c.gen_width = 100;
    c.disc_layers = 1;
    c.disc_width = 100;
    c.dgm_epochs = 6000;
  } else {
    throw std::invalid_argument("unknown problem '" + problem +
                                "'; valid names: burgers, poisson, helmholtz, schrodinger, "
                                "hd_poisson, heat");
  }
  return c;
}

namespace cfgdetail {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string fmt_list(std::span<const double> v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += fmt_double(v[i]);
  }
  return s;
}

inline std::string trim(std::string s) {
  auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && issp(s.front())) s.erase(s.begin());
  while (!s.empty() && issp(s.back())) s.pop_back();
  return s;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(s);
  while (std::getline(ss, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

inline double parse_double(const std::string& v, std::size_t line) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line) + ": expected a number, got '" + v + "'",
                     line);
  }
}

inline long long parse_int(const std::string& v, std::size_t line) {
  try {
    std::size_t used = 0;
    long long d = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line) + ": expected an integer, got '" + v + "'",
                     line);
  }
}

inline bool parse_bool(const std::string& v, std::size_t line) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ParseError("line " + std::to_string(line) + ": expected true/false, got '" + v + "'",
                   line);
}

}  // namespace cfgdetail

inline std::string write_experiment_config(const ExperimentConfig& c) {
  using cfgdetail::fmt_double;
  using cfgdetail::fmt_list;
  std::ostringstream os;
  os << "# experiment configuration\n";
  os << "schema_version = " << c.schema_version << "\n\n";
  os << "[experiment]\n";
  os << "problem = " << c.problem << "\n";
  os << "modes = ";
  for (std::size_t i = 0; i < c.modes.size(); ++i) {
    os << (i ? ", " : "") << to_string(c.modes[i]);
  }
  os << "\n";
  os << "seeds = ";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) os << (i ? ", " : "") << c.seeds[i];
  os << "\n";
  os << "output_dir = " << c.output_dir << "\n";
  os << "dataset_path = " << c.dataset_path << "\n";
  os << "fallback_reference = " << (c.fallback_reference ? "true" : "false") << "\n";
  os << "threads = " << c.threads << "\n\n";
  os << "[problem]\n";
  os << "helmholtz_k = " << fmt_double(c.helmholtz_k) << "\n\n";
  os << "[generator]\n";
  os << "layers = " << c.gen_layers << "\n";
  os << "width = " << c.gen_width << "\n";
  os << "init = " << (c.init == WeightInit::he_normal ? "he_normal" : "glorot_uniform")
     << "\n\n";
  os << "[discriminator]\n";
  os << "layers = " << c.disc_layers << "\n";
  os << "width = " << c.disc_width << "\n\n";
  os << "[training]\n";
  os << "n_interior = " << c.n_interior << "\n";
  os << "m_boundary = " << c.m_boundary << "\n";
  os << "j_labeled = " << c.j_labeled << "\n";
  os << "eta_g = " << fmt_double(c.eta_g) << "\n";
  os << "eta_p = " << fmt_double(c.eta_p) << "\n";
  os << "eta_d = " << fmt_double(c.eta_d) << "\n";
  os << "lambda1 = " << fmt_double(c.lambda1) << "\n";
  os << "lambda2 = " << fmt_double(c.lambda2) << "\n";
  os << "lambda_pw = " << fmt_double(c.lambda_pw) << "\n";
  os << "tc = " << fmt_double(c.tc) << "\n";
  os << "max_epochs = " << c.max_epochs << "\n";
  os << "checkpoint_every = " << c.checkpoint_every << "\n\n";
  os << "[pw]\n";
  os << "interior = " << (c.pw_interior ? "true" : "false") << "\n";
  os << "q_interior = " << fmt_double(c.q_interior) << "\n";
  os << "e_interior = " << fmt_double(c.e_interior) << "\n";
  os << "q_boundary = " << fmt_list(c.q_boundary) << "\n";
  os << "e_boundary = " << fmt_list(c.e_boundary) << "\n";
  os << "epsilon = " << fmt_double(c.pw_epsilon) << "\n";
  os << "termination = " << (c.pw_termination == PwTermination::literal ? "literal" : "hl_mass")
     << "\n\n";
  os << "[dgm]\n";
  os << "batch = " << c.dgm_batch << "\n";
  os << "epochs = " << c.dgm_epochs << "\n\n";
  os << "[test]\n";
  os << "n_test = " << c.n_test << "\n";
  return os.str();
}

inline ExperimentConfig parse_experiment_config(const std::string& text) {
  using namespace cfgdetail;
  ExperimentConfig c;
  c.q_boundary.clear();
  c.e_boundary.clear();
  std::istringstream is(text);
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  bool saw_version = false;

  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ParseError("line " + std::to_string(lineno) + ": unterminated section header",
                         lineno);
      }
      section = trim(line.substr(1, line.size() - 2));
      static const std::set<std::string> known = {"experiment", "problem",  "generator",
                                                  "discriminator", "training", "pw",
                                                  "dgm",        "test"};
      if (!known.count(section)) {
        throw ParseError("line " + std::to_string(lineno) + ": unknown section [" + section +
                             "]",
                         lineno);
      }
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("line " + std::to_string(lineno) + ": expected key = value", lineno);
    }
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    auto unknown = [&]() -> ParseError {
      return ParseError("line " + std::to_string(lineno) + ": unknown key '" + key +
                            "' in section [" + section + "]",
                        lineno);
    };

    if (section.empty()) {
      if (key == "schema_version") {
        c.schema_version = int(parse_int(val, lineno));
        saw_version = true;
      } else {
        throw unknown();
      }
    } else if (section == "experiment") {
      if (key == "problem") c.problem = val;
      else if (key == "modes") {
        c.modes.clear();
        for (const auto& m : split_list(val)) c.modes.push_back(parse_mode(m));
      } else if (key == "seeds") {
        c.seeds.clear();
        for (const auto& s : split_list(val)) {
          c.seeds.push_back(std::uint64_t(parse_int(s, lineno)));
        }
      } else if (key == "output_dir") c.output_dir = val;
      else if (key == "dataset_path") c.dataset_path = val;
      else if (key == "fallback_reference") c.fallback_reference = parse_bool(val, lineno);
      else if (key == "threads") c.threads = int(parse_int(val, lineno));
      else throw unknown();
    } else if (section == "problem") {
      if (key == "helmholtz_k") c.helmholtz_k = parse_double(val, lineno);
      else throw unknown();
    } else if (section == "generator") {
      if (key == "layers") c.gen_layers = int(parse_int(val, lineno));
      else if (key == "width") c.gen_width = int(parse_int(val, lineno));
      else if (key == "init") {
        if (val == "glorot_uniform") c.init = WeightInit::glorot_uniform;
        else if (val == "he_normal") c.init = WeightInit::he_normal;
        else throw ParseError("line " + std::to_string(lineno) + ": unknown init '" + val + "'",
                              lineno);
      } else throw unknown();
    } else if (section == "discriminator") {
      if (key == "layers") c.disc_layers = int(parse_int(val, lineno));
      else if (key == "width") c.disc_width = int(parse_int(val, lineno));
      else throw unknown();
    } else if (section == "training") {
      if (key == "n_interior") c.n_interior = int(parse_int(val, lineno));
      else if (key == "m_boundary") c.m_boundary = int(parse_int(val, lineno));
      else if (key == "j_labeled") c.j_labeled = int(parse_int(val, lineno));
      else if (key == "eta_g") c.eta_g = parse_double(val, lineno);
      else if (key == "eta_p") c.eta_p = parse_double(val, lineno);
      else if (key == "eta_d") c.eta_d = parse_double(val, lineno);
      else if (key == "lambda1") c.lambda1 = parse_double(val, lineno);
      else if (key == "lambda2") c.lambda2 = parse_double(val, lineno);
      else if (key == "lambda_pw") c.lambda_pw = parse_double(val, lineno);
      else if (key == "tc") c.tc = parse_double(val, lineno);
      else if (key == "max_epochs") c.max_epochs = int(parse_int(val, lineno));
      else if (key == "checkpoint_every") c.checkpoint_every = int(parse_int(val, lineno));
      else throw unknown();
    } else if (section == "pw") {
      if (key == "interior") c.pw_interior = parse_bool(val, lineno);
      else if (key == "q_interior") c.q_interior = parse_double(val, lineno);
      else if (key == "e_interior") c.e_interior = parse_double(val, lineno);
      else if (key == "q_boundary") {
        c.q_boundary.clear();
        for (const auto& s : split_list(val)) c.q_boundary.push_back(parse_double(s, lineno));
      } else if (key == "e_boundary") {
        c.e_boundary.clear();
        for (const auto& s : split_list(val)) c.e_boundary.push_back(parse_double(s, lineno));
      } else if (key == "epsilon") c.pw_epsilon = parse_double(val, lineno);
      else if (key == "termination") {
        if (val == "hl_mass") c.pw_termination = PwTermination::hl_mass;
        else if (val == "literal") c.pw_termination = PwTermination::literal;
        else throw ParseError("line " + std::to_string(lineno) +
                                  ": termination must be hl_mass or literal",
                              lineno);
      } else throw unknown();
    } else if (section == "dgm") {
      if (key == "batch") c.dgm_batch = int(parse_int(val, lineno));
      else if (key == "epochs") c.dgm_epochs = int(parse_int(val, lineno));
      else throw unknown();
    } else if (section == "test") {
      if (key == "n_test") c.n_test = int(parse_int(val, lineno));
      else throw unknown();
    }
  }
  if (!saw_version) {
    throw ParseError("missing schema_version", 0);
  }
  return c;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_experiment_config(ss.str());
}

}  // namespace gapinn
