// Training orchestration for the five modes:
//
//   pinn       one Adam step per epoch on the physics loss (full batch)
//   pinn_pw    same, with point-weighted losses and weight updates per epoch
//   gapinn     per epoch: discriminator step, adversarial generator step,
//              then a physics fine-tune step on the generator
//   gapinn_pw  gapinn with the point-weighted physics loss in step three
//   dgm        fresh mini-batches per epoch, fixed epoch budget
//
// The physics gradient runs through the batched channel engine: interior
// points are processed in fixed-size chunks (parallel, with per-chunk partial
// gradients reduced in chunk order, so results never depend on thread
// count), boundary terms sequentially. The plain-PINN path reuses the
// weighted-loss code with frozen uniform weights, which is what makes the
// q=0 equivalence exact to the bit.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gapinn/common.hpp"
#include "gapinn/losses.hpp"
#include "gapinn/metrics.hpp"
#include "gapinn/network.hpp"
#include "gapinn/optim.hpp"
#include "gapinn/pde.hpp"
#include "gapinn/reference.hpp"
#include "gapinn/rng.hpp"
#include "gapinn/sampling.hpp"

namespace gapinn {

enum class TrainMode { pinn, pinn_pw, gapinn, gapinn_pw, dgm };

inline const char* to_string(TrainMode m) {
  switch (m) {
    case TrainMode::pinn: return "pinn";
    case TrainMode::pinn_pw: return "pinn_pw";
    case TrainMode::gapinn: return "gapinn";
    case TrainMode::gapinn_pw: return "gapinn_pw";
    case TrainMode::dgm: return "dgm";
  }
  return "?";
}

inline TrainMode parse_mode(std::string_view s) {
  if (s == "pinn") return TrainMode::pinn;
  if (s == "pinn_pw") return TrainMode::pinn_pw;
  if (s == "gapinn") return TrainMode::gapinn;
  if (s == "gapinn_pw") return TrainMode::gapinn_pw;
  if (s == "dgm") return TrainMode::dgm;
  throw std::invalid_argument("unknown mode '" + std::string(s) +
                              "'; valid: pinn, pinn_pw, gapinn, gapinn_pw, dgm");
}

struct PwOptions {
  bool interior = false;  // apply point weighting to the equation set
  double q_interior = 0.0;
  double e_interior = 0.0;
  std::vector<double> q_boundary;  // per boundary term
  std::vector<double> e_boundary;
  double epsilon = 0.0;
  PwTermination termination = PwTermination::hl_mass;
};

struct TrainConfig {
  std::string problem = "poisson";
  ProblemOptions problem_opts;
  TrainMode mode = TrainMode::pinn;

  int gen_layers = 4, gen_width = 100;
  int disc_layers = 1, disc_width = 100;
  WeightInit init = WeightInit::glorot_uniform;

  int n_interior = 1000;
  int m_boundary = 100;
  int j_labeled = 1;

  double eta_g = 1e-3;  // adversarial generator rate
  double eta_p = 1e-3;  // physics rate
  double eta_d = 5e-3;  // discriminator rate
  double lambda1 = 1.0;    // boundary weight in the plain physics loss
  double lambda2 = 1.0;    // reserved labeled-loss blend weight (unused by modes)
  double lambda_pw = 1.0;  // boundary weight in the point-weighted loss

  PwOptions pw;
  double tc = 1e-4;  // terminate when the physics loss falls to this
  int max_epochs = 1000;
  std::uint64_t seed = 1;
  int dgm_batch = 256;
  int n_test = 10000;
  int threads = 0;  // 0: use GAPINN_THREADS or the hardware count
  int checkpoint_every = 500;

  bool is_ga() const { return mode == TrainMode::gapinn || mode == TrainMode::gapinn_pw; }
  bool is_pw() const { return mode == TrainMode::pinn_pw || mode == TrainMode::gapinn_pw; }

  void validate() const {
    PdeProblem p = make_problem(problem, problem_opts);  // throws on bad name
    if (gen_layers < 1 || gen_width < 1) throw std::invalid_argument("generator layers/width must be >= 1");
    if (is_ga() && (disc_layers < 1 || disc_width < 1)) {
      throw std::invalid_argument("discriminator layers/width must be >= 1");
    }
    if (n_interior < 1) throw std::invalid_argument("n_interior must be >= 1");
    if (m_boundary < 1) throw std::invalid_argument("m_boundary must be >= 1");
    if (is_ga() && j_labeled < 1) {
      throw std::invalid_argument("adversarial modes need j_labeled >= 1");
    }
    if (eta_p <= 0 || (is_ga() && (eta_g <= 0 || eta_d <= 0))) {
      throw std::invalid_argument("learning rates must be positive");
    }
    if (tc <= 0) throw std::invalid_argument("termination threshold tc must be positive");
    if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
    if (mode == TrainMode::dgm && dgm_batch < 1) {
      throw std::invalid_argument("dgm_batch must be >= 1");
    }
    if (n_test < 1) throw std::invalid_argument("n_test must be >= 1");
    if (checkpoint_every < 1) throw std::invalid_argument("checkpoint_every must be >= 1");
    if (is_pw()) {
      auto want = p.boundary.size();
      if (!pw.q_boundary.empty() && pw.q_boundary.size() != want) {
        throw std::invalid_argument("pw.q_boundary needs one entry per boundary term (" +
                                    std::to_string(want) + ")");
      }
      if (!pw.e_boundary.empty() && pw.e_boundary.size() != want) {
        throw std::invalid_argument("pw.e_boundary needs one entry per boundary term (" +
                                    std::to_string(want) + ")");
      }
    }
  }
};

enum class StopReason { tc_reached, pw_epsilon, max_epochs, numeric_error };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::tc_reached: return "tc_reached";
    case StopReason::pw_epsilon: return "pw_epsilon";
    case StopReason::max_epochs: return "max_epochs";
    case StopReason::numeric_error: return "numeric_error";
  }
  return "?";
}

struct TrainRow {
  int epoch = 0;
  double l_f = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> l_b;
  double l_pinn = std::numeric_limits<double>::quiet_NaN();
  double l_t = std::numeric_limits<double>::quiet_NaN();
  double l_d = std::numeric_limits<double>::quiet_NaN();
  double l_g = std::numeric_limits<double>::quiet_NaN();
  double rho_f = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> rho_b;
};

struct TrainRecord {
  std::string problem;
  TrainMode mode = TrainMode::pinn;
  std::uint64_t seed = 0;
  int boundary_terms = 0;
  bool ga_columns = false;
  bool pw_interior_column = false;
  bool pw_boundary_columns = false;

  std::vector<TrainRow> rows;
  StopReason reason = StopReason::max_epochs;
  int final_epoch = 0;
  double final_nrmse = std::numeric_limits<double>::quiet_NaN();
  std::string error;

  MlpSpec gen_spec;
  ParamVector gen_params;
  std::optional<MlpSpec> disc_spec;
  std::optional<ParamVector> disc_params;
};

struct TrainHooks {
  std::function<void(const TrainRow&)> on_row;
  std::function<void(int epoch, const char* step)> on_step;  // "d","g_adv","g_phys","pw"
  std::function<void(int epoch, const ParamVector& gen)> on_epoch_end;
  std::function<void(int epoch, const ParamVector& gen, const ParamVector* disc)> on_checkpoint;
};

struct ResumeState {
  ParamVector gen;
  std::optional<ParamVector> disc;
  int epoch = 0;
};

namespace traindetail {

inline constexpr int kChunkRows = 256;

struct PhysicsTerms {
  WeightedPointSet interior;
  std::vector<WeightedPointSet> boundary;
};

struct PhysicsResult {
  double sum_sq_f = 0.0;     // sum of squared residual norms
  double weighted_f = 0.0;   // weight-scaled sum
  std::vector<double> sum_sq_b;
  std::vector<double> weighted_b;
  std::vector<double> sq_f;  // per point
  std::vector<std::vector<double>> sq_b;
};

// Batched physics loss + gradient. One instance per training run; reuses all
// workspaces across epochs.
class PhysicsEvaluator {
 public:
  PhysicsEvaluator(const PdeProblem& problem, const MlpSpec& gen, ThreadPool& pool,
                   int max_boundary_rows)
      : problem_(problem), spec_(gen), pool_(pool) {
    layout_ = ParamLayout::of(gen);
    const int slots = pool.size();
    slots_.resize(std::size_t(slots));
    for (auto& ws : slots_) {
      ws.batch.configure(gen, problem.input_dim, kChunkRows);
      ws.adj_val.resize(kChunkRows, gen.output_dim);
      ws.adj_d1.assign(std::size_t(problem.input_dim), Matrix(kChunkRows, gen.output_dim));
      ws.adj_d2.assign(std::size_t(problem.input_dim), Matrix(kChunkRows, gen.output_dim));
      ws.bundle = DerivBundle::zeros(gen.output_dim, problem.input_dim);
      ws.r.assign(std::size_t(problem.residual_dim), 0.0);
      ws.jac.resize(problem.residual_dim, gen.output_dim, problem.input_dim);
      for (int d = 0; d < problem.input_dim; ++d) ws.seed_cols.push_back(d);
    }
    plain_lo_.configure(gen, 0, max_boundary_rows);
    plain_hi_.configure(gen, 0, max_boundary_rows);
    bool needs_slope = false;
    for (const auto& bt : problem.boundary) {
      if (bt.kind == BoundaryKind::periodic_derivative) needs_slope = true;
    }
    if (needs_slope) {
      dual_lo_.configure(gen, 1, max_boundary_rows);
      dual_hi_.configure(gen, 1, max_boundary_rows);
    }
    badj_.resize(max_boundary_rows, gen.output_dim);
    badj2_.resize(max_boundary_rows, gen.output_dim);
  }

  // grad empty: loss evaluation only. Otherwise grad is zeroed and receives
  // d(weighted objective)/d(params) with the boundary part scaled by lambda.
  PhysicsResult run(const ParamVector& params, const PhysicsTerms& terms, double lambda,
                    std::span<double> grad) {
    const bool want_grad = !grad.empty();
    if (want_grad && grad.size() != layout_.total) {
      throw std::invalid_argument("physics gradient buffer size mismatch");
    }
    if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);

    PhysicsResult res;
    const int n = terms.interior.points.size();
    res.sq_f.assign(std::size_t(n), 0.0);

    const int chunks = chunk_count(n, kChunkRows);
    if (want_grad) {
      chunk_grads_.resize(std::size_t(chunks));
      for (auto& g : chunk_grads_) g.assign(layout_.total, 0.0);
    }
    chunk_sums_.assign(std::size_t(chunks), {0.0, 0.0});

    pool_.run(chunks, [&](int c, int slot) {
      interior_chunk(params, terms.interior, c, slot, want_grad, res);
    });

    KahanSum sum_sq, sum_w;
    for (int c = 0; c < chunks; ++c) {
      sum_sq.add(chunk_sums_[std::size_t(c)].first);
      sum_w.add(chunk_sums_[std::size_t(c)].second);
    }
    res.sum_sq_f = sum_sq.value();
    res.weighted_f = sum_w.value();
    if (want_grad) {
      for (int c = 0; c < chunks; ++c) {
        const auto& g = chunk_grads_[std::size_t(c)];
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
      }
    }

    for (std::size_t t = 0; t < terms.boundary.size(); ++t) {
      auto [sum_sq_b, weighted_b, sq] =
          boundary_term(params, terms.boundary[t], int(t), lambda, want_grad ? grad : std::span<double>{});
      res.sum_sq_b.push_back(sum_sq_b);
      res.weighted_b.push_back(weighted_b);
      res.sq_b.push_back(std::move(sq));
    }
    return res;
  }

 private:
  struct Slot {
    MlpBatch batch;
    Matrix adj_val;
    std::vector<Matrix> adj_d1, adj_d2;
    DerivBundle bundle;
    std::vector<double> r;
    ResidualJacobian jac;
    std::vector<int> seed_cols;
  };

  void interior_chunk(const ParamVector& params, const WeightedPointSet& interior, int c,
                      int slot_id, bool want_grad, PhysicsResult& res) {
    Slot& ws = slots_[std::size_t(slot_id)];
    const int D = problem_.input_dim;
    const int K = spec_.output_dim;
    const int begin = c * kChunkRows;
    const int end = std::min(interior.points.size(), begin + kChunkRows);
    const int rows = end - begin;

    ws.batch.forward(params, interior.points.coords.data() + std::size_t(begin) * D, rows,
                     ws.seed_cols);
    if (want_grad) {
      for (int r = 0; r < rows; ++r) {
        for (int k = 0; k < K; ++k) ws.adj_val.at(r, k) = 0.0;
        for (int d = 0; d < D; ++d) {
          for (int k = 0; k < K; ++k) {
            ws.adj_d1[std::size_t(d)].at(r, k) = 0.0;
            ws.adj_d2[std::size_t(d)].at(r, k) = 0.0;
          }
        }
      }
    }

    KahanSum loc_sq, loc_w;
    for (int r = 0; r < rows; ++r) {
      const int i = begin + r;
      for (int k = 0; k < K; ++k) {
        ws.bundle.u[std::size_t(k)] = ws.batch.out_val().at(r, k);
        for (int d = 0; d < D; ++d) {
          ws.bundle.first.at(k, d) = ws.batch.out_d1(d).at(r, k);
          ws.bundle.second.at(k, d) = ws.batch.out_d2(d).at(r, k);
        }
      }
      auto x = interior.points.point(i);
      if (want_grad) {
        problem_.residual_jac_fn(ws.bundle, x, ws.r, ws.jac);
      } else {
        problem_.residual_fn(ws.bundle, x, ws.r);
      }
      double sq = 0.0;
      for (double v : ws.r) sq += v * v;
      res.sq_f[std::size_t(i)] = sq;
      loc_sq.add(sq);
      const double w = interior.weights[std::size_t(i)];
      loc_w.add(w * sq);

      if (want_grad) {
        for (int comp = 0; comp < problem_.residual_dim; ++comp) {
          const double scale = 2.0 * w * ws.r[std::size_t(comp)];
          if (scale == 0.0) continue;
          for (int k = 0; k < K; ++k) {
            ws.adj_val.at(r, k) += scale * ws.jac.du.at(comp, k);
            for (int d = 0; d < D; ++d) {
              ws.adj_d1[std::size_t(d)].at(r, k) +=
                  scale * ws.jac.dfirst[std::size_t(comp)].at(k, d);
              ws.adj_d2[std::size_t(d)].at(r, k) +=
                  scale * ws.jac.dsecond[std::size_t(comp)].at(k, d);
            }
          }
        }
      }
    }
    chunk_sums_[std::size_t(c)] = {loc_sq.value(), loc_w.value()};
    if (want_grad) {
      ws.batch.backward(params, ws.adj_val, ws.adj_d1, ws.adj_d2, chunk_grads_[std::size_t(c)]);
    }
  }

  std::tuple<double, double, std::vector<double>> boundary_term(const ParamVector& params,
                                                                const WeightedPointSet& set,
                                                                int term, double lambda,
                                                                std::span<double> grad) {
    const BoundaryTerm& bt = problem_.boundary[std::size_t(term)];
    const bool want_grad = !grad.empty();
    const int m = set.points.size();
    const int K = spec_.output_dim;
    const int D = problem_.input_dim;
    std::vector<double> sq(std::size_t(m), 0.0);
    KahanSum loc_sq, loc_w;

    if (bt.kind == BoundaryKind::dirichlet) {
      plain_lo_.forward(params, set.points.coords.data(), m, {});
      for (int r = 0; r < m; ++r) {
        auto g = bt.target(set.points.point(r));
        double s = 0.0;
        const double w = set.weights[std::size_t(r)];
        for (int k = 0; k < K; ++k) {
          double d = plain_lo_.out_val().at(r, k) - g[std::size_t(k)];
          s += d * d;
          badj_.at(r, k) = want_grad ? 2.0 * lambda * w * d : 0.0;
        }
        sq[std::size_t(r)] = s;
        loc_sq.add(s);
        loc_w.add(w * s);
      }
      if (want_grad) {
        reshape_rows(badj_, m, K);
        plain_lo_.backward(params, badj_, {}, {}, grad);
      }
      return {loc_sq.value(), loc_w.value(), std::move(sq)};
    }

    // periodic terms: evaluate the low-face points and their high-face
    // partners, residual is the difference
    mirror_.assign(set.points.coords.begin(), set.points.coords.end());
    for (int r = 0; r < m; ++r) {
      mirror_[std::size_t(r) * D + bt.coord] = bt.faces[1];
    }
    if (bt.kind == BoundaryKind::periodic_value) {
      plain_lo_.forward(params, set.points.coords.data(), m, {});
      plain_hi_.forward(params, mirror_.data(), m, {});
      for (int r = 0; r < m; ++r) {
        double s = 0.0;
        const double w = set.weights[std::size_t(r)];
        for (int k = 0; k < K; ++k) {
          double d = plain_lo_.out_val().at(r, k) - plain_hi_.out_val().at(r, k);
          s += d * d;
          double a = want_grad ? 2.0 * lambda * w * d : 0.0;
          badj_.at(r, k) = a;
          badj2_.at(r, k) = -a;
        }
        sq[std::size_t(r)] = s;
        loc_sq.add(s);
        loc_w.add(w * s);
      }
      if (want_grad) {
        reshape_rows(badj_, m, K);
        reshape_rows(badj2_, m, K);
        plain_lo_.backward(params, badj_, {}, {}, grad);
        plain_hi_.backward(params, badj2_, {}, {}, grad);
      }
      return {loc_sq.value(), loc_w.value(), std::move(sq)};
    }

    // periodic_derivative: compare d/dx_coord across the faces
    const int cols[1] = {bt.coord};
    dual_lo_.forward(params, set.points.coords.data(), m, cols);
    dual_hi_.forward(params, mirror_.data(), m, cols);
    for (int r = 0; r < m; ++r) {
      double s = 0.0;
      const double w = set.weights[std::size_t(r)];
      for (int k = 0; k < K; ++k) {
        double d = dual_lo_.out_d1(0).at(r, k) - dual_hi_.out_d1(0).at(r, k);
        s += d * d;
        double a = want_grad ? 2.0 * lambda * w * d : 0.0;
        badj_.at(r, k) = a;
        badj2_.at(r, k) = -a;
      }
      sq[std::size_t(r)] = s;
      loc_sq.add(s);
      loc_w.add(w * s);
    }
    if (want_grad) {
      reshape_rows(badj_, m, K);
      reshape_rows(badj2_, m, K);
      Matrix val_zero(m, K);
      std::vector<Matrix> d2_zero(1, Matrix(m, K));
      std::vector<Matrix> d1_lo(1, badj_);
      dual_lo_.backward(params, val_zero, d1_lo, d2_zero, grad);
      std::vector<Matrix> d1_hi(1, badj2_);
      dual_hi_.backward(params, val_zero, d1_hi, d2_zero, grad);
    }
    return {loc_sq.value(), loc_w.value(), std::move(sq)};
  }

  static void reshape_rows(Matrix& m, int rows, int cols) {
    m.rows = rows;
    m.cols = cols;
  }

  const PdeProblem& problem_;
  MlpSpec spec_;
  ParamLayout layout_;
  ThreadPool& pool_;
  std::vector<Slot> slots_;
  MlpBatch plain_lo_, plain_hi_, dual_lo_, dual_hi_;
  Matrix badj_, badj2_;
  std::vector<double> mirror_;
  std::vector<std::vector<double>> chunk_grads_;
  std::vector<std::pair<double, double>> chunk_sums_;
};

// Discriminator/adversarial-generator steps over the labeled set.
class AdversarialSteps {
 public:
  AdversarialSteps(const MlpSpec& gen, const MlpSpec& disc, int labeled_count)
      : gen_spec_(gen), disc_spec_(disc), j_(labeled_count) {
    gen_batch_.configure(gen, 0, j_);
    disc_batch_.configure(disc, 0, 2 * j_);
    disc_fake_.configure(disc, 0, j_);
    disc_in_.resize(2 * j_, disc.input_dim);
    fake_in_.resize(j_, disc.input_dim);
    dadj_.resize(2 * j_, 1);
    fadj_.resize(j_, 1);
    gadj_.resize(j_, gen.output_dim);
    xadj_.resize(j_, disc.input_dim);
  }

  // L_D = mean_j (1 - D(real_j)) + D(fake_j); gradient w.r.t. the
  // discriminator parameters.
  double d_step(const ParamVector& gen_p, const ParamVector& disc_p, const LabeledSet& labeled,
                std::span<double> grad_d) {
    const int in = gen_spec_.input_dim;
    const int out = gen_spec_.output_dim;
    gen_batch_.forward(gen_p, labeled.points.coords.data(), j_, {});
    for (int r = 0; r < j_; ++r) {
      auto x = labeled.points.point(r);
      for (int c = 0; c < in; ++c) {
        disc_in_.at(r, c) = x[std::size_t(c)];
        disc_in_.at(j_ + r, c) = x[std::size_t(c)];
      }
      for (int k = 0; k < out; ++k) {
        disc_in_.at(r, in + k) = labeled.values.at(r, k);             // real pair
        disc_in_.at(j_ + r, in + k) = gen_batch_.out_val().at(r, k);  // generated pair
      }
    }
    disc_batch_.forward(disc_p, disc_in_.data.data(), 2 * j_, {});
    KahanSum loss;
    const double inv = 1.0 / double(j_);
    for (int r = 0; r < j_; ++r) {
      loss.add(1.0 - disc_batch_.out_val().at(r, 0));
      loss.add(disc_batch_.out_val().at(j_ + r, 0));
      dadj_.at(r, 0) = -inv;
      dadj_.at(j_ + r, 0) = inv;
    }
    if (!grad_d.empty()) {
      std::fill(grad_d.begin(), grad_d.end(), 0.0);
      disc_batch_.backward(disc_p, dadj_, {}, {}, grad_d);
    }
    return loss.value() * inv;
  }

  // L_G = L_T + mean_j (1 - D(fake_j)); gradient w.r.t. the generator
  // parameters, chaining through the (frozen) discriminator.
  double g_step(const ParamVector& gen_p, const ParamVector& disc_p, const LabeledSet& labeled,
                std::span<double> grad_g, double* l_t_out) {
    const int in = gen_spec_.input_dim;
    const int out = gen_spec_.output_dim;
    gen_batch_.forward(gen_p, labeled.points.coords.data(), j_, {});
    for (int r = 0; r < j_; ++r) {
      auto x = labeled.points.point(r);
      for (int c = 0; c < in; ++c) fake_in_.at(r, c) = x[std::size_t(c)];
      for (int k = 0; k < out; ++k) fake_in_.at(r, in + k) = gen_batch_.out_val().at(r, k);
    }
    disc_fake_.forward(disc_p, fake_in_.data.data(), j_, {});
    const double inv = 1.0 / double(j_);
    KahanSum lt, fool;
    for (int r = 0; r < j_; ++r) {
      double d2 = 0.0;
      for (int k = 0; k < out; ++k) {
        double d = gen_batch_.out_val().at(r, k) - labeled.values.at(r, k);
        d2 += d * d;
      }
      lt.add(d2);
      fool.add(1.0 - disc_fake_.out_val().at(r, 0));
      fadj_.at(r, 0) = -inv;
    }
    double l_t = lt.value() * inv;
    if (l_t_out) *l_t_out = l_t;

    if (!grad_g.empty()) {
      std::fill(grad_g.begin(), grad_g.end(), 0.0);
      xadj_.fill(0.0);
      // no discriminator gradient needed here, but the input adjoint is
      std::vector<double> scratch(ParamLayout::of(disc_spec_).total, 0.0);
      disc_fake_.backward(disc_p, fadj_, {}, {}, scratch, &xadj_);
      for (int r = 0; r < j_; ++r) {
        for (int k = 0; k < out; ++k) {
          gadj_.at(r, k) =
              2.0 * inv * (gen_batch_.out_val().at(r, k) - labeled.values.at(r, k)) +
              xadj_.at(r, in + k);
        }
      }
      gen_batch_.backward(gen_p, gadj_, {}, {}, grad_g);
    }
    return l_t + fool.value() * inv;
  }

 private:
  MlpSpec gen_spec_, disc_spec_;
  int j_;
  MlpBatch gen_batch_, disc_batch_, disc_fake_;
  Matrix disc_in_, fake_in_, dadj_, fadj_, gadj_, xadj_;
};

}  // namespace traindetail

// Seed-stream tags; fixed so a (config, seed) pair always replays.
namespace seedtag {
inline constexpr std::uint64_t kGenInit = 0x47;
inline constexpr std::uint64_t kDiscInit = 0x44;
inline constexpr std::uint64_t kInterior = 1;
inline constexpr std::uint64_t kBoundaryBase = 0x100;
inline constexpr std::uint64_t kLabeled = 2;
inline constexpr std::uint64_t kTest = 3;
inline constexpr std::uint64_t kDgm = 4;
inline constexpr std::uint64_t kDgmBoundaryBase = 0x200;
}  // namespace seedtag

// Runs one training session. For dataset-backed problems the caller supplies
// the reference set (file or fallback oracle); analytic problems ignore it.
inline TrainRecord train(const TrainConfig& cfg, const TrainHooks& hooks = {},
                         const Dataset* reference = nullptr,
                         const ResumeState* resume = nullptr) {
  cfg.validate();
  const PdeProblem problem = make_problem(cfg.problem, cfg.problem_opts);
  const bool ga = cfg.is_ga();
  const bool pw = cfg.is_pw();
  const bool dgm = cfg.mode == TrainMode::dgm;
  const int terms_n = int(problem.boundary.size());

  if (problem.needs_reference && !reference) {
    throw std::invalid_argument("problem '" + cfg.problem +
                                "' requires a reference dataset (file or fallback oracle)");
  }

  ThreadPool pool(cfg.threads > 0 ? cfg.threads : ThreadPool::default_threads());

  MlpSpec gen = MlpSpec::dense(problem.input_dim, cfg.gen_layers, cfg.gen_width,
                               problem.output_dim, OutputActivation::linear);
  MlpSpec disc = MlpSpec::dense(problem.input_dim + problem.output_dim, cfg.disc_layers,
                                cfg.disc_width, 1, OutputActivation::sigmoid);

  // fixed training sets
  traindetail::PhysicsTerms fixed;
  fixed.interior = WeightedPointSet::uniform(
      latin_hypercube(cfg.n_interior, problem.domain, mix_seed(cfg.seed, seedtag::kInterior)),
      cfg.pw.e_interior, cfg.pw.q_interior, cfg.pw.epsilon, pw && cfg.pw.interior);
  for (int t = 0; t < terms_n; ++t) {
    double qb = t < int(cfg.pw.q_boundary.size()) ? cfg.pw.q_boundary[std::size_t(t)] : 0.0;
    double eb = t < int(cfg.pw.e_boundary.size()) ? cfg.pw.e_boundary[std::size_t(t)] : 0.0;
    fixed.boundary.push_back(WeightedPointSet::uniform(
        sample_boundary(problem, t, cfg.m_boundary,
                        mix_seed(cfg.seed, seedtag::kBoundaryBase + std::uint64_t(t))),
        eb, qb, cfg.pw.epsilon, pw));
  }

  LabeledSet labeled;
  if (ga) {
    labeled = problem.has_analytic
                  ? draw_labeled_analytic(problem, cfg.j_labeled,
                                          mix_seed(cfg.seed, seedtag::kLabeled))
                  : draw_labeled_dataset(*reference, cfg.j_labeled,
                                         mix_seed(cfg.seed, seedtag::kLabeled));
  }

  TestSet test = make_test_set(problem, cfg.n_test, mix_seed(cfg.seed, seedtag::kTest),
                               reference);

  ParamVector gen_params = resume ? resume->gen
                                  : xavier_init(gen, mix_seed(cfg.seed, seedtag::kGenInit),
                                                cfg.init);
  std::optional<ParamVector> disc_params;
  if (ga) {
    disc_params = (resume && resume->disc)
                      ? *resume->disc
                      : xavier_init(disc, mix_seed(cfg.seed, seedtag::kDiscInit), cfg.init);
  }

  AdamState phys_state = AdamState::make(gen_params.values.size(), cfg.eta_p);
  AdamState gadv_state = AdamState::make(gen_params.values.size(), cfg.eta_g);
  AdamState d_state =
      AdamState::make(ga ? disc_params->values.size() : 0, cfg.eta_d);

  const int max_b_rows = std::max(cfg.m_boundary, dgm ? cfg.dgm_batch : 1);
  traindetail::PhysicsEvaluator phys(problem, gen, pool, max_b_rows);
  std::optional<traindetail::AdversarialSteps> adv;
  if (ga) adv.emplace(gen, disc, cfg.j_labeled);

  std::vector<double> grad_phys(gen_params.values.size());
  std::vector<double> grad_gadv(ga ? gen_params.values.size() : 0);
  std::vector<double> grad_d(ga ? disc_params->values.size() : 0);

  TrainRecord rec;
  rec.problem = cfg.problem;
  rec.mode = cfg.mode;
  rec.seed = cfg.seed;
  rec.boundary_terms = terms_n;
  rec.ga_columns = ga;
  rec.pw_interior_column = pw && cfg.pw.interior;
  rec.pw_boundary_columns = pw;
  rec.gen_spec = gen;
  if (ga) rec.disc_spec = disc;

  const double lambda_eff = pw ? cfg.lambda_pw : cfg.lambda1;
  const int start_epoch = resume ? resume->epoch : 0;
  StopReason reason = StopReason::max_epochs;
  int final_epoch = start_epoch;

  traindetail::PhysicsTerms dgm_terms;

  for (int epoch = start_epoch + 1; epoch <= cfg.max_epochs; ++epoch) {
    TrainRow row;
    row.epoch = epoch;
    bool stop = false;
    try {
      if (ga) {
        row.l_d = adv->d_step(gen_params, *disc_params, labeled, grad_d);
        if (!std::isfinite(row.l_d)) {
          throw NumericError("discriminator loss is not finite", 0);
        }
        adam_step(d_state, disc_params->values, grad_d);
        if (hooks.on_step) hooks.on_step(epoch, "d");

        row.l_g = adv->g_step(gen_params, *disc_params, labeled, grad_gadv, &row.l_t);
        if (!std::isfinite(row.l_g)) {
          throw NumericError("adversarial generator loss is not finite", 0);
        }
        adam_step(gadv_state, gen_params.values, grad_gadv);
        if (hooks.on_step) hooks.on_step(epoch, "g_adv");
      }

      const traindetail::PhysicsTerms* terms = &fixed;
      if (dgm) {
        dgm_terms.interior = WeightedPointSet::uniform(latin_hypercube(
            cfg.dgm_batch, problem.domain,
            mix_seed(mix_seed(cfg.seed, seedtag::kDgm), std::uint64_t(epoch))));
        dgm_terms.boundary.clear();
        for (int t = 0; t < terms_n; ++t) {
          dgm_terms.boundary.push_back(WeightedPointSet::uniform(sample_boundary(
              problem, t, cfg.dgm_batch,
              mix_seed(mix_seed(cfg.seed, seedtag::kDgmBoundaryBase + std::uint64_t(t)),
                       std::uint64_t(epoch)))));
        }
        terms = &dgm_terms;
      }

      traindetail::PhysicsResult pres = phys.run(gen_params, *terms, lambda_eff, grad_phys);
      row.l_f = pres.sum_sq_f / double(terms->interior.points.size());
      KahanSum lb_total;
      row.l_b.clear();
      for (int t = 0; t < terms_n; ++t) {
        double lb = pres.sum_sq_b[std::size_t(t)] / double(terms->boundary[std::size_t(t)].points.size());
        row.l_b.push_back(lb);
        lb_total.add(lb);
      }
      row.l_pinn = row.l_f + cfg.lambda1 * lb_total.value();
      if (!std::isfinite(row.l_pinn)) {
        throw NumericError("physics loss is not finite", 0);
      }

      const bool tc_hit = !dgm && row.l_pinn <= cfg.tc;
      bool pw_done = false;
      if (!tc_hit) {
        adam_step(phys_state, gen_params.values, grad_phys);
        if (hooks.on_step) hooks.on_step(epoch, "g_phys");

        if (pw) {
          pw_done = true;
          if (fixed.interior.pw_enabled) {
            auto beta = classify(pres.sq_f, fixed.interior.error_level);
            auto rep = pw_update(fixed.interior, beta, cfg.pw.termination);
            row.rho_f = rep.rho;
            pw_done = pw_done && rep.terminated;
          }
          row.rho_b.assign(std::size_t(terms_n),
                           std::numeric_limits<double>::quiet_NaN());
          for (int t = 0; t < terms_n; ++t) {
            auto& set = fixed.boundary[std::size_t(t)];
            if (!set.pw_enabled) continue;
            auto beta = classify(pres.sq_b[std::size_t(t)], set.error_level);
            auto rep = pw_update(set, beta, cfg.pw.termination);
            row.rho_b[std::size_t(t)] = rep.rho;
            pw_done = pw_done && rep.terminated;
          }
          if (hooks.on_step) hooks.on_step(epoch, "pw");
        }
      }

      rec.rows.push_back(row);
      if (hooks.on_row) hooks.on_row(row);
      if (hooks.on_epoch_end) hooks.on_epoch_end(epoch, gen_params);

      final_epoch = epoch;
      if (tc_hit) {
        reason = StopReason::tc_reached;
        stop = true;
      } else if (pw && pw_done) {
        reason = StopReason::pw_epsilon;
        stop = true;
      } else if (epoch == cfg.max_epochs) {
        reason = StopReason::max_epochs;
        stop = true;
      }

      if (hooks.on_checkpoint &&
          (stop || epoch % cfg.checkpoint_every == 0)) {
        hooks.on_checkpoint(epoch, gen_params, disc_params ? &*disc_params : nullptr);
      }
    } catch (const NumericError& e) {
      reason = StopReason::numeric_error;
      rec.error = e.what();
      final_epoch = epoch;
      stop = true;
    }
    if (stop) break;
  }

  rec.reason = reason;
  rec.final_epoch = final_epoch;
  rec.gen_params = gen_params;
  if (ga) rec.disc_params = disc_params;
  if (reason != StopReason::numeric_error) {
    rec.final_nrmse = nrmse(gen, gen_params, test);
  }
  return rec;
}

// Epoch-indexed series for the requested quantities. Unknown names or
// quantities the run never recorded are argument errors.
inline std::vector<std::pair<std::string, std::vector<double>>> extract_curves(
    const TrainRecord& rec, std::span<const std::string> names) {
  std::vector<std::pair<std::string, std::vector<double>>> out;
  for (const auto& name : names) {
    std::vector<double> col;
    col.reserve(rec.rows.size());
    auto take = [&](auto getter) {
      for (const auto& r : rec.rows) col.push_back(getter(r));
    };
    if (name == "L_f") {
      take([](const TrainRow& r) { return r.l_f; });
    } else if (name == "L_PINN") {
      take([](const TrainRow& r) { return r.l_pinn; });
    } else if (name == "L_T" && rec.ga_columns) {
      take([](const TrainRow& r) { return r.l_t; });
    } else if (name == "L_D" && rec.ga_columns) {
      take([](const TrainRow& r) { return r.l_d; });
    } else if (name == "L_G" && rec.ga_columns) {
      take([](const TrainRow& r) { return r.l_g; });
    } else if (name == "rho_f" && rec.pw_interior_column) {
      take([](const TrainRow& r) { return r.rho_f; });
    } else if (name.rfind("L_b", 0) == 0 && name.size() > 3) {
      int idx = std::stoi(name.substr(3)) - 1;
      if (idx < 0 || idx >= rec.boundary_terms) {
        throw std::invalid_argument("no boundary term for curve '" + name + "'");
      }
      take([idx](const TrainRow& r) { return r.l_b[std::size_t(idx)]; });
    } else if (name.rfind("rho_b", 0) == 0 && name.size() > 5 && rec.pw_boundary_columns) {
      int idx = std::stoi(name.substr(5)) - 1;
      if (idx < 0 || idx >= rec.boundary_terms) {
        throw std::invalid_argument("no boundary term for curve '" + name + "'");
      }
      take([idx](const TrainRow& r) {
        return idx < int(r.rho_b.size()) ? r.rho_b[std::size_t(idx)]
                                         : std::numeric_limits<double>::quiet_NaN();
      });
    } else {
      throw std::invalid_argument("unknown or unrecorded curve '" + name + "'");
    }
    out.emplace_back(name, std::move(col));
  }
  return out;
}

}  // namespace gapinn
