// Dense tanh networks with a batched multi-channel engine.
//
// A "channel" is one component of the Dual2 payload flowing through the net:
// channel 0 is the plain value, and each seeded input direction contributes a
// (d1, d2) pair. Affine layers act on channels independently (weights are
// constants with respect to the seeding), so a pass with D seeded directions
// costs 1+2D value-sized matrix products per layer instead of D separate
// dual sweeps. The backward sweep propagates the same channel structure and
// accumulates exact parameter gradients, which is what the trainers use at
// scale; the GradTape in tape.hpp is the scalar reference for it.
//
// Bit-stability notes: the value channel of a dual pass must equal the plain
// forward pass exactly, so both go through the same (noinline) kernels, and
// every accumulation runs in a fixed order independent of batch splitting.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gapinn/common.hpp"
#include "gapinn/rng.hpp"

#if defined(__GNUC__)
#define GAPINN_NOINLINE __attribute__((noinline))
#define GAPINN_RESTRICT __restrict__
#else
#define GAPINN_NOINLINE
#define GAPINN_RESTRICT
#endif

namespace gapinn {

enum class OutputActivation { linear, sigmoid };
enum class WeightInit { glorot_uniform, he_normal };

struct MlpSpec {
  int input_dim = 1;
  std::vector<int> hidden;
  int output_dim = 1;
  OutputActivation output_activation = OutputActivation::linear;

  // L hidden layers of N nodes each.
  static MlpSpec dense(int input, int layers, int nodes, int output,
                       OutputActivation act = OutputActivation::linear) {
    MlpSpec s;
    s.input_dim = input;
    s.hidden.assign(std::size_t(layers), nodes);
    s.output_dim = output;
    s.output_activation = act;
    return s;
  }

  int affine_count() const { return int(hidden.size()) + 1; }

  int width_in(int layer) const { return layer == 0 ? input_dim : hidden[layer - 1]; }
  int width_out(int layer) const {
    return layer == int(hidden.size()) ? output_dim : hidden[layer];
  }

  std::size_t param_count() const {
    std::size_t total = 0;
    for (int l = 0; l < affine_count(); ++l) {
      total += (std::size_t(width_in(l)) + 1) * std::size_t(width_out(l));
    }
    return total;
  }

  void validate() const {
    if (input_dim < 1 || output_dim < 1) {
      throw std::invalid_argument("MlpSpec: input/output dims must be >= 1");
    }
    for (int w : hidden) {
      if (w < 1) throw std::invalid_argument("MlpSpec: hidden widths must be >= 1");
    }
  }

  bool operator==(const MlpSpec&) const = default;
};

// Offsets into the flat parameter vector. Weights are stored input-major
// ([fan_in][fan_out]) followed by the biases, layer by layer.
struct ParamLayout {
  struct Slice {
    int fan_in = 0;
    int fan_out = 0;
    std::size_t weights = 0;
    std::size_t biases = 0;
  };
  std::vector<Slice> layers;
  std::size_t total = 0;

  static ParamLayout of(const MlpSpec& spec) {
    ParamLayout layout;
    std::size_t off = 0;
    for (int l = 0; l < spec.affine_count(); ++l) {
      Slice s;
      s.fan_in = spec.width_in(l);
      s.fan_out = spec.width_out(l);
      s.weights = off;
      off += std::size_t(s.fan_in) * s.fan_out;
      s.biases = off;
      off += std::size_t(s.fan_out);
      layout.layers.push_back(s);
    }
    layout.total = off;
    return layout;
  }

  bool operator==(const ParamLayout&) const = default;
};

struct ParamVector {
  ParamLayout layout;
  std::vector<double> values;

  static ParamVector zeros(const MlpSpec& spec) {
    ParamVector p;
    p.layout = ParamLayout::of(spec);
    p.values.assign(p.layout.total, 0.0);
    return p;
  }
};

// Glorot-uniform (default) or He-normal initialization; biases zero either
// way, deterministic for a given seed.
inline ParamVector xavier_init(const MlpSpec& spec, std::uint64_t seed,
                               WeightInit init = WeightInit::glorot_uniform) {
  spec.validate();
  ParamVector p = ParamVector::zeros(spec);
  Rng rng(seed);
  for (const auto& l : p.layout.layers) {
    if (init == WeightInit::glorot_uniform) {
      double bound = std::sqrt(6.0 / (l.fan_in + l.fan_out));
      for (std::size_t i = 0; i < std::size_t(l.fan_in) * l.fan_out; ++i) {
        p.values[l.weights + i] = rng.uniform(-bound, bound);
      }
    } else {
      double sigma = std::sqrt(2.0 / l.fan_in);
      for (std::size_t i = 0; i < std::size_t(l.fan_in) * l.fan_out; ++i) {
        p.values[l.weights + i] = sigma * rng.normal();
      }
    }
  }
  return p;
}

namespace kernel {

// Z[r,:] = A[r,:] @ W + bias. W is input-major [k][o]; the o loop is an axpy
// the compiler can vectorize while the k accumulation order stays fixed.
GAPINN_NOINLINE inline void affine_forward(const double* GAPINN_RESTRICT A, int rows,
                                           int fan_in, const double* GAPINN_RESTRICT W,
                                           const double* GAPINN_RESTRICT bias, int fan_out,
                                           double* GAPINN_RESTRICT Z) {
  for (int r = 0; r < rows; ++r) {
    const double* a = A + std::size_t(r) * fan_in;
    double* z = Z + std::size_t(r) * fan_out;
    if (bias) {
      std::memcpy(z, bias, std::size_t(fan_out) * sizeof(double));
    } else {
      std::memset(z, 0, std::size_t(fan_out) * sizeof(double));
    }
    for (int k = 0; k < fan_in; ++k) {
      const double ak = a[k];
      const double* w = W + std::size_t(k) * fan_out;
      for (int o = 0; o < fan_out; ++o) z[o] += ak * w[o];
    }
  }
}

// dW[k,o] += sum_r A[r,k] * G[r,o]
GAPINN_NOINLINE inline void weight_grad(const double* GAPINN_RESTRICT A,
                                        const double* GAPINN_RESTRICT G, int rows, int fan_in,
                                        int fan_out, double* GAPINN_RESTRICT dW) {
  for (int r = 0; r < rows; ++r) {
    const double* a = A + std::size_t(r) * fan_in;
    const double* g = G + std::size_t(r) * fan_out;
    for (int k = 0; k < fan_in; ++k) {
      const double ak = a[k];
      double* d = dW + std::size_t(k) * fan_out;
      for (int o = 0; o < fan_out; ++o) d[o] += ak * g[o];
    }
  }
}

GAPINN_NOINLINE inline void bias_grad(const double* GAPINN_RESTRICT G, int rows, int fan_out,
                                      double* GAPINN_RESTRICT db) {
  for (int r = 0; r < rows; ++r) {
    const double* g = G + std::size_t(r) * fan_out;
    for (int o = 0; o < fan_out; ++o) db[o] += g[o];
  }
}

// GA[r,:] = G[r,:] @ W^T, with Wt pre-transposed to [o][k].
GAPINN_NOINLINE inline void input_adjoint(const double* GAPINN_RESTRICT G, int rows,
                                          int fan_out, const double* GAPINN_RESTRICT Wt,
                                          int fan_in, double* GAPINN_RESTRICT GA) {
  for (int r = 0; r < rows; ++r) {
    const double* g = G + std::size_t(r) * fan_out;
    double* ga = GA + std::size_t(r) * fan_in;
    std::memset(ga, 0, std::size_t(fan_in) * sizeof(double));
    for (int o = 0; o < fan_out; ++o) {
      const double go = g[o];
      const double* w = Wt + std::size_t(o) * fan_in;
      for (int k = 0; k < fan_in; ++k) ga[k] += go * w[k];
    }
  }
}

}  // namespace kernel

// Derivatives of the hidden activation from the stored post-activation value.
struct TanhDerivs {
  double f1, f2, f3;
  explicit TanhDerivs(double t) {
    double s = 1.0 - t * t;
    f1 = s;
    f2 = -2.0 * t * s;
    f3 = -2.0 * s * (s - 2.0 * t * t);
  }
};

struct SigmoidDerivs {
  double f1, f2, f3;
  explicit SigmoidDerivs(double sg) {
    f1 = sg * (1.0 - sg);
    f2 = f1 * (1.0 - 2.0 * sg);
    f3 = f1 * (1.0 - 6.0 * sg + 6.0 * sg * sg);
  }
};

// One reusable forward/backward workspace for a fixed spec, direction count
// and maximum row count. Not thread-safe; use one per worker slot.
class MlpBatch {
 public:
  void configure(const MlpSpec& spec, int dirs, int max_rows) {
    spec.validate();
    if (dirs < 0) throw std::invalid_argument("MlpBatch: dirs must be >= 0");
    spec_ = spec;
    layout_ = ParamLayout::of(spec);
    dirs_ = dirs;
    max_rows_ = max_rows;
    int ch = channels();
    int L = spec_.affine_count();
    z_.assign(L, {});
    act_.assign(L, {});  // act_[l] holds post-tanh activations entering layer l (l>=1)
    for (int l = 0; l < L; ++l) {
      z_[l].resize(ch);
      for (auto& m : z_[l]) m.resize(max_rows, spec_.width_out(l));
      if (l >= 1) {
        act_[l].resize(ch);
        for (auto& m : act_[l]) m.resize(max_rows, spec_.width_in(l));
      }
    }
    in_.resize(ch);
    for (auto& m : in_) m.resize(max_rows, spec_.input_dim);
    out_.resize(ch);
    for (auto& m : out_) m.resize(max_rows, spec_.output_dim);
    int wmax = 0;
    for (int l = 0; l < L; ++l) wmax = std::max(wmax, spec_.width_out(l));
    ga_.resize(ch);
    gz_.resize(ch);
    for (auto& m : ga_) m.resize(max_rows, wmax);
    for (auto& m : gz_) m.resize(max_rows, wmax);
    wt_.assign(layout_.total, 0.0);
  }

  // Re-labels a scratch matrix without zeroing; callers overwrite fully.
  static void reshape(Matrix& m, int r, int c) {
    std::size_t need = std::size_t(r) * c;
    if (m.data.size() < need) m.data.resize(need);
    m.rows = r;
    m.cols = c;
  }

  int channels() const { return 1 + 2 * dirs_; }
  const MlpSpec& spec() const { return spec_; }
  const ParamLayout& layout() const { return layout_; }

  // X is rows*input_dim row-major; seed_cols gives the seeded coordinate per
  // direction. Keeps all intermediate state for a subsequent backward().
  void forward(const ParamVector& params, const double* X, int rows,
               std::span<const int> seed_cols) {
    check_run(params, rows, seed_cols);
    rows_ = rows;
    const int ch = channels();
    const int D = spec_.input_dim;
    // Lift inputs: value channel copies X, d1 channels one-hot, d2 zero.
    std::memcpy(in_[0].data.data(), X, std::size_t(rows) * D * sizeof(double));
    for (int d = 0; d < dirs_; ++d) {
      Matrix& m1 = in_[1 + 2 * d];
      Matrix& m2 = in_[2 + 2 * d];
      m1.fill(0.0);
      m2.fill(0.0);
      for (int r = 0; r < rows; ++r) m1.at(r, seed_cols[d]) = 1.0;
    }
    const int L = spec_.affine_count();
    for (int l = 0; l < L; ++l) {
      const auto& sl = layout_.layers[l];
      const double* W = params.values.data() + sl.weights;
      const double* b = params.values.data() + sl.biases;
      const std::vector<Matrix>& src = (l == 0) ? in_ : act_[l];
      for (int c = 0; c < ch; ++c) {
        kernel::affine_forward(src[c].data.data(), rows, sl.fan_in, W,
                               c == 0 ? b : nullptr, sl.fan_out, z_[l][c].data.data());
      }
      if (l + 1 < L) {
        activate_tanh(l, rows);
      }
    }
    finish_output(rows);
  }

  const Matrix& out_val() const { return out_[0]; }
  const Matrix& out_d1(int dir) const { return out_[1 + 2 * dir]; }
  const Matrix& out_d2(int dir) const { return out_[2 + 2 * dir]; }

  // Accumulates parameter gradients into grad given adjoints of the output
  // channels; adj_d1/adj_d2 may be empty when dirs()==0. If x_adj is given it
  // receives the adjoint of the input values (value channel only).
  void backward(const ParamVector& params, const Matrix& adj_val,
                std::span<const Matrix> adj_d1, std::span<const Matrix> adj_d2,
                std::span<double> grad, Matrix* x_adj = nullptr) {
    if (grad.size() != layout_.total) {
      throw std::invalid_argument("MlpBatch::backward: gradient size mismatch");
    }
    const int rows = rows_;
    const int ch = channels();
    const int L = spec_.affine_count();
    build_transposed(params);
    // Seed pre-activation adjoints of the output layer.
    for (int c = 0; c < ch; ++c) reshape(gz_[c], rows, spec_.output_dim);
    copy_rows(gz_[0], adj_val, rows, spec_.output_dim);
    for (int d = 0; d < dirs_; ++d) {
      copy_rows(gz_[1 + 2 * d], adj_d1[d], rows, spec_.output_dim);
      copy_rows(gz_[2 + 2 * d], adj_d2[d], rows, spec_.output_dim);
    }
    if (spec_.output_activation == OutputActivation::sigmoid) {
      activation_backward_output(rows);
    }
    for (int l = L - 1; l >= 0; --l) {
      const auto& sl = layout_.layers[l];
      const std::vector<Matrix>& src = (l == 0) ? in_ : act_[l];
      double* dW = grad.data() + sl.weights;
      double* db = grad.data() + sl.biases;
      for (int c = 0; c < ch; ++c) {
        kernel::weight_grad(src[c].data.data(), gz_[c].data.data(), rows, sl.fan_in,
                            sl.fan_out, dW);
      }
      kernel::bias_grad(gz_[0].data.data(), rows, sl.fan_out, db);
      if (l == 0) {
        if (x_adj) {
          kernel::input_adjoint(gz_[0].data.data(), rows, sl.fan_out,
                                wt_.data() + sl.weights, sl.fan_in, x_adj->data.data());
        }
        break;
      }
      for (int c = 0; c < ch; ++c) {
        reshape(ga_[c], rows, sl.fan_in);
        kernel::input_adjoint(gz_[c].data.data(), rows, sl.fan_out,
                              wt_.data() + sl.weights, sl.fan_in, ga_[c].data.data());
      }
      for (int c = 0; c < ch; ++c) reshape(gz_[c], rows, spec_.width_out(l - 1));
      activation_backward_hidden(l - 1, rows);
    }
  }

  int dirs() const { return dirs_; }
  int rows() const { return rows_; }

 private:
  void check_run(const ParamVector& params, int rows, std::span<const int> seed_cols) const {
    if (rows < 0 || rows > max_rows_) throw std::invalid_argument("MlpBatch: row count out of range");
    if (int(seed_cols.size()) != dirs_) {
      throw std::invalid_argument("MlpBatch: seed column count does not match configured dirs");
    }
    for (int c : seed_cols) {
      if (c < 0 || c >= spec_.input_dim) {
        throw std::invalid_argument("MlpBatch: seeded coordinate out of range");
      }
    }
    if (params.values.size() != layout_.total) {
      throw std::invalid_argument("MlpBatch: parameter vector does not match spec");
    }
  }

  static void copy_rows(Matrix& dst, const Matrix& src, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
      std::memcpy(dst.row(r), src.row(r), std::size_t(cols) * sizeof(double));
    }
  }

  // tanh over z_[l] into act_[l+1]; value channel then per-direction pairs.
  void activate_tanh(int l, int rows) {
    const int w = spec_.width_out(l);
    for (int r = 0; r < rows; ++r) {
      const double* zv = z_[l][0].row(r);
      double* av = act_[l + 1][0].row(r);
      for (int i = 0; i < w; ++i) av[i] = std::tanh(zv[i]);
      for (int d = 0; d < dirs_; ++d) {
        const double* z1 = z_[l][1 + 2 * d].row(r);
        const double* z2 = z_[l][2 + 2 * d].row(r);
        double* a1 = act_[l + 1][1 + 2 * d].row(r);
        double* a2 = act_[l + 1][2 + 2 * d].row(r);
        for (int i = 0; i < w; ++i) {
          double t = av[i];
          double s = 1.0 - t * t;
          a1[i] = s * z1[i];
          a2[i] = s * z2[i] - 2.0 * t * s * z1[i] * z1[i];
        }
      }
    }
  }

  void finish_output(int rows) {
    const int L = spec_.affine_count();
    const int w = spec_.output_dim;
    const int ch = channels();
    if (spec_.output_activation == OutputActivation::linear) {
      for (int c = 0; c < ch; ++c) copy_rows(out_[c], z_[L - 1][c], rows, w);
      return;
    }
    for (int r = 0; r < rows; ++r) {
      const double* zv = z_[L - 1][0].row(r);
      double* ov = out_[0].row(r);
      for (int i = 0; i < w; ++i) ov[i] = 1.0 / (1.0 + std::exp(-zv[i]));
      for (int d = 0; d < dirs_; ++d) {
        const double* z1 = z_[L - 1][1 + 2 * d].row(r);
        const double* z2 = z_[L - 1][2 + 2 * d].row(r);
        double* o1 = out_[1 + 2 * d].row(r);
        double* o2 = out_[2 + 2 * d].row(r);
        for (int i = 0; i < w; ++i) {
          SigmoidDerivs f(ov[i]);
          o1[i] = f.f1 * z1[i];
          o2[i] = f.f1 * z2[i] + f.f2 * z1[i] * z1[i];
        }
      }
    }
  }

  // Converts post-activation adjoints (in gz_, seeded from the output
  // adjoints) into pre-activation adjoints for the sigmoid head, in place.
  void activation_backward_output(int rows) {
    const int L = spec_.affine_count();
    const int w = spec_.output_dim;
    for (int r = 0; r < rows; ++r) {
      const double* ov = out_[0].row(r);
      double* gv = gz_[0].row(r);
      if (dirs_ == 0) {
        for (int i = 0; i < w; ++i) gv[i] *= SigmoidDerivs(ov[i]).f1;
        continue;
      }
      for (int i = 0; i < w; ++i) {
        SigmoidDerivs f(ov[i]);
        double gval = gv[i] * f.f1;
        for (int d = 0; d < dirs_; ++d) {
          const double zd1 = z_[L - 1][1 + 2 * d].at(r, i);
          const double zd2 = z_[L - 1][2 + 2 * d].at(r, i);
          double* g1 = gz_[1 + 2 * d].row(r);
          double* g2 = gz_[2 + 2 * d].row(r);
          gval += g1[i] * f.f2 * zd1 + g2[i] * (f.f2 * zd2 + f.f3 * zd1 * zd1);
          double gd1 = g1[i] * f.f1 + 2.0 * g2[i] * f.f2 * zd1;
          g2[i] *= f.f1;
          g1[i] = gd1;
        }
        gv[i] = gval;
      }
    }
  }

  // ga_ holds post-activation adjoints for hidden layer l; produce the
  // pre-activation adjoints in gz_ using stored t and the pre-activation
  // direction channels.
  void activation_backward_hidden(int l, int rows) {
    const int w = spec_.width_out(l);
    for (int r = 0; r < rows; ++r) {
      const double* t = act_[l + 1][0].row(r);
      double* gzv = gz_[0].row(r);
      const double* gav = ga_[0].row(r);
      if (dirs_ == 0) {
        for (int i = 0; i < w; ++i) gzv[i] = gav[i] * (1.0 - t[i] * t[i]);
        continue;
      }
      for (int i = 0; i < w; ++i) {
        TanhDerivs f(t[i]);
        double gval = gav[i] * f.f1;
        for (int d = 0; d < dirs_; ++d) {
          const double zd1 = z_[l][1 + 2 * d].at(r, i);
          const double zd2 = z_[l][2 + 2 * d].at(r, i);
          const double ga1 = ga_[1 + 2 * d].at(r, i);
          const double ga2 = ga_[2 + 2 * d].at(r, i);
          gval += ga1 * f.f2 * zd1 + ga2 * (f.f2 * zd2 + f.f3 * zd1 * zd1);
          gz_[1 + 2 * d].at(r, i) = ga1 * f.f1 + 2.0 * ga2 * f.f2 * zd1;
          gz_[2 + 2 * d].at(r, i) = ga2 * f.f1;
        }
        gzv[i] = gval;
      }
    }
  }

  void build_transposed(const ParamVector& params) {
    for (const auto& sl : layout_.layers) {
      const double* W = params.values.data() + sl.weights;
      double* T = wt_.data() + sl.weights;
      for (int k = 0; k < sl.fan_in; ++k) {
        for (int o = 0; o < sl.fan_out; ++o) {
          T[std::size_t(o) * sl.fan_in + k] = W[std::size_t(k) * sl.fan_out + o];
        }
      }
    }
  }

  MlpSpec spec_;
  ParamLayout layout_;
  int dirs_ = 0;
  int max_rows_ = 0;
  int rows_ = 0;
  std::vector<std::vector<Matrix>> z_;    // pre-activation channels per layer
  std::vector<std::vector<Matrix>> act_;  // post-activation channels entering layer l
  std::vector<Matrix> in_;                // lifted input channels
  std::vector<Matrix> out_;               // output channels
  std::vector<Matrix> ga_, gz_;           // adjoint scratch
  std::vector<double> wt_;                // transposed weights
};

// --- single-point conveniences ---------------------------------------------

inline std::vector<double> forward(const MlpSpec& spec, const ParamVector& params,
                                   std::span<const double> x) {
  if (int(x.size()) != spec.input_dim) {
    throw std::invalid_argument("forward: input dimension mismatch");
  }
  MlpBatch batch;
  batch.configure(spec, 0, 1);
  batch.forward(params, x.data(), 1, {});
  const Matrix& y = batch.out_val();
  return std::vector<double>(y.row(0), y.row(0) + spec.output_dim);
}

struct DualEval {
  std::vector<double> value;   // u_k
  std::vector<double> first;   // du_k/dx_j
  std::vector<double> second;  // d2u_k/dx_j2
};

// Value plus first/second derivative along coordinate j, per output
// component. The value entries equal forward() bit-for-bit.
inline DualEval forward_dual(const MlpSpec& spec, const ParamVector& params,
                             std::span<const double> x, int j) {
  if (int(x.size()) != spec.input_dim) {
    throw std::invalid_argument("forward_dual: input dimension mismatch");
  }
  if (j < 0 || j >= spec.input_dim) {
    throw std::invalid_argument("forward_dual: coordinate index out of range");
  }
  MlpBatch batch;
  batch.configure(spec, 1, 1);
  const int cols[1] = {j};
  batch.forward(params, x.data(), 1, cols);
  DualEval out;
  out.value.assign(batch.out_val().row(0), batch.out_val().row(0) + spec.output_dim);
  out.first.assign(batch.out_d1(0).row(0), batch.out_d1(0).row(0) + spec.output_dim);
  out.second.assign(batch.out_d2(0).row(0), batch.out_d2(0).row(0) + spec.output_dim);
  return out;
}

}  // namespace gapinn
