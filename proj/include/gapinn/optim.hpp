// Bias-corrected Adam over flat parameter vectors, plus deterministic
// mini-batch index sampling for the SGD-style baseline.
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gapinn/common.hpp"
#include "gapinn/rng.hpp"

namespace gapinn {

struct AdamState {
  std::vector<double> m;  // first moment
  std::vector<double> v;  // second moment
  std::int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double lr = 1e-3;

  static AdamState make(std::size_t n, double lr) {
    AdamState s;
    s.m.assign(n, 0.0);
    s.v.assign(n, 0.0);
    s.lr = lr;
    return s;
  }
};

inline void adam_step(AdamState& st, std::span<double> params, std::span<const double> grad) {
  if (params.size() != st.m.size() || grad.size() != st.m.size()) {
    throw std::invalid_argument("adam_step: parameter/gradient length mismatch");
  }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw NumericError("adam_step: non-finite gradient at index " + std::to_string(i), i);
    }
  }
  st.t += 1;
  const double c1 = 1.0 - std::pow(st.beta1, double(st.t));
  const double c2 = 1.0 - std::pow(st.beta2, double(st.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * grad[i];
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * grad[i] * grad[i];
    double mhat = st.m[i] / c1;
    double vhat = st.v[i] / c2;
    params[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
  }
}

// min(b, n) indices sampled uniformly without replacement, a fresh draw per
// step, reproducible per (seed, step).
inline std::vector<int> minibatch_indices(int n, int b, std::uint64_t seed, std::int64_t step) {
  if (n <= 0) throw std::invalid_argument("minibatch_indices: empty index range");
  if (b < 1) throw std::invalid_argument("minibatch_indices: batch size must be >= 1");
  Rng rng(mix_seed(seed, std::uint64_t(step)));
  return rng.sample_without_replacement(n, b);
}

}  // namespace gapinn
