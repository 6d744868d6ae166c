// Scalar losses and the point-weighting machinery.
//
// Point weighting keeps one normalized weight per collocation point. After
// each training epoch the points are classified as easy-to-learn (squared
// residual <= e) or hard-to-learn, and the weights move by a factor
// exp(-alpha*beta) with alpha = q*log((1-rho)/rho), rho being the current
// hard-point mass. While rho > 0.5 this boosts the easy points (stabilizing
// stage); once rho < 0.5 the hard points take over (fitting stage).
#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "gapinn/common.hpp"
#include "gapinn/pde.hpp"
#include "gapinn/sampling.hpp"

namespace gapinn {

struct WeightedPointSet {
  PointSet points;
  std::vector<double> weights;
  double error_level = 0.0;  // e: desired squared-error level
  double magnitude = 0.0;    // q: update strength
  double epsilon = 0.0;      // termination tolerance on the weight mass
  bool pw_enabled = false;

  static WeightedPointSet uniform(PointSet pts, double e = 0.0, double q = 0.0,
                                  double eps = 0.0, bool enabled = false) {
    WeightedPointSet w;
    const int n = pts.size();
    w.points = std::move(pts);
    w.weights.assign(std::size_t(n), n > 0 ? 1.0 / double(n) : 0.0);
    w.error_level = e;
    w.magnitude = q;
    w.epsilon = eps;
    w.pw_enabled = enabled;
    return w;
  }
};

struct PwStepReport {
  double rho = 0.0;    // hard-point weight mass (clamped)
  double alpha = 0.0;  // applied update magnitude
  bool terminated = false;
};

// Literal mode preserves the stated inequality 1 - rho <= eps even though it
// points the other way from "no hard point left"; hl_mass is the default
// reading (terminate when the hard mass itself falls to eps).
enum class PwTermination { hl_mass, literal };

// +1 (easy) iff squared error <= e, else -1 (hard). The comparison is
// inclusive at e.
inline std::vector<signed char> classify(std::span<const double> sq_errors, double e) {
  std::vector<signed char> beta(sq_errors.size());
  for (std::size_t i = 0; i < sq_errors.size(); ++i) {
    beta[i] = sq_errors[i] <= e ? +1 : -1;
  }
  return beta;
}

inline PwStepReport pw_update(WeightedPointSet& set, std::span<const signed char> beta,
                              PwTermination mode = PwTermination::hl_mass) {
  if (beta.size() != set.weights.size()) {
    throw std::invalid_argument("pw_update: weight/classification size mismatch");
  }
  KahanSum total;
  for (double w : set.weights) total.add(w);
  if (std::abs(total.value() - 1.0) > 1e-9) {
    throw std::logic_error("pw_update: weights are not normalized");
  }

  KahanSum hard;
  bool any_easy = false, any_hard = false;
  for (std::size_t i = 0; i < beta.size(); ++i) {
    if (beta[i] < 0) {
      hard.add(set.weights[i]);
      any_hard = true;
    } else {
      any_easy = true;
    }
  }
  constexpr double kClamp = 1e-8;
  double rho = std::min(1.0 - kClamp, std::max(kClamp, hard.value()));
  double alpha = set.magnitude * std::log((1.0 - rho) / rho);

  // A zero alpha or a single class rescales every weight by a common factor,
  // which renormalization cancels; skip the arithmetic so the fixpoint is
  // exact.
  if (alpha != 0.0 && any_easy && any_hard) {
    KahanSum norm;
    for (std::size_t i = 0; i < beta.size(); ++i) {
      set.weights[i] *= std::exp(-alpha * double(beta[i]));
      norm.add(set.weights[i]);
    }
    double inv = 1.0 / norm.value();
    for (double& w : set.weights) w *= inv;
  }

  PwStepReport rep;
  rep.rho = rho;
  rep.alpha = alpha;
  rep.terminated = mode == PwTermination::hl_mass ? rho <= set.epsilon
                                                  : (1.0 - rho) <= set.epsilon;
  return rep;
}

// --- residual collection ------------------------------------------------------

// Squared equation-residual norm at every interior point.
inline std::vector<double> interior_sq_residuals(const PdeProblem& p, const FieldView& f,
                                                 const PointSet& pts) {
  std::vector<double> out(std::size_t(pts.size()));
  std::vector<double> r(std::size_t(p.residual_dim));
  for (int i = 0; i < pts.size(); ++i) {
    DerivBundle b = f.bundle(pts.point(i));
    p.residual_fn(b, pts.point(i), r);
    double s = 0.0;
    for (double v : r) s += v * v;
    out[std::size_t(i)] = s;
  }
  return out;
}

// Squared boundary-residual norm at every point of term i.
inline std::vector<double> boundary_sq_residuals(const PdeProblem& p, int term,
                                                 const FieldView& f, const PointSet& pts) {
  std::vector<double> out(std::size_t(pts.size()));
  for (int i = 0; i < pts.size(); ++i) {
    std::vector<double> r = boundary_residual(p, term, f, pts.point(i));
    double s = 0.0;
    for (double v : r) s += v * v;
    out[std::size_t(i)] = s;
  }
  return out;
}

// --- losses --------------------------------------------------------------------

inline double mean_of(std::span<const double> v) {
  KahanSum s;
  for (double x : v) s.add(x);
  return s.value() / double(v.size());
}

// Weighted sum; weights are assumed normalized, so no 1/N factor.
inline double weighted_sum(std::span<const double> sq, std::span<const double> w) {
  if (sq.size() != w.size()) throw std::invalid_argument("weighted_sum: size mismatch");
  KahanSum s;
  for (std::size_t i = 0; i < sq.size(); ++i) s.add(w[i] * sq[i]);
  return s.value();
}

inline double equation_loss(const PdeProblem& p, const FieldView& f, const PointSet& pts) {
  if (pts.size() == 0) throw std::invalid_argument("equation_loss: empty point set");
  auto sq = interior_sq_residuals(p, f, pts);
  return mean_of(sq);
}

inline double boundary_loss(const PdeProblem& p, const FieldView& f, int term,
                            const PointSet& pts) {
  if (pts.size() == 0) throw std::invalid_argument("boundary_loss: empty point set");
  auto sq = boundary_sq_residuals(p, term, f, pts);
  return mean_of(sq);
}

inline double pinn_loss(const PdeProblem& p, const FieldView& f, const PointSet& interior,
                        std::span<const PointSet> boundary_sets, double lambda1) {
  double total = equation_loss(p, f, interior);
  KahanSum b;
  for (std::size_t i = 0; i < boundary_sets.size(); ++i) {
    b.add(boundary_loss(p, f, int(i), boundary_sets[i]));
  }
  return total + lambda1 * b.value();
}

inline double labeled_loss(const FieldView& f, const LabeledSet& labeled) {
  const int n = labeled.points.size();
  if (n == 0) throw std::invalid_argument("labeled_loss: empty labeled set");
  KahanSum s;
  for (int i = 0; i < n; ++i) {
    std::vector<double> u = f.value(labeled.points.point(i));
    double d2 = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
      double d = u[k] - labeled.values.at(i, int(k));
      d2 += d * d;
    }
    s.add(d2);
  }
  return s.value() / double(n);
}

inline double weighted_equation_loss(const PdeProblem& p, const FieldView& f,
                                     const WeightedPointSet& set) {
  if (set.points.size() == 0) throw std::invalid_argument("weighted loss: empty point set");
  auto sq = interior_sq_residuals(p, f, set.points);
  return weighted_sum(sq, set.weights);
}

inline double weighted_boundary_loss(const PdeProblem& p, const FieldView& f, int term,
                                     const WeightedPointSet& set) {
  if (set.points.size() == 0) throw std::invalid_argument("weighted loss: empty point set");
  auto sq = boundary_sq_residuals(p, term, f, set.points);
  return weighted_sum(sq, set.weights);
}

inline double weighted_pinn_loss(const PdeProblem& p, const FieldView& f,
                                 const WeightedPointSet& interior,
                                 std::span<const WeightedPointSet> boundary_sets,
                                 double lambda) {
  double total = weighted_equation_loss(p, f, interior);
  KahanSum b;
  for (std::size_t i = 0; i < boundary_sets.size(); ++i) {
    b.add(weighted_boundary_loss(p, f, int(i), boundary_sets[i]));
  }
  return total + lambda * b.value();
}

}  // namespace gapinn
