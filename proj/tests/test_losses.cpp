#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "gapinn/losses.hpp"
#include "gapinn/rng.hpp"

using namespace gapinn;

namespace {

class StubField : public FieldView {
 public:
  StubField(int in, int out, std::function<DerivBundle(std::span<const double>)> fn)
      : in_(in), out_(out), fn_(std::move(fn)) {}
  int input_dim() const override { return in_; }
  int output_dim() const override { return out_; }
  std::vector<double> value(std::span<const double> x) const override { return fn_(x).u; }
  DerivBundle bundle(std::span<const double> x) const override { return fn_(x); }

 private:
  int in_, out_;
  std::function<DerivBundle(std::span<const double>)> fn_;
};

PointSet points_of(std::vector<std::vector<double>> pts) {
  PointSet ps;
  ps.dim = int(pts[0].size());
  for (auto& p : pts) ps.coords.insert(ps.coords.end(), p.begin(), p.end());
  return ps;
}

// Independent transcription of the weight-update equations, kept dumb on
// purpose: no clamping, no shortcuts.
std::vector<double> brute_force_update(std::vector<double> w, const std::vector<int>& beta,
                                       double q) {
  double rho = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (beta[i] == -1) rho += w[i];
  }
  double alpha = q * std::log((1.0 - rho) / rho);
  double z = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = w[i] * std::exp(-alpha * beta[i]);
    z += w[i];
  }
  for (auto& x : w) x /= z;
  return w;
}

}  // namespace

TEST_CASE("equation loss on hand fields") {
  PdeProblem bg = make_problem("burgers");
  // u(t,x) = x
  StubField ux(2, 1, [](std::span<const double> x) {
    DerivBundle b = DerivBundle::zeros(1, 2);
    b.u[0] = x[1];
    b.first.at(0, 1) = 1.0;
    return b;
  });
  PointSet two = points_of({{0.1, 0.3}, {0.9, 0.6}});
  CHECK(equation_loss(bg, ux, two) == doctest::Approx(0.225).epsilon(1e-14));

  PointSet one = points_of({{0.1, 0.3}});
  CHECK(equation_loss(bg, ux, one) == doctest::Approx(0.09).epsilon(1e-14));

  PdeProblem po = make_problem("poisson");
  AnalyticField exact(po);
  PointSet grid = latin_hypercube(50, po.domain, 3);
  CHECK(equation_loss(po, exact, grid) < 1e-15);

  PointSet empty;
  empty.dim = 2;
  CHECK_THROWS_AS(equation_loss(bg, ux, empty), std::invalid_argument);
}

TEST_CASE("boundary loss on hand fields") {
  PdeProblem po = make_problem("poisson");
  StubField zero(2, 1, [](std::span<const double>) { return DerivBundle::zeros(1, 2); });
  StubField ones(2, 1, [](std::span<const double>) {
    DerivBundle b = DerivBundle::zeros(1, 2);
    b.u[0] = 1.0;
    return b;
  });
  PointSet bpts = sample_boundary(po, 0, 6, 5);
  CHECK(boundary_loss(po, zero, 0, bpts) == 0.0);
  CHECK(boundary_loss(po, ones, 0, bpts) == doctest::Approx(1.0).epsilon(1e-14));

  PdeProblem bg = make_problem("burgers");
  StubField zero2(2, 1, [](std::span<const double>) { return DerivBundle::zeros(1, 2); });
  PointSet ic = points_of({{0.0, 0.5}});
  CHECK(boundary_loss(bg, zero2, 0, ic) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("composite losses") {
  PdeProblem po = make_problem("poisson");
  AnalyticField exact(po);
  PointSet interior = latin_hypercube(40, po.domain, 11);
  std::vector<PointSet> bsets = {sample_boundary(po, 0, 8, 12), sample_boundary(po, 1, 8, 13)};
  CHECK(pinn_loss(po, exact, interior, bsets, 1.0) < 1e-14);

  // lambda1 = 0 leaves the equation part only
  StubField ones(2, 1, [](std::span<const double>) {
    DerivBundle b = DerivBundle::zeros(1, 2);
    b.u[0] = 1.0;
    return b;
  });
  double lf = equation_loss(po, ones, interior);
  CHECK(pinn_loss(po, ones, interior, bsets, 0.0) == doctest::Approx(lf).epsilon(1e-14));
  double with_b = pinn_loss(po, ones, interior, bsets, 1.0);
  CHECK(with_b ==
        doctest::Approx(lf + boundary_loss(po, ones, 0, bsets[0]) +
                        boundary_loss(po, ones, 1, bsets[1]))
            .epsilon(1e-14));
}

TEST_CASE("labeled loss") {
  StubField f(2, 1, [](std::span<const double> x) {
    DerivBundle b = DerivBundle::zeros(1, 2);
    b.u[0] = x[0];
    return b;
  });
  LabeledSet exact;
  exact.points = points_of({{0.3, 0.0}, {0.8, 0.0}});
  exact.values.resize(2, 1);
  exact.values.at(0, 0) = 0.3;
  exact.values.at(1, 0) = 0.8;
  CHECK(labeled_loss(f, exact) == 0.0);

  LabeledSet off;
  off.points = points_of({{0.3, 0.0}, {0.8, 0.0}});
  off.values.resize(2, 1);
  off.values.at(0, 0) = 0.3 - 1.0;  // error norm 1
  off.values.at(1, 0) = 0.8 + 2.0;  // error norm 2
  CHECK(labeled_loss(f, off) == doctest::Approx(2.5).epsilon(1e-14));

  LabeledSet single;
  single.points = points_of({{0.5, 0.0}});
  single.values.resize(1, 1);
  single.values.at(0, 0) = 0.1;
  CHECK(labeled_loss(f, single) == doctest::Approx(0.16).epsilon(1e-12));
}

TEST_CASE("classification against the error level") {
  std::vector<double> errs = {0.01, 0.03};
  auto beta = classify(errs, 0.02);
  CHECK(beta[0] == 1);
  CHECK(beta[1] == -1);

  std::vector<double> at = {0.02};
  CHECK(classify(at, 0.02)[0] == 1);  // inclusive

  std::vector<double> zeros = {0.0, 0.0, 0.0};
  for (auto b : classify(zeros, 0.0)) CHECK(b == 1);
}

TEST_CASE("weight update stage boundary and hand case") {
  WeightedPointSet s;
  s.weights = {0.5, 0.5};
  s.magnitude = 1.0;
  std::vector<signed char> beta = {-1, +1};
  auto rep = pw_update(s, beta);
  CHECK(rep.rho == 0.5);
  CHECK(rep.alpha == 0.0);
  CHECK(s.weights[0] == 0.5);  // exact fixpoint
  CHECK(s.weights[1] == 0.5);

  WeightedPointSet h;
  h.weights = {0.25, 0.75};
  h.magnitude = 1.0;
  auto rep2 = pw_update(h, beta);
  CHECK(rep2.rho == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(rep2.alpha == doctest::Approx(std::log(3.0)).epsilon(1e-15));
  CHECK(h.weights[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(h.weights[1] == doctest::Approx(0.25).epsilon(1e-12));
  auto brute = brute_force_update({0.25, 0.75}, {-1, +1}, 1.0);
  CHECK(h.weights[0] == doctest::Approx(brute[0]).epsilon(1e-15));
  CHECK(h.weights[1] == doctest::Approx(brute[1]).epsilon(1e-15));
}

TEST_CASE("uniform classifications leave weights untouched") {
  WeightedPointSet s;
  s.weights = {0.2, 0.3, 0.5};
  s.magnitude = 2.0;
  std::vector<double> before = s.weights;
  std::vector<signed char> all_easy = {+1, +1, +1};
  pw_update(s, all_easy);
  CHECK(s.weights == before);  // bit-exact
  std::vector<signed char> all_hard = {-1, -1, -1};
  pw_update(s, all_hard);
  CHECK(s.weights == before);
}

TEST_CASE("unnormalized weights are a state error") {
  WeightedPointSet s;
  s.weights = {0.5, 0.6};
  std::vector<signed char> beta = {+1, -1};
  CHECK_THROWS_AS(pw_update(s, beta), std::logic_error);
}

TEST_CASE("weight update properties under fuzz") {
  Rng rng(0xBEEF);
  for (int trial = 0; trial < 2000; ++trial) {
    int n = 2 + int(rng.below(64));
    WeightedPointSet s;
    s.weights.resize(static_cast<std::size_t>(n));
    double total = 0.0;
    for (auto& w : s.weights) {
      w = rng.uniform(1e-6, 1.0);
      total += w;
    }
    for (auto& w : s.weights) w /= total;
    s.magnitude = rng.uniform(0.0, 2.0);
    std::vector<signed char> beta(static_cast<std::size_t>(n));
    for (auto& b : beta) b = rng.uniform01() < 0.5 ? +1 : -1;

    std::vector<double> before = s.weights;
    auto rep = pw_update(s, beta);

    KahanSum sum;
    for (double w : s.weights) {
      CHECK(w >= 0.0);
      sum.add(w);
    }
    CHECK(std::abs(sum.value() - 1.0) < 1e-12);

    // two-stage sign behavior
    if (rep.rho > 0.5) CHECK(rep.alpha <= 0.0);
    if (rep.rho < 0.5) CHECK(rep.alpha >= 0.0);
    if (s.magnitude > 0.0) {
      if (rep.rho > 0.5) CHECK(rep.alpha < 0.0);
      if (rep.rho < 0.5) CHECK(rep.alpha > 0.0);
    }

    bool any_easy = std::any_of(beta.begin(), beta.end(), [](auto b) { return b > 0; });
    bool any_hard = std::any_of(beta.begin(), beta.end(), [](auto b) { return b < 0; });
    if (any_easy && any_hard && rep.alpha != 0.0) {
      for (std::size_t i = 0; i < beta.size(); ++i) {
        if (rep.alpha < 0.0) {
          // stage 1: easy points gain, hard points lose
          if (beta[i] > 0) CHECK(s.weights[i] > before[i]);
          if (beta[i] < 0) CHECK(s.weights[i] < before[i]);
        } else {
          if (beta[i] > 0) CHECK(s.weights[i] < before[i]);
          if (beta[i] < 0) CHECK(s.weights[i] > before[i]);
        }
      }
    }
  }
}

TEST_CASE("alpha scales linearly in q and ignores loss magnitudes") {
  std::vector<signed char> beta = {-1, +1, +1};
  for (double q : {0.1, 0.5, 2.0}) {
    WeightedPointSet a;
    a.weights = {0.2, 0.5, 0.3};
    a.magnitude = q;
    auto rep = pw_update(a, beta);
    CHECK(rep.alpha == doctest::Approx(q * std::log(0.8 / 0.2)).epsilon(1e-14));
  }
}

TEST_CASE("permutation invariance of the weight update") {
  WeightedPointSet a;
  a.weights = {0.1, 0.2, 0.3, 0.4};
  a.magnitude = 0.7;
  std::vector<signed char> beta = {-1, +1, -1, +1};
  pw_update(a, beta);

  WeightedPointSet b;
  b.weights = {0.4, 0.3, 0.2, 0.1};
  b.magnitude = 0.7;
  std::vector<signed char> rbeta = {+1, -1, +1, -1};
  pw_update(b, rbeta);
  for (int i = 0; i < 4; ++i) {
    CHECK(a.weights[std::size_t(i)] == doctest::Approx(b.weights[std::size_t(3 - i)]).epsilon(1e-15));
  }
}

TEST_CASE("termination semantics") {
  WeightedPointSet s;
  s.weights = {0.999, 0.001};
  s.epsilon = 0.01;
  std::vector<signed char> beta = {+1, -1};  // hard mass 0.001
  auto rep = pw_update(s, beta, PwTermination::hl_mass);
  CHECK(rep.terminated);

  WeightedPointSet l;
  l.weights = {0.999, 0.001};
  l.epsilon = 0.01;
  std::vector<signed char> beta2 = {-1, +1};  // hard mass 0.999, easy mass 0.001
  auto rep2 = pw_update(l, beta2, PwTermination::literal);
  CHECK(rep2.terminated);
  auto rep3 = pw_update(l, beta2, PwTermination::hl_mass);
  CHECK(!rep3.terminated);

  // epsilon = 0 never terminates because rho is clamped away from 0
  WeightedPointSet z;
  z.weights = {1.0};
  z.epsilon = 0.0;
  std::vector<signed char> easy = {+1};
  CHECK(!pw_update(z, easy, PwTermination::hl_mass).terminated);
}

TEST_CASE("weighted losses") {
  std::vector<double> sq = {4.0, 9.0};
  std::vector<double> degenerate = {1.0, 0.0};
  CHECK(weighted_sum(sq, degenerate) == 4.0);
  std::vector<double> w = {0.75, 0.25};
  CHECK(weighted_sum(sq, w) == doctest::Approx(5.25).epsilon(1e-14));

  // uniform weights recover the plain mean
  PdeProblem po = make_problem("poisson");
  StubField wob(2, 1, [](std::span<const double> x) {
    DerivBundle b = DerivBundle::zeros(1, 2);
    b.u[0] = x[0] * x[1];
    b.first.at(0, 0) = x[1];
    b.first.at(0, 1) = x[0];
    return b;
  });
  WeightedPointSet wint = WeightedPointSet::uniform(latin_hypercube(37, po.domain, 2));
  double lw = weighted_equation_loss(po, wob, wint);
  double lu = equation_loss(po, wob, wint.points);
  CHECK(lw == doctest::Approx(lu).epsilon(1e-14));

  std::vector<WeightedPointSet> wb;
  wb.push_back(WeightedPointSet::uniform(sample_boundary(po, 0, 9, 5)));
  wb.push_back(WeightedPointSet::uniform(sample_boundary(po, 1, 9, 6)));
  std::vector<PointSet> ub = {wb[0].points, wb[1].points};
  CHECK(weighted_pinn_loss(po, wob, wint, wb, 1.0) ==
        doctest::Approx(pinn_loss(po, wob, wint.points, ub, 1.0)).epsilon(1e-13));
}
