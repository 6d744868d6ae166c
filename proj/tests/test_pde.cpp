#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "gapinn/pde.hpp"
#include "gapinn/rng.hpp"
#include "oracles.hpp"

using namespace gapinn;

namespace {

constexpr double kPi = std::numbers::pi_v<double>;

// Hand-built field for residual examples.
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

DerivBundle const_bundle(int out, int in, double c) {
  DerivBundle b = DerivBundle::zeros(out, in);
  for (auto& u : b.u) u = c;
  return b;
}

}  // namespace

TEST_CASE("burgers residual examples") {
  PdeProblem p = make_problem("burgers");
  double x[] = {0.4, 0.3};  // (t, x)

  // constant field: all derivative terms vanish
  auto r0 = residual(p, const_bundle(1, 2, 3.7), x);
  CHECK(r0[0] == 0.0);

  // u(t,x) = x: residual is x itself
  DerivBundle b = DerivBundle::zeros(1, 2);
  b.u[0] = x[1];
  b.first.at(0, 1) = 1.0;
  CHECK(residual(p, b, x)[0] == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("poisson residual example") {
  PdeProblem p = make_problem("poisson");
  double x[] = {0.5, 0.5};
  DerivBundle b = DerivBundle::zeros(1, 2);  // u = x^2
  b.u[0] = 0.25;
  b.first.at(0, 0) = 1.0;
  b.second.at(0, 0) = 2.0;
  CHECK(residual(p, b, x)[0] == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("schrodinger residual example") {
  PdeProblem p = make_problem("schrodinger");
  double x[] = {0.2, 1.0};
  auto r = residual(p, const_bundle(2, 2, 0.0), x);
  CHECK(r[0] == 0.0);
  CHECK(r[1] == 0.0);

  DerivBundle b = const_bundle(2, 2, 0.0);
  b.u[0] = 2.0;  // h = 2 (real)
  r = residual(p, b, x);
  CHECK(r[0] == doctest::Approx(8.0).epsilon(1e-15));
  CHECK(r[1] == 0.0);
}

TEST_CASE("hd_poisson analytic field has zero residual") {
  PdeProblem p = make_problem("hd_poisson");
  AnalyticField f(p);
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(10);
    for (auto& xi : x) xi = rng.uniform01();
    DerivBundle b = f.bundle(x);
    CHECK(std::abs(residual(p, b, x)[0]) < 1e-12);
  }
}

TEST_CASE("boundary residual examples") {
  // Helmholtz with k=2 and the exact field: zero on every boundary point.
  ProblemOptions opt;
  opt.helmholtz_k = 2.0;
  PdeProblem hh = make_problem("helmholtz", opt);
  AnalyticField exact(hh);
  double pt[] = {0.3, 0.0};
  auto r = boundary_residual(hh, 1, exact, pt);
  CHECK(std::abs(r[0]) < 1e-14);
  double pt2[] = {1.0, 0.7};
  CHECK(std::abs(boundary_residual(hh, 0, exact, pt2)[0]) < 1e-14);

  // Burgers initial condition with the zero field at (0, 0.5).
  PdeProblem bg = make_problem("burgers");
  StubField zero(2, 1, [](std::span<const double>) { return DerivBundle::zeros(1, 2); });
  double ic[] = {0.0, 0.5};
  CHECK(boundary_residual(bg, 0, zero, ic)[0] == doctest::Approx(1.0).epsilon(1e-15));

  // Schrodinger periodic terms vanish for constants.
  PdeProblem sc = make_problem("schrodinger");
  StubField cst(2, 2, [](std::span<const double>) { return const_bundle(2, 2, 1.3); });
  double pp[] = {0.4, -5.0};
  auto pv = boundary_residual(sc, 1, cst, pp);
  CHECK(pv[0] == 0.0);
  CHECK(pv[1] == 0.0);
  auto pd = boundary_residual(sc, 2, cst, pp);
  CHECK(pd[0] == 0.0);

  // Off-region points are rejected.
  double off[] = {0.5, 0.5};
  CHECK_THROWS_AS(boundary_residual(bg, 0, zero, off), std::invalid_argument);
  double off2[] = {0.4, 5.0};  // high face where the low one is required
  CHECK_THROWS_AS(boundary_residual(sc, 1, cst, off2), std::invalid_argument);
}

TEST_CASE("analytic solutions") {
  PdeProblem po = make_problem("poisson");
  double c[] = {0.5, 0.5};
  CHECK(analytic_solution(po, c)[0] == doctest::Approx(0.050660591821169).epsilon(1e-12));

  PdeProblem hd = make_problem("hd_poisson");
  double e1[] = {1, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  CHECK(analytic_solution(hd, e1)[0] == 1.0);

  PdeProblem he = make_problem("heat");
  double hx[] = {0.7, 0.2, 0.3};
  CHECK(analytic_solution(he, hx)[0] == doctest::Approx(0.5).epsilon(1e-14));

  PdeProblem bg = make_problem("burgers");
  double bx[] = {0.5, 0.0};
  CHECK_THROWS_AS(analytic_solution(bg, bx), UnsupportedError);
  CHECK_THROWS_AS(analytic_solution(make_problem("schrodinger"), bx), UnsupportedError);
}

TEST_CASE("heat solution agrees with the defining Gaussian integral") {
  // u(x,y,t) = (1/(4 pi t)) iint exp(-((x-z1)^2+(y-z2)^2)/(4t)) (z1-z2) dz
  // evaluated by wide trapezoid quadrature after z = x - 2 sqrt(t) a.
  const double x = 0.7, y = 0.2, t = 0.3;
  const double s = 2.0 * std::sqrt(t);
  const int n = 241;
  const double amax = 6.0;
  const double h = 2.0 * amax / (n - 1);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double a = -amax + h * i;
    double wa = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    for (int j = 0; j < n; ++j) {
      double b = -amax + h * j;
      double wb = (j == 0 || j == n - 1) ? 0.5 : 1.0;
      double z1 = x - s * a;
      double z2 = y - s * b;
      total += wa * wb * std::exp(-a * a - b * b) * (z1 - z2);
    }
  }
  total *= h * h / kPi;
  CHECK(total == doctest::Approx(x - y).epsilon(1e-10));
  PdeProblem he = make_problem("heat");
  double hx[] = {x, y, t};
  CHECK(analytic_solution(he, hx)[0] == doctest::Approx(total).epsilon(1e-9));
}

TEST_CASE("analytic stubs satisfy equations and boundaries") {
  Rng rng(0xABCDE);
  for (const char* name : {"poisson", "helmholtz", "hd_poisson", "heat"}) {
    INFO(name);
    PdeProblem p = make_problem(name);
    AnalyticField f(p);
    std::vector<double> r(std::size_t(p.residual_dim));
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> x(std::size_t(p.input_dim));
      for (int c = 0; c < p.input_dim; ++c) {
        auto [lo, hi] = p.domain[std::size_t(c)];
        x[std::size_t(c)] = rng.uniform(lo, hi);
      }
      DerivBundle b = f.bundle(x);
      p.residual_fn(b, x, r);
      for (double v : r) CHECK(std::abs(v) < 1e-8);
    }
    for (std::size_t term = 0; term < p.boundary.size(); ++term) {
      const auto& bt = p.boundary[term];
      for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x(std::size_t(p.input_dim));
        for (int c = 0; c < p.input_dim; ++c) {
          auto [lo, hi] = p.domain[std::size_t(c)];
          x[std::size_t(c)] = rng.uniform(lo, hi);
        }
        x[std::size_t(bt.coord)] = bt.faces[trial % bt.faces.size()];
        if (bt.kind != BoundaryKind::dirichlet) x[std::size_t(bt.coord)] = bt.faces[0];
        for (double v : boundary_residual(p, int(term), f, x)) {
          CHECK(std::abs(v) < 1e-10);
        }
      }
    }
  }
}

TEST_CASE("residual jacobians match finite differences") {
  Rng rng(0x911);
  for (const char* name :
       {"burgers", "poisson", "helmholtz", "schrodinger", "hd_poisson", "heat"}) {
    INFO(name);
    PdeProblem p = make_problem(name);
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<double> x(std::size_t(p.input_dim));
      for (int c = 0; c < p.input_dim; ++c) {
        auto [lo, hi] = p.domain[std::size_t(c)];
        x[std::size_t(c)] = rng.uniform(lo, hi);
      }
      DerivBundle b = DerivBundle::zeros(p.output_dim, p.input_dim);
      for (auto& u : b.u) u = rng.uniform(-1, 1);
      for (auto& v : b.first.data) v = rng.uniform(-1, 1);
      for (auto& v : b.second.data) v = rng.uniform(-1, 1);

      std::vector<double> r0(std::size_t(p.residual_dim));
      ResidualJacobian jac;
      jac.resize(p.residual_dim, p.output_dim, p.input_dim);
      p.residual_jac_fn(b, x, r0, jac);

      // value part agrees with the plain evaluation
      auto rv = residual(p, b, x);
      for (int c = 0; c < p.residual_dim; ++c) {
        CHECK(r0[std::size_t(c)] == doctest::Approx(rv[std::size_t(c)]).epsilon(1e-14));
      }

      const double h = 1e-6;
      auto check_entry = [&](double* slot, double want_dc, int comp) {
        double orig = *slot;
        *slot = orig + h;
        auto rp = residual(p, b, x);
        *slot = orig - h;
        auto rm = residual(p, b, x);
        *slot = orig;
        double fd = (rp[std::size_t(comp)] - rm[std::size_t(comp)]) / (2 * h);
        CHECK(std::abs(want_dc - fd) < 1e-6 * std::max(1.0, std::abs(fd)));
      };
      for (int c = 0; c < p.residual_dim; ++c) {
        for (int k = 0; k < p.output_dim; ++k) {
          check_entry(&b.u[std::size_t(k)], jac.du.at(c, k), c);
          for (int j = 0; j < p.input_dim; ++j) {
            check_entry(&b.first.data[std::size_t(k) * p.input_dim + j],
                        jac.dfirst[std::size_t(c)].at(k, j), c);
            check_entry(&b.second.data[std::size_t(k) * p.input_dim + j],
                        jac.dsecond[std::size_t(c)].at(k, j), c);
          }
        }
      }
    }
  }
}

TEST_CASE("unknown problem name lists valid ones") {
  try {
    make_problem("navier_stokes");
    FAIL("expected an exception");
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    CHECK(msg.find("poisson") != std::string::npos);
    CHECK(msg.find("burgers") != std::string::npos);
  }
}

TEST_CASE("bundle shape mismatches are rejected") {
  PdeProblem p = make_problem("poisson");
  double x[] = {0.5, 0.5};
  CHECK_THROWS_AS(residual(p, DerivBundle::zeros(2, 2), x), std::invalid_argument);
  CHECK_THROWS_AS(residual(p, DerivBundle::zeros(1, 3), x), std::invalid_argument);
}
