// The six benchmark problems: equation residuals, boundary terms, domains and
// analytic solutions where they exist.
//
// Each residual is written once as a template over a bundle accessor, then
// instantiated twice: with plain doubles for evaluation, and with tape
// variables to extract the residual's Jacobian with respect to the derivative
// bundle (which the trainers chain into the network backward pass).
#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "gapinn/common.hpp"
#include "gapinn/dual2.hpp"
#include "gapinn/network.hpp"
#include "gapinn/tape.hpp"

namespace gapinn {

// Values plus first and pure second partials of every output component.
struct DerivBundle {
  std::vector<double> u;  // output_dim
  Matrix first;           // output_dim x input_dim
  Matrix second;          // output_dim x input_dim

  static DerivBundle zeros(int output_dim, int input_dim) {
    DerivBundle b;
    b.u.assign(std::size_t(output_dim), 0.0);
    b.first.resize(output_dim, input_dim);
    b.second.resize(output_dim, input_dim);
    return b;
  }
};

// d(residual component)/d(bundle entry), all small dense blocks.
struct ResidualJacobian {
  Matrix du;                    // residual_dim x output_dim
  std::vector<Matrix> dfirst;   // per component: output_dim x input_dim
  std::vector<Matrix> dsecond;  // per component: output_dim x input_dim

  void resize(int residual_dim, int output_dim, int input_dim) {
    du.resize(residual_dim, output_dim);
    dfirst.assign(std::size_t(residual_dim), Matrix(output_dim, input_dim));
    dsecond.assign(std::size_t(residual_dim), Matrix(output_dim, input_dim));
  }
};

enum class BoundaryKind { dirichlet, periodic_value, periodic_derivative };

struct BoundaryTerm {
  std::string name;
  BoundaryKind kind = BoundaryKind::dirichlet;
  int coord = 0;                  // the coordinate fixed on this region
  std::vector<double> faces;      // one or two face values; periodic: {lo, hi}
  // Dirichlet target g(x); unused for periodic terms.
  std::function<std::vector<double>(std::span<const double>)> target;
};

// Anything evaluable with derivatives: trained networks, analytic stubs,
// hand-built test fields.
class FieldView {
 public:
  virtual ~FieldView() = default;
  virtual int input_dim() const = 0;
  virtual int output_dim() const = 0;
  virtual std::vector<double> value(std::span<const double> x) const = 0;
  virtual DerivBundle bundle(std::span<const double> x) const = 0;
};

struct PdeProblem {
  std::string name;
  int input_dim = 0;
  int output_dim = 0;
  int residual_dim = 0;
  std::vector<std::pair<double, double>> domain;  // per-coordinate bounds
  std::vector<BoundaryTerm> boundary;
  std::function<void(const DerivBundle&, std::span<const double>, std::span<double>)> residual_fn;
  std::function<void(const DerivBundle&, std::span<const double>, std::span<double>,
                     ResidualJacobian&)>
      residual_jac_fn;
  bool has_analytic = false;
  std::function<std::vector<double>(std::span<const double>)> analytic_fn;
  std::function<DerivBundle(std::span<const double>)> analytic_bundle_fn;
  bool needs_reference = false;  // burgers, schrodinger: test data come from files
};

namespace pdeimpl {

inline constexpr double kPi = std::numbers::pi_v<double>;

// Plain overload so the generic residual/solution templates can square
// doubles, Dual2 and Var alike.
template <class T>
  requires std::is_floating_point_v<T>
constexpr T square(T v) {
  return v * v;
}

// Bundle accessors. Scalar is double for evaluation, Var for Jacobians.
struct DoubleBundle {
  using Scalar = double;
  const DerivBundle* b;
  double u(int k) const { return b->u[std::size_t(k)]; }
  double first(int k, int j) const { return b->first.at(k, j); }
  double second(int k, int j) const { return b->second.at(k, j); }
};

struct TapeBundle {
  using Scalar = Var;
  std::vector<Var> u_, first_, second_;
  int D;

  TapeBundle(GradTape& t, const DerivBundle& b) : D(b.first.cols) {
    for (double v : b.u) u_.push_back(t.input(Dual2(v)));
    for (int k = 0; k < b.first.rows; ++k) {
      for (int j = 0; j < D; ++j) first_.push_back(t.input(Dual2(b.first.at(k, j))));
    }
    for (int k = 0; k < b.second.rows; ++k) {
      for (int j = 0; j < D; ++j) second_.push_back(t.input(Dual2(b.second.at(k, j))));
    }
  }
  Var u(int k) const { return u_[std::size_t(k)]; }
  Var first(int k, int j) const { return first_[std::size_t(k) * D + j]; }
  Var second(int k, int j) const { return second_[std::size_t(k) * D + j]; }
};

// --- residual definitions, coordinates as noted -----------------------------

// burgers, x = (t, x): u_t + u u_x - (0.01/pi) u_xx
template <class Acc>
void residual_burgers(const Acc& a, std::span<const double>, typename Acc::Scalar* out) {
  out[0] = a.first(0, 0) + a.u(0) * a.first(0, 1) + a.second(0, 1) * (-0.01 / kPi);
}

// poisson, x = (x, y): laplacian(u) + sin(pi x) sin(pi y)
template <class Acc>
void residual_poisson(const Acc& a, std::span<const double> x, typename Acc::Scalar* out) {
  out[0] = a.second(0, 0) + a.second(0, 1) + std::sin(kPi * x[0]) * std::sin(kPi * x[1]);
}

// helmholtz, x = (x, y): laplacian(u) + k^2 u
template <class Acc>
void residual_helmholtz(const Acc& a, std::span<const double>, double k2,
                        typename Acc::Scalar* out) {
  out[0] = a.second(0, 0) + a.second(0, 1) + a.u(0) * k2;
}

// schrodinger, x = (t, x), h = u + i v:
//   real: -v_t + 0.5 u_xx + (u^2+v^2) u
//   imag:  u_t + 0.5 v_xx + (u^2+v^2) v
template <class Acc>
void residual_schrodinger(const Acc& a, std::span<const double>, typename Acc::Scalar* out) {
  auto mag2 = square(a.u(0)) + square(a.u(1));
  out[0] = a.first(1, 0) * (-1.0) + a.second(0, 1) * 0.5 + mag2 * a.u(0);
  out[1] = a.first(0, 0) + a.second(1, 1) * 0.5 + mag2 * a.u(1);
}

// hd_poisson, x in (0,1)^10: -laplacian(u)
template <class Acc>
void residual_hd_poisson(const Acc& a, std::span<const double>, typename Acc::Scalar* out) {
  auto acc = a.second(0, 0) * (-1.0);
  for (int j = 1; j < 10; ++j) acc = acc - a.second(0, j);
  out[0] = acc;
}

// heat, x = (x, y, t): u_t - (u_xx + u_yy)
template <class Acc>
void residual_heat(const Acc& a, std::span<const double>, typename Acc::Scalar* out) {
  out[0] = a.first(0, 2) - a.second(0, 0) - a.second(0, 1);
}

// Generic double-evaluation and tape-Jacobian wrappers around one template.
template <class Fn>
void eval_residual(Fn&& fn, const DerivBundle& b, std::span<const double> x,
                   std::span<double> out) {
  DoubleBundle acc{&b};
  fn(acc, x, out.data());
}

template <class Fn>
void eval_jacobian(Fn&& fn, const DerivBundle& b, std::span<const double> x,
                   std::span<double> out, ResidualJacobian& jac, int residual_dim) {
  GradTape t;
  t.reserve(128);
  TapeBundle acc(t, b);
  std::vector<Var> outs(static_cast<std::size_t>(residual_dim));
  fn(acc, x, outs.data());
  const int K = b.first.rows;
  const int D = b.first.cols;
  for (int c = 0; c < residual_dim; ++c) {
    out[std::size_t(c)] = t.payload(outs[std::size_t(c)]).val;
    t.set_output(outs[std::size_t(c)]);
    t.run_reverse();
    for (int k = 0; k < K; ++k) {
      jac.du.at(c, k) = t.adjoint_val(acc.u_[std::size_t(k)]);
      for (int j = 0; j < D; ++j) {
        jac.dfirst[std::size_t(c)].at(k, j) = t.adjoint_val(acc.first_[std::size_t(k) * D + j]);
        jac.dsecond[std::size_t(c)].at(k, j) =
            t.adjoint_val(acc.second_[std::size_t(k) * D + j]);
      }
    }
  }
}

// --- analytic solutions ------------------------------------------------------

template <class T>
T poisson_exact(std::span<const T> x) {
  using std::sin;
  return sin(x[0] * kPi) * sin(x[1] * kPi) * (1.0 / (2.0 * kPi * kPi));
}

template <class T>
T helmholtz_exact(std::span<const T> x, double k) {
  using std::sin;
  return sin(x[0] * k);
}

template <class T>
T hd_poisson_exact(std::span<const T> x) {
  return square(x[0]) - square(x[1]) + square(x[2]) - square(x[3]) + x[4] * x[5] +
         x[6] * x[7] * x[8] * x[9];
}

template <class T>
T heat_exact(std::span<const T> x) {
  return x[0] - x[1];
}

// Derivative bundle of a scalar analytic expression via seeded duals.
template <class Fn>
DerivBundle analytic_bundle_of(Fn&& fn, std::span<const double> x) {
  DerivBundle b = DerivBundle::zeros(1, int(x.size()));
  for (int j = 0; j < int(x.size()); ++j) {
    std::vector<Dual2> lifted = lift_seeded(x, j);
    Dual2 r = fn(std::span<const Dual2>(lifted));
    if (j == 0) b.u[0] = r.val;
    b.first.at(0, j) = r.d1;
    b.second.at(0, j) = r.d2;
  }
  return b;
}

}  // namespace pdeimpl

struct ProblemOptions {
  double helmholtz_k = 1.0;  // never fixed upstream; any positive value is valid
};

inline std::vector<std::string> problem_names() {
  return {"burgers", "poisson", "helmholtz", "schrodinger", "hd_poisson", "heat"};
}

inline PdeProblem make_problem(std::string_view name, const ProblemOptions& opt = {}) {
  using namespace pdeimpl;
  PdeProblem p;
  p.name = std::string(name);

  if (name == "burgers") {
    p.input_dim = 2;  // (t, x)
    p.output_dim = 1;
    p.residual_dim = 1;
    p.domain = {{0.0, 1.0}, {-1.0, 1.0}};
    p.needs_reference = true;
    p.residual_fn = [](const DerivBundle& b, std::span<const double> x, std::span<double> out) {
      eval_residual([](auto& a, auto xx, auto* o) { residual_burgers(a, xx, o); }, b, x, out);
    };
    p.residual_jac_fn = [](const DerivBundle& b, std::span<const double> x,
                           std::span<double> out, ResidualJacobian& jac) {
      eval_jacobian([](auto& a, auto xx, auto* o) { residual_burgers(a, xx, o); }, b, x, out,
                    jac, 1);
    };
    BoundaryTerm initial;
    initial.name = "initial";
    initial.coord = 0;
    initial.faces = {0.0};
    initial.target = [](std::span<const double> x) {
      return std::vector<double>{-std::sin(kPi * x[1])};
    };
    BoundaryTerm lateral;
    lateral.name = "lateral";
    lateral.coord = 1;
    lateral.faces = {-1.0, 1.0};
    lateral.target = [](std::span<const double>) { return std::vector<double>{0.0}; };
    p.boundary = {initial, lateral};
    return p;
  }

  if (name == "poisson") {
    p.input_dim = 2;
    p.output_dim = 1;
    p.residual_dim = 1;
    p.domain = {{0.0, 1.0}, {0.0, 1.0}};
    p.residual_fn = [](const DerivBundle& b, std::span<const double> x, std::span<double> out) {
      eval_residual([](auto& a, auto xx, auto* o) { residual_poisson(a, xx, o); }, b, x, out);
    };
    p.residual_jac_fn = [](const DerivBundle& b, std::span<const double> x,
                           std::span<double> out, ResidualJacobian& jac) {
      eval_jacobian([](auto& a, auto xx, auto* o) { residual_poisson(a, xx, o); }, b, x, out,
                    jac, 1);
    };
    auto zero_target = [](std::span<const double>) { return std::vector<double>{0.0}; };
    BoundaryTerm b1;
    b1.name = "y_faces";
    b1.coord = 1;
    b1.faces = {0.0, 1.0};
    b1.target = zero_target;
    BoundaryTerm b2;
    b2.name = "x_faces";
    b2.coord = 0;
    b2.faces = {0.0, 1.0};
    b2.target = zero_target;
    p.boundary = {b1, b2};
    p.has_analytic = true;
    p.analytic_fn = [](std::span<const double> x) {
      return std::vector<double>{poisson_exact<double>(x)};
    };
    p.analytic_bundle_fn = [](std::span<const double> x) {
      return analytic_bundle_of([](std::span<const Dual2> v) { return poisson_exact<Dual2>(v); },
                                x);
    };
    return p;
  }

  if (name == "helmholtz") {
    const double k = opt.helmholtz_k;
    const double k2 = k * k;
    p.input_dim = 2;
    p.output_dim = 1;
    p.residual_dim = 1;
    p.domain = {{0.0, 1.0}, {0.0, 1.0}};
    p.residual_fn = [k2](const DerivBundle& b, std::span<const double> x,
                         std::span<double> out) {
      eval_residual([k2](auto& a, auto xx, auto* o) { residual_helmholtz(a, xx, k2, o); }, b, x,
                    out);
    };
    p.residual_jac_fn = [k2](const DerivBundle& b, std::span<const double> x,
                             std::span<double> out, ResidualJacobian& jac) {
      eval_jacobian([k2](auto& a, auto xx, auto* o) { residual_helmholtz(a, xx, k2, o); }, b, x,
                    out, jac, 1);
    };
    auto target = [k](std::span<const double> x) {
      return std::vector<double>{std::sin(k * x[0])};
    };
    BoundaryTerm b1;
    b1.name = "x_faces";
    b1.coord = 0;
    b1.faces = {0.0, 1.0};
    b1.target = target;
    BoundaryTerm b2;
    b2.name = "y_faces";
    b2.coord = 1;
    b2.faces = {0.0, 1.0};
    b2.target = target;
    p.boundary = {b1, b2};
    p.has_analytic = true;
    p.analytic_fn = [k](std::span<const double> x) {
      return std::vector<double>{helmholtz_exact<double>(x, k)};
    };
    p.analytic_bundle_fn = [k](std::span<const double> x) {
      return analytic_bundle_of(
          [k](std::span<const Dual2> v) { return helmholtz_exact<Dual2>(v, k); }, x);
    };
    return p;
  }

  if (name == "schrodinger") {
    p.input_dim = 2;  // (t, x)
    p.output_dim = 2;
    p.residual_dim = 2;
    p.domain = {{0.0, kPi / 2.0}, {-5.0, 5.0}};
    p.needs_reference = true;
    p.residual_fn = [](const DerivBundle& b, std::span<const double> x, std::span<double> out) {
      eval_residual([](auto& a, auto xx, auto* o) { residual_schrodinger(a, xx, o); }, b, x,
                    out);
    };
    p.residual_jac_fn = [](const DerivBundle& b, std::span<const double> x,
                           std::span<double> out, ResidualJacobian& jac) {
      eval_jacobian([](auto& a, auto xx, auto* o) { residual_schrodinger(a, xx, o); }, b, x,
                    out, jac, 2);
    };
    BoundaryTerm initial;
    initial.name = "initial";
    initial.coord = 0;
    initial.faces = {0.0};
    initial.target = [](std::span<const double> x) {
      return std::vector<double>{2.0 / std::cosh(x[1]), 0.0};
    };
    BoundaryTerm pv;
    pv.name = "periodic_value";
    pv.kind = BoundaryKind::periodic_value;
    pv.coord = 1;
    pv.faces = {-5.0, 5.0};
    BoundaryTerm pd;
    pd.name = "periodic_slope";
    pd.kind = BoundaryKind::periodic_derivative;
    pd.coord = 1;
    pd.faces = {-5.0, 5.0};
    p.boundary = {initial, pv, pd};
    return p;
  }

  if (name == "hd_poisson") {
    p.input_dim = 10;
    p.output_dim = 1;
    p.residual_dim = 1;
    p.domain.assign(10, {0.0, 1.0});
    p.residual_fn = [](const DerivBundle& b, std::span<const double> x, std::span<double> out) {
      eval_residual([](auto& a, auto xx, auto* o) { residual_hd_poisson(a, xx, o); }, b, x,
                    out);
    };
    p.residual_jac_fn = [](const DerivBundle& b, std::span<const double> x,
                           std::span<double> out, ResidualJacobian& jac) {
      eval_jacobian([](auto& a, auto xx, auto* o) { residual_hd_poisson(a, xx, o); }, b, x, out,
                    jac, 1);
    };
    auto poly = [](std::span<const double> x) {
      return std::vector<double>{hd_poisson_exact<double>(x)};
    };
    for (int i = 0; i < 10; ++i) {
      BoundaryTerm t;
      t.name = "face_" + std::to_string(i);
      t.coord = i;
      t.faces = {0.0, 1.0};
      t.target = poly;
      p.boundary.push_back(t);
    }
    p.has_analytic = true;
    p.analytic_fn = poly;
    p.analytic_bundle_fn = [](std::span<const double> x) {
      return analytic_bundle_of(
          [](std::span<const Dual2> v) { return hd_poisson_exact<Dual2>(v); }, x);
    };
    return p;
  }

  if (name == "heat") {
    p.input_dim = 3;  // (x, y, t)
    p.output_dim = 1;
    p.residual_dim = 1;
    // The natural domain is unbounded; training happens on a unit box with
    // the initial condition on the t=0 face.
    p.domain = {{-1.0, 1.0}, {-1.0, 1.0}, {0.0, 1.0}};
    p.residual_fn = [](const DerivBundle& b, std::span<const double> x, std::span<double> out) {
      eval_residual([](auto& a, auto xx, auto* o) { residual_heat(a, xx, o); }, b, x, out);
    };
    p.residual_jac_fn = [](const DerivBundle& b, std::span<const double> x,
                           std::span<double> out, ResidualJacobian& jac) {
      eval_jacobian([](auto& a, auto xx, auto* o) { residual_heat(a, xx, o); }, b, x, out, jac,
                    1);
    };
    BoundaryTerm initial;
    initial.name = "initial";
    initial.coord = 2;
    initial.faces = {0.0};
    initial.target = [](std::span<const double> x) {
      return std::vector<double>{x[0] - x[1]};
    };
    p.boundary = {initial};
    p.has_analytic = true;
    p.analytic_fn = [](std::span<const double> x) {
      return std::vector<double>{heat_exact<double>(x)};
    };
    p.analytic_bundle_fn = [](std::span<const double> x) {
      return analytic_bundle_of([](std::span<const Dual2> v) { return heat_exact<Dual2>(v); },
                                x);
    };
    return p;
  }

  throw std::invalid_argument("unknown problem '" + std::string(name) +
                              "'; valid names: burgers, poisson, helmholtz, schrodinger, "
                              "hd_poisson, heat");
}

// --- operations ---------------------------------------------------------------

inline void check_bundle(const PdeProblem& p, const DerivBundle& b) {
  if (int(b.u.size()) != p.output_dim || b.first.rows != p.output_dim ||
      b.first.cols != p.input_dim || b.second.rows != p.output_dim ||
      b.second.cols != p.input_dim) {
    throw std::invalid_argument("derivative bundle shape does not match problem '" + p.name +
                                "'");
  }
}

inline std::vector<double> residual(const PdeProblem& p, const DerivBundle& b,
                                    std::span<const double> x) {
  check_bundle(p, b);
  if (int(x.size()) != p.input_dim) {
    throw std::invalid_argument("residual: point dimension mismatch");
  }
  std::vector<double> out(std::size_t(p.residual_dim));
  p.residual_fn(b, x, out);
  return out;
}

inline constexpr double kFaceTolerance = 1e-12;

inline bool on_face(double v, std::span<const double> faces) {
  for (double f : faces) {
    if (std::abs(v - f) <= kFaceTolerance) return true;
  }
  return false;
}

// Residual of boundary term i at x. Periodic terms take the low-face point
// and evaluate the partner on the high face themselves.
inline std::vector<double> boundary_residual(const PdeProblem& p, int term, const FieldView& f,
                                             std::span<const double> x) {
  if (term < 0 || term >= int(p.boundary.size())) {
    throw std::invalid_argument("boundary term index out of range");
  }
  const BoundaryTerm& bt = p.boundary[std::size_t(term)];
  if (int(x.size()) != p.input_dim) {
    throw std::invalid_argument("boundary_residual: point dimension mismatch");
  }
  if (bt.kind == BoundaryKind::dirichlet) {
    if (!on_face(x[std::size_t(bt.coord)], bt.faces)) {
      throw std::invalid_argument("point is not on boundary region '" + bt.name + "'");
    }
    std::vector<double> v = f.value(x);
    std::vector<double> g = bt.target(x);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] -= g[k];
    return v;
  }
  // periodic: x must sit on the low face
  if (std::abs(x[std::size_t(bt.coord)] - bt.faces[0]) > kFaceTolerance) {
    throw std::invalid_argument("periodic term expects points on the low face of '" + bt.name +
                                "'");
  }
  std::vector<double> hi(x.begin(), x.end());
  hi[std::size_t(bt.coord)] = bt.faces[1];
  if (bt.kind == BoundaryKind::periodic_value) {
    std::vector<double> lo_v = f.value(x);
    std::vector<double> hi_v = f.value(hi);
    for (std::size_t k = 0; k < lo_v.size(); ++k) lo_v[k] -= hi_v[k];
    return lo_v;
  }
  DerivBundle lo_b = f.bundle(x);
  DerivBundle hi_b = f.bundle(hi);
  std::vector<double> out(std::size_t(p.output_dim));
  for (int k = 0; k < p.output_dim; ++k) {
    out[std::size_t(k)] = lo_b.first.at(k, bt.coord) - hi_b.first.at(k, bt.coord);
  }
  return out;
}

inline std::vector<double> analytic_solution(const PdeProblem& p, std::span<const double> x) {
  if (!p.has_analytic) {
    throw UnsupportedError("problem '" + p.name + "' has no analytic solution");
  }
  return p.analytic_fn(x);
}

// --- field views ---------------------------------------------------------------

// Network-backed field. Holds references; keep spec/params alive while used.
class MlpField : public FieldView {
 public:
  MlpField(const MlpSpec& spec, const ParamVector& params) : spec_(spec), params_(params) {}

  int input_dim() const override { return spec_.input_dim; }
  int output_dim() const override { return spec_.output_dim; }

  std::vector<double> value(std::span<const double> x) const override {
    return forward(spec_, params_, x);
  }

  DerivBundle bundle(std::span<const double> x) const override {
    DerivBundle b = DerivBundle::zeros(spec_.output_dim, spec_.input_dim);
    for (int j = 0; j < spec_.input_dim; ++j) {
      DualEval d = forward_dual(spec_, params_, x, j);
      if (j == 0) b.u = d.value;
      for (int k = 0; k < spec_.output_dim; ++k) {
        b.first.at(k, j) = d.first[std::size_t(k)];
        b.second.at(k, j) = d.second[std::size_t(k)];
      }
    }
    return b;
  }

 private:
  const MlpSpec& spec_;
  const ParamVector& params_;
};

// Exact-solution stub for problems that have one.
class AnalyticField : public FieldView {
 public:
  explicit AnalyticField(const PdeProblem& p) : p_(p) {
    if (!p.has_analytic) {
      throw UnsupportedError("problem '" + p.name + "' has no analytic solution");
    }
  }

  int input_dim() const override { return p_.input_dim; }
  int output_dim() const override { return p_.output_dim; }

  std::vector<double> value(std::span<const double> x) const override {
    return p_.analytic_fn(x);
  }

  DerivBundle bundle(std::span<const double> x) const override {
    return p_.analytic_bundle_fn(x);
  }

 private:
  const PdeProblem& p_;
};

}  // namespace gapinn
