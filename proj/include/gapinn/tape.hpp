// Reverse-mode tape over Dual2 payloads. Every recorded node carries a full
// (val, d1, d2) triple, so a loss assembled from network values *and* their
// input derivatives (the physics residual case) still gets exact parameter
// gradients: the reverse sweep propagates a three-component adjoint per node.
// Sweeps run in fixed reverse order, so gradients are bit-reproducible.
//
// This is the reference gradient path. The batched layer-level sweep in
// network.hpp is the fast path used by the trainers; tests pin the two
// against each other and against finite differences.
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "gapinn/dual2.hpp"

namespace gapinn {

class GradTape;

// Handle to one tape node.
struct Var {
  GradTape* tape = nullptr;
  int id = -1;
};

class GradTape {
 public:
  enum class Op : unsigned char {
    kConst, kParam, kInput,
    kAdd, kSub, kMul, kNeg, kInv,
    kTanh, kSin, kCos, kExp, kSquare, kSqrt,
    kVal, kD1, kD2,
  };

  GradTape() = default;

  void reserve(std::size_t nodes) { nodes_.reserve(nodes); }

  void reset() {
    nodes_.clear();
    params_.clear();
    adj_.clear();
    output_ = -1;
  }

  Var constant(Dual2 v) { return push(Op::kConst, -1, -1, v); }
  Var constant(double v) { return push(Op::kConst, -1, -1, Dual2(v)); }

  // Leaf registered as a differentiation target; gradient entries come out in
  // registration order.
  Var param(double v) {
    Var n = push(Op::kParam, -1, -1, Dual2(v));
    params_.push_back(n.id);
    return n;
  }

  // Non-parameter leaf, e.g. a seeded input coordinate or a derivative-bundle
  // entry whose sensitivity is read back with adjoint_val().
  Var input(Dual2 v) { return push(Op::kInput, -1, -1, v); }

  Var add(Var a, Var b) { return push(Op::kAdd, a.id, b.id, payload(a) + payload(b)); }
  Var sub(Var a, Var b) { return push(Op::kSub, a.id, b.id, payload(a) - payload(b)); }
  Var mul(Var a, Var b) { return push(Op::kMul, a.id, b.id, payload(a) * payload(b)); }
  Var neg(Var a) { return push(Op::kNeg, a.id, -1, -payload(a)); }

  Var inv(Var a) {
    const Dual2& x = payload(a);
    double v = 1.0 / x.val;
    double d1 = -x.d1 * v * v;
    double d2 = (-x.d2 + 2.0 * x.d1 * x.d1 * v) * v * v;
    return push(Op::kInv, a.id, -1, Dual2(v, d1, d2));
  }

  Var div(Var a, Var b) { return mul(a, inv(b)); }

  Var tanh_(Var a) { return push(Op::kTanh, a.id, -1, tanh(payload(a))); }
  Var sin_(Var a) { return push(Op::kSin, a.id, -1, sin(payload(a))); }
  Var cos_(Var a) { return push(Op::kCos, a.id, -1, cos(payload(a))); }
  Var exp_(Var a) { return push(Op::kExp, a.id, -1, exp(payload(a))); }
  Var square_(Var a) { return push(Op::kSquare, a.id, -1, square(payload(a))); }
  Var sqrt_(Var a) { return push(Op::kSqrt, a.id, -1, sqrt(payload(a))); }

  // Component extraction: the result is a plain value node.
  Var val(Var a) { return push(Op::kVal, a.id, -1, Dual2(payload(a).val)); }
  Var d1(Var a) { return push(Op::kD1, a.id, -1, Dual2(payload(a).d1)); }
  Var d2(Var a) { return push(Op::kD2, a.id, -1, Dual2(payload(a).d2)); }

  void set_output(Var v) { output_ = v.id; }

  const Dual2& payload(Var v) const { return nodes_[v.id].value; }

  double output_value() const {
    require_output();
    return nodes_[output_].value.val;
  }

  std::size_t size() const { return nodes_.size(); }
  std::size_t param_count() const { return params_.size(); }

  double param_value(std::size_t slot) const { return nodes_[params_[slot]].value.val; }
  void set_param(std::size_t slot, double v) { nodes_[params_[slot]].value = Dual2(v); }
  void set_input(Var leaf, Dual2 v) { nodes_[leaf.id].value = v; }

  // Recomputes every non-leaf payload in recording order from the current
  // leaf payloads. With unchanged leaves the result is bit-identical.
  void replay() {
    for (auto& n : nodes_) {
      switch (n.op) {
        case Op::kConst: case Op::kParam: case Op::kInput:
          break;
        case Op::kAdd: n.value = nodes_[n.a].value + nodes_[n.b].value; break;
        case Op::kSub: n.value = nodes_[n.a].value - nodes_[n.b].value; break;
        case Op::kMul: n.value = nodes_[n.a].value * nodes_[n.b].value; break;
        case Op::kNeg: n.value = -nodes_[n.a].value; break;
        case Op::kInv: {
          const Dual2& x = nodes_[n.a].value;
          double v = 1.0 / x.val;
          double dd1 = -x.d1 * v * v;
          double dd2 = (-x.d2 + 2.0 * x.d1 * x.d1 * v) * v * v;
          n.value = Dual2(v, dd1, dd2);
          break;
        }
        case Op::kTanh: n.value = tanh(nodes_[n.a].value); break;
        case Op::kSin: n.value = sin(nodes_[n.a].value); break;
        case Op::kCos: n.value = cos(nodes_[n.a].value); break;
        case Op::kExp: n.value = exp(nodes_[n.a].value); break;
        case Op::kSquare: n.value = square(nodes_[n.a].value); break;
        case Op::kSqrt: n.value = sqrt(nodes_[n.a].value); break;
        case Op::kVal: n.value = Dual2(nodes_[n.a].value.val); break;
        case Op::kD1: n.value = Dual2(nodes_[n.a].value.d1); break;
        case Op::kD2: n.value = Dual2(nodes_[n.a].value.d2); break;
      }
    }
  }

  // Single reverse sweep from the declared output. Adjoints of every node
  // are retained until the next sweep or reset.
  void run_reverse() {
    require_output();
    adj_.assign(nodes_.size() * 3, 0.0);
    adj_[std::size_t(output_) * 3] = 1.0;
    for (int i = int(nodes_.size()) - 1; i >= 0; --i) {
      const Node& n = nodes_[i];
      const double cv = adj_[std::size_t(i) * 3];
      const double c1 = adj_[std::size_t(i) * 3 + 1];
      const double c2 = adj_[std::size_t(i) * 3 + 2];
      if (cv == 0.0 && c1 == 0.0 && c2 == 0.0) continue;
      switch (n.op) {
        case Op::kConst: case Op::kParam: case Op::kInput:
          break;
        case Op::kAdd:
          bump(n.a, cv, c1, c2);
          bump(n.b, cv, c1, c2);
          break;
        case Op::kSub:
          bump(n.a, cv, c1, c2);
          bump(n.b, -cv, -c1, -c2);
          break;
        case Op::kMul: {
          const Dual2& a = nodes_[n.a].value;
          const Dual2& b = nodes_[n.b].value;
          bump(n.a, cv * b.val + c1 * b.d1 + c2 * b.d2,
               c1 * b.val + 2.0 * c2 * b.d1, c2 * b.val);
          bump(n.b, cv * a.val + c1 * a.d1 + c2 * a.d2,
               c1 * a.val + 2.0 * c2 * a.d1, c2 * a.val);
          break;
        }
        case Op::kNeg:
          bump(n.a, -cv, -c1, -c2);
          break;
        case Op::kInv: {
          double x = nodes_[n.a].value.val;
          double ix = 1.0 / x;
          unary_back(n.a, cv, c1, c2, -ix * ix, 2.0 * ix * ix * ix,
                     -6.0 * ix * ix * ix * ix);
          break;
        }
        case Op::kTanh: {
          double t = std::tanh(nodes_[n.a].value.val);
          double s = 1.0 - t * t;
          unary_back(n.a, cv, c1, c2, s, -2.0 * t * s, -2.0 * s * (s - 2.0 * t * t));
          break;
        }
        case Op::kSin: {
          double x = nodes_[n.a].value.val;
          unary_back(n.a, cv, c1, c2, std::cos(x), -std::sin(x), -std::cos(x));
          break;
        }
        case Op::kCos: {
          double x = nodes_[n.a].value.val;
          unary_back(n.a, cv, c1, c2, -std::sin(x), -std::cos(x), std::sin(x));
          break;
        }
        case Op::kExp: {
          double e = std::exp(nodes_[n.a].value.val);
          unary_back(n.a, cv, c1, c2, e, e, e);
          break;
        }
        case Op::kSquare:
          unary_back(n.a, cv, c1, c2, 2.0 * nodes_[n.a].value.val, 2.0, 0.0);
          break;
        case Op::kSqrt: {
          double x = nodes_[n.a].value.val;
          double r = std::sqrt(x);
          unary_back(n.a, cv, c1, c2, 0.5 / r, -0.25 / (x * r), 0.375 / (x * x * r));
          break;
        }
        case Op::kVal: bump_component(n.a, 0, cv); break;
        case Op::kD1: bump_component(n.a, 1, cv); break;
        case Op::kD2: bump_component(n.a, 2, cv); break;
      }
    }
  }

  // d(output)/d(leaf value payload), valid after run_reverse().
  double adjoint_val(Var v) const { return adj_[std::size_t(v.id) * 3]; }

  // d(output)/d(every parameter), in registration order.
  std::vector<double> reverse_gradient() {
    run_reverse();
    std::vector<double> g(params_.size());
    for (std::size_t k = 0; k < params_.size(); ++k) {
      g[k] = adj_[std::size_t(params_[k]) * 3];
    }
    return g;
  }

 private:
  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    Dual2 value;
  };

  void require_output() const {
    if (output_ < 0) throw std::logic_error("GradTape: no output recorded");
  }

  Var push(Op op, int a, int b, Dual2 v) {
    nodes_.push_back(Node{op, a, b, v});
    return Var{this, int(nodes_.size()) - 1};
  }

  void bump(int id, double dv, double dd1, double dd2) {
    adj_[std::size_t(id) * 3] += dv;
    adj_[std::size_t(id) * 3 + 1] += dd1;
    adj_[std::size_t(id) * 3 + 2] += dd2;
  }

  void bump_component(int id, int comp, double dv) {
    adj_[std::size_t(id) * 3 + comp] += dv;
  }

  // Backward rule for y = f(a) applied in Dual2 algebra, with f', f'', f'''
  // at a.val. y.val=f, y.d1=f'·a1, y.d2=f'·a2+f''·a1².
  void unary_back(int id, double cv, double c1, double c2, double f1, double f2, double f3) {
    const Dual2& a = nodes_[id].value;
    bump(id,
         cv * f1 + c1 * f2 * a.d1 + c2 * (f2 * a.d2 + f3 * a.d1 * a.d1),
         c1 * f1 + 2.0 * c2 * f2 * a.d1,
         c2 * f1);
  }

  std::vector<Node> nodes_;
  std::vector<int> params_;
  std::vector<double> adj_;
  int output_ = -1;
};

inline Var operator+(Var a, Var b) { return a.tape->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.tape->mul(a, b); }
inline Var operator/(Var a, Var b) { return a.tape->div(a, b); }
inline Var operator-(Var a) { return a.tape->neg(a); }
inline Var operator+(Var a, double c) { return a + a.tape->constant(c); }
inline Var operator+(double c, Var a) { return a.tape->constant(c) + a; }
inline Var operator-(Var a, double c) { return a - a.tape->constant(c); }
inline Var operator-(double c, Var a) { return a.tape->constant(c) - a; }
inline Var operator*(Var a, double c) { return a * a.tape->constant(c); }
inline Var operator*(double c, Var a) { return a.tape->constant(c) * a; }
inline Var operator/(Var a, double c) { return a / a.tape->constant(c); }
inline Var operator/(double c, Var a) { return a.tape->constant(c) / a; }

inline Var tanh(Var a) { return a.tape->tanh_(a); }
inline Var sin(Var a) { return a.tape->sin_(a); }
inline Var cos(Var a) { return a.tape->cos_(a); }
inline Var exp(Var a) { return a.tape->exp_(a); }
inline Var square(Var a) { return a.tape->square_(a); }
inline Var sqrt(Var a) { return a.tape->sqrt_(a); }

}  // namespace gapinn
