// Test-set evaluation: NRMSE and discrepancy grids for heat-map export.
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gapinn/common.hpp"
#include "gapinn/losses.hpp"
#include "gapinn/network.hpp"
#include "gapinn/pde.hpp"
#include "gapinn/reference.hpp"
#include "gapinn/sampling.hpp"

namespace gapinn {

struct TestSet {
  PointSet points;
  Matrix exact;  // n x output_dim
};

// Analytic problems: n LHS points with exact values. Reference problems: the
// dataset's native rows, no interpolation.
inline TestSet make_test_set(const PdeProblem& p, int n, std::uint64_t seed,
                             const Dataset* reference = nullptr) {
  TestSet ts;
  if (p.has_analytic) {
    ts.points = latin_hypercube(n, p.domain, seed);
    ts.points.tag = RegionTag::test;
    ts.exact.resize(ts.points.size(), p.output_dim);
    for (int i = 0; i < ts.points.size(); ++i) {
      auto u = p.analytic_fn(ts.points.point(i));
      for (int k = 0; k < p.output_dim; ++k) ts.exact.at(i, k) = u[std::size_t(k)];
    }
    return ts;
  }
  if (!reference) {
    throw std::invalid_argument("problem '" + p.name +
                                "' needs a reference dataset for its test set");
  }
  ts.points.dim = reference->coord_dim;
  ts.points.tag = RegionTag::test;
  ts.points.coords = reference->coords;
  ts.exact.resize(reference->size(), reference->value_dim);
  for (int i = 0; i < reference->size(); ++i) {
    auto v = reference->value(i);
    for (int k = 0; k < reference->value_dim; ++k) ts.exact.at(i, k) = v[std::size_t(k)];
  }
  return ts;
}

namespace detail {

inline double nrmse_from(const Matrix& pred, const Matrix& exact) {
  KahanSum num, den;
  for (int i = 0; i < exact.rows; ++i) {
    for (int k = 0; k < exact.cols; ++k) {
      double d = pred.at(i, k) - exact.at(i, k);
      num.add(d * d);
      den.add(exact.at(i, k) * exact.at(i, k));
    }
  }
  if (den.value() <= 0.0) {
    throw std::domain_error("nrmse undefined: test-set solutions have zero norm");
  }
  return std::sqrt(num.value() / den.value());
}

}  // namespace detail

inline double nrmse(const FieldView& f, const TestSet& ts) {
  if (ts.points.size() == 0) throw std::invalid_argument("nrmse: empty test set");
  Matrix pred(ts.points.size(), ts.exact.cols);
  for (int i = 0; i < ts.points.size(); ++i) {
    auto u = f.value(ts.points.point(i));
    for (int k = 0; k < ts.exact.cols; ++k) pred.at(i, k) = u[std::size_t(k)];
  }
  return detail::nrmse_from(pred, ts.exact);
}

// Batched fast path for trained networks.
inline double nrmse(const MlpSpec& spec, const ParamVector& params, const TestSet& ts) {
  if (ts.points.size() == 0) throw std::invalid_argument("nrmse: empty test set");
  const int chunk = 1024;
  MlpBatch batch;
  batch.configure(spec, 0, std::min(chunk, ts.points.size()));
  Matrix pred(ts.points.size(), spec.output_dim);
  for (int begin = 0; begin < ts.points.size(); begin += chunk) {
    int rows = std::min(chunk, ts.points.size() - begin);
    batch.forward(params, ts.points.coords.data() + std::size_t(begin) * spec.input_dim, rows,
                  {});
    for (int r = 0; r < rows; ++r) {
      for (int k = 0; k < spec.output_dim; ++k) {
        pred.at(begin + r, k) = batch.out_val().at(r, k);
      }
    }
  }
  return detail::nrmse_from(pred, ts.exact);
}

// Which two coordinates vary in a heat-map export and where the rest sit.
struct SliceSpec {
  int axis_x = 0;
  int axis_y = 1;
  std::vector<double> fixed;  // per-coordinate values; entries on the axes ignored

  static SliceSpec centered(const PdeProblem& p, int ax = 0, int ay = 1) {
    SliceSpec s;
    s.axis_x = ax;
    s.axis_y = ay;
    for (auto [lo, hi] : p.domain) s.fixed.push_back(0.5 * (lo + hi));
    return s;
  }
};

struct ErrorGrid {
  int axis_x = 0, axis_y = 1;
  std::vector<double> xs, ys;  // axis coordinates (resolution entries each)
  Matrix err;                  // ys.size() rows x xs.size() cols, |u_hat - u|
  std::vector<double> slice;   // fixed coordinate values
};

// Pointwise |u_hat - u| over an inclusive res x res grid on two axes, the
// remaining coordinates pinned by the slice. Needs an exact solution.
inline ErrorGrid error_grid(const FieldView& f, const PdeProblem& p, int res,
                            const SliceSpec& slice) {
  if (!p.has_analytic) {
    throw std::invalid_argument("error_grid over a free grid needs an analytic solution; "
                                "use the native-grid export for dataset-backed problems");
  }
  if (res < 2) throw std::invalid_argument("error_grid: resolution must be >= 2");
  if (slice.axis_x == slice.axis_y || slice.axis_x < 0 || slice.axis_y < 0 ||
      slice.axis_x >= p.input_dim || slice.axis_y >= p.input_dim) {
    throw std::invalid_argument("error_grid: bad axis selection");
  }
  if (int(slice.fixed.size()) != p.input_dim) {
    throw std::invalid_argument("error_grid: slice must fix every coordinate");
  }
  for (int c = 0; c < p.input_dim; ++c) {
    if (c == slice.axis_x || c == slice.axis_y) continue;
    auto [lo, hi] = p.domain[std::size_t(c)];
    if (slice.fixed[std::size_t(c)] < lo || slice.fixed[std::size_t(c)] > hi) {
      throw std::invalid_argument("error_grid: slice coordinate " + std::to_string(c) +
                                  " lies outside the domain");
    }
  }

  ErrorGrid g;
  g.axis_x = slice.axis_x;
  g.axis_y = slice.axis_y;
  g.slice = slice.fixed;
  auto [xlo, xhi] = p.domain[std::size_t(slice.axis_x)];
  auto [ylo, yhi] = p.domain[std::size_t(slice.axis_y)];
  for (int i = 0; i < res; ++i) {
    g.xs.push_back(xlo + (xhi - xlo) * double(i) / (res - 1));
    g.ys.push_back(ylo + (yhi - ylo) * double(i) / (res - 1));
  }
  g.err.resize(res, res);
  std::vector<double> x(slice.fixed.begin(), slice.fixed.end());
  for (int iy = 0; iy < res; ++iy) {
    for (int ix = 0; ix < res; ++ix) {
      x[std::size_t(slice.axis_x)] = g.xs[std::size_t(ix)];
      x[std::size_t(slice.axis_y)] = g.ys[std::size_t(iy)];
      auto pred = f.value(x);
      auto exact = p.analytic_fn(x);
      double d2 = 0.0;
      for (std::size_t k = 0; k < pred.size(); ++k) {
        double d = pred[k] - exact[k];
        d2 += d * d;
      }
      g.err.at(iy, ix) = std::sqrt(d2);
    }
  }
  return g;
}

// Per-row |u_hat - u| on a reference dataset's native points; columns are the
// dataset coordinates plus the discrepancy.
inline Dataset native_error_table(const FieldView& f, const Dataset& ref) {
  Dataset out;
  out.coord_dim = ref.coord_dim;
  out.value_dim = 1;
  out.coords = ref.coords;
  out.values.reserve(std::size_t(ref.size()));
  for (int i = 0; i < ref.size(); ++i) {
    auto pred = f.value(ref.point(i));
    auto exact = ref.value(i);
    double d2 = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
      double d = pred[k] - exact[k];
      d2 += d * d;
    }
    out.values.push_back(std::sqrt(d2));
  }
  return out;
}

}  // namespace gapinn
