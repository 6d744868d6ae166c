// Deterministic point generation: Latin hypercube interiors, boundary-face
// sampling and small labeled sets drawn from exact solutions.
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gapinn/pde.hpp"
#include "gapinn/reference.hpp"
#include "gapinn/rng.hpp"

namespace gapinn {

enum class RegionTag { interior, boundary, labeled, test };

struct PointSet {
  int dim = 0;
  RegionTag tag = RegionTag::interior;
  int term = -1;  // boundary term index when tag == boundary
  std::vector<double> coords;  // n x dim, row-major

  int size() const { return dim == 0 ? 0 : int(coords.size()) / dim; }

  std::span<const double> point(int i) const {
    return {coords.data() + std::size_t(i) * dim, std::size_t(dim)};
  }
  std::span<double> point(int i) {
    return {coords.data() + std::size_t(i) * dim, std::size_t(dim)};
  }
};

using Box = std::vector<std::pair<double, double>>;

// Latin hypercube: per coordinate, exactly one sample in each of the n equal
// strata, stratum order an independent random permutation.
inline PointSet latin_hypercube(int n, std::span<const std::pair<double, double>> box,
                                std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("latin_hypercube: n must be >= 1");
  const int dim = int(box.size());
  PointSet ps;
  ps.dim = dim;
  ps.coords.assign(std::size_t(n) * dim, 0.0);
  Rng rng(seed);
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int c = 0; c < dim; ++c) {
    for (int i = 0; i < n; ++i) perm[std::size_t(i)] = i;
    rng.shuffle(perm);
    const auto [lo, hi] = box[std::size_t(c)];
    for (int i = 0; i < n; ++i) {
      double stratum = (double(perm[std::size_t(i)]) + rng.uniform01()) / double(n);
      ps.coords[std::size_t(i) * dim + c] = lo + (hi - lo) * stratum;
    }
  }
  return ps;
}

namespace detail {

// m points on one face: the fixed coordinate pinned, the rest Latin
// hypercube over the remaining box.
inline void fill_face(PointSet& ps, int offset_rows, int m, const Box& domain, int coord,
                      double face, std::uint64_t seed) {
  const int dim = int(domain.size());
  Box free_box;
  for (int c = 0; c < dim; ++c) {
    if (c != coord) free_box.push_back(domain[std::size_t(c)]);
  }
  PointSet free_pts = latin_hypercube(m, free_box, seed);
  for (int i = 0; i < m; ++i) {
    auto dst = ps.point(offset_rows + i);
    int fc = 0;
    for (int c = 0; c < dim; ++c) {
      dst[std::size_t(c)] = (c == coord) ? face : free_pts.point(i)[std::size_t(fc++)];
    }
  }
}

}  // namespace detail

// m points on boundary term i. Paired faces split ceil(m/2)/floor(m/2);
// periodic terms return low-face points (the partner is implied).
inline PointSet sample_boundary(const PdeProblem& p, int term, int m, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("sample_boundary: m must be >= 1");
  if (term < 0 || term >= int(p.boundary.size())) {
    throw std::invalid_argument("sample_boundary: boundary term index out of range");
  }
  const BoundaryTerm& bt = p.boundary[std::size_t(term)];
  PointSet ps;
  ps.dim = p.input_dim;
  ps.tag = RegionTag::boundary;
  ps.term = term;
  ps.coords.assign(std::size_t(m) * p.input_dim, 0.0);
  if (bt.kind != BoundaryKind::dirichlet || bt.faces.size() == 1) {
    double face = bt.kind == BoundaryKind::dirichlet ? bt.faces[0] : bt.faces[0];
    detail::fill_face(ps, 0, m, p.domain, bt.coord, face, mix_seed(seed, 0));
    return ps;
  }
  const int m0 = (m + 1) / 2;
  const int m1 = m - m0;
  detail::fill_face(ps, 0, m0, p.domain, bt.coord, bt.faces[0], mix_seed(seed, 0));
  if (m1 > 0) {
    detail::fill_face(ps, m0, m1, p.domain, bt.coord, bt.faces[1], mix_seed(seed, 1));
  }
  return ps;
}

struct LabeledSet {
  PointSet points;
  Matrix values;  // n x output_dim
};

// J interior points with exact solutions attached from the analytic formula.
inline LabeledSet draw_labeled_analytic(const PdeProblem& p, int count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("draw_labeled: count must be >= 1");
  if (!p.has_analytic) {
    throw UnsupportedError("problem '" + p.name + "' needs a reference dataset for labels");
  }
  LabeledSet ls;
  ls.points = latin_hypercube(count, p.domain, seed);
  ls.points.tag = RegionTag::labeled;
  ls.values.resize(count, p.output_dim);
  for (int i = 0; i < count; ++i) {
    auto u = p.analytic_fn(ls.points.point(i));
    for (int k = 0; k < p.output_dim; ++k) ls.values.at(i, k) = u[std::size_t(k)];
  }
  return ls;
}

// J labeled samples drawn without replacement from a reference dataset.
inline LabeledSet draw_labeled_dataset(const Dataset& ds, int count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("draw_labeled: count must be >= 1");
  if (count > ds.size()) {
    throw std::invalid_argument("draw_labeled: requested " + std::to_string(count) +
                                " labeled samples but the reference set has only " +
                                std::to_string(ds.size()) + " rows");
  }
  Rng rng(seed);
  std::vector<int> idx = rng.sample_without_replacement(ds.size(), count);
  LabeledSet ls;
  ls.points.dim = ds.coord_dim;
  ls.points.tag = RegionTag::labeled;
  ls.values.resize(count, ds.value_dim);
  for (int i = 0; i < count; ++i) {
    auto x = ds.point(idx[std::size_t(i)]);
    ls.points.coords.insert(ls.points.coords.end(), x.begin(), x.end());
    auto v = ds.value(idx[std::size_t(i)]);
    for (int k = 0; k < ds.value_dim; ++k) ls.values.at(i, k) = v[std::size_t(k)];
  }
  return ls;
}

}  // namespace gapinn
