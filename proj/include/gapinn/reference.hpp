// Reference solution datasets: whitespace text files (coordinates then value
// columns, '#' comments), plus in-repo fallback generators for the two
// problems whose published test data normally come from external files. The
// fallbacks are desk-scale oracles: a Cole-Hopf quadrature for the viscous
// Burgers problem and a split-step Fourier integrator for the cubic
// Schrodinger problem.
#pragma once

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "gapinn/common.hpp"

namespace gapinn {

struct Dataset {
  int coord_dim = 0;
  int value_dim = 0;
  std::vector<double> coords;  // n x coord_dim, row-major
  std::vector<double> values;  // n x value_dim

  int size() const { return coord_dim == 0 ? 0 : int(coords.size()) / coord_dim; }

  std::span<const double> point(int i) const {
    return {coords.data() + std::size_t(i) * coord_dim, std::size_t(coord_dim)};
  }
  std::span<const double> value(int i) const {
    return {values.data() + std::size_t(i) * value_dim, std::size_t(value_dim)};
  }
};

inline Dataset load_dataset(const std::filesystem::path& path, int coord_dim, int value_dim) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open dataset file: " + path.string());
  Dataset ds;
  ds.coord_dim = coord_dim;
  ds.value_dim = value_dim;
  std::string line;
  std::size_t lineno = 0;
  const int want = coord_dim + value_dim;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::vector<double> cols;
    std::string tok;
    while (ss >> tok) {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        throw ParseError("row " + std::to_string(lineno) + ": not a number: '" + tok + "'",
                         lineno);
      }
      if (used != tok.size()) {
        throw ParseError("row " + std::to_string(lineno) + ": not a number: '" + tok + "'",
                         lineno);
      }
      cols.push_back(v);
    }
    if (cols.empty()) continue;  // blank or comment-only line
    if (int(cols.size()) != want) {
      throw ParseError("row " + std::to_string(lineno) + ": expected " + std::to_string(want) +
                           " columns, got " + std::to_string(cols.size()),
                       lineno);
    }
    ds.coords.insert(ds.coords.end(), cols.begin(), cols.begin() + coord_dim);
    ds.values.insert(ds.values.end(), cols.begin() + coord_dim, cols.end());
  }
  return ds;
}

inline void save_dataset(const std::filesystem::path& path, const Dataset& ds,
                         const std::string& comment = {}) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open dataset file for writing: " + path.string());
  if (!comment.empty()) os << "# " << comment << "\n";
  os.precision(17);
  for (int i = 0; i < ds.size(); ++i) {
    for (double c : ds.point(i)) os << c << ' ';
    auto v = ds.value(i);
    for (std::size_t k = 0; k < v.size(); ++k) os << v[k] << (k + 1 < v.size() ? ' ' : '\n');
  }
}

// --- Burgers: u_t + u u_x = nu u_xx, u(0,x) = -sin(pi x), nu = 0.01/pi -------
//
// Closed form through the Cole-Hopf transform:
//   u(x,t) = -I1/I0 with In integrals of sin(pi(x-eta)) against the heat
// kernel and the transformed initial data. After substituting
// eta = sqrt(4 nu t) z both integrands decay like exp(-z^2), so a wide
// trapezoid rule converges spectrally.
inline double burgers_cole_hopf(double t, double x, int quad_nodes = 401) {
  constexpr double pi = std::numbers::pi_v<double>;
  const double nu = 0.01 / pi;
  if (t <= 0.0) return -std::sin(pi * x);
  const double s = std::sqrt(4.0 * nu * t);
  const double zmax = 10.0;
  const double hstep = 2.0 * zmax / (quad_nodes - 1);
  const double c = 1.0 / (2.0 * pi * nu);
  KahanSum num, den;
  for (int i = 0; i < quad_nodes; ++i) {
    double z = -zmax + hstep * i;
    double y = x - s * z;
    double w = std::exp(-z * z - c * std::cos(pi * y));
    if (i == 0 || i == quad_nodes - 1) w *= 0.5;
    num.add(std::sin(pi * y) * w);
    den.add(w);
  }
  return -num.value() / den.value();
}

// Grid dataset ordered t-major, columns (t, x, u).
inline Dataset burgers_reference(int nx = 256, int nt = 100, int quad_nodes = 401) {
  Dataset ds;
  ds.coord_dim = 2;
  ds.value_dim = 1;
  ds.coords.reserve(std::size_t(nx) * nt * 2);
  ds.values.reserve(std::size_t(nx) * nt);
  for (int j = 0; j < nt; ++j) {
    double t = double(j) / (nt - 1);
    for (int i = 0; i < nx; ++i) {
      double x = -1.0 + 2.0 * double(i) / (nx - 1);
      ds.coords.push_back(t);
      ds.coords.push_back(x);
      ds.values.push_back(burgers_cole_hopf(t, x, quad_nodes));
    }
  }
  return ds;
}

namespace detail {

// Iterative radix-2 FFT, in place. n must be a power of two.
inline void fft_pow2(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  constexpr double pi = std::numbers::pi_v<double>;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = 2.0 * pi / double(len) * (inverse ? 1.0 : -1.0);
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse) {
    for (auto& v : a) v /= double(n);
  }
}

}  // namespace detail

// --- Schrodinger: i h_t + 0.5 h_xx + |h|^2 h = 0, h(0,x) = 2 sech(x) ---------
//
// Periodic on [-5, 5), Strang-split spectral stepping. Columns (t, x, u, v)
// with h = u + i v; rows t-major over the nx-point periodic grid.
inline Dataset schrodinger_reference(int nx = 256, int nt = 100, int steps_per_snap = 24) {
  constexpr double pi = std::numbers::pi_v<double>;
  if ((nx & (nx - 1)) != 0) throw std::invalid_argument("schrodinger_reference: nx must be a power of two");
  const double L = 10.0;
  const double T = pi / 2.0;
  const int total_steps = (nt - 1) * steps_per_snap;
  const double dt = T / total_steps;

  std::vector<std::complex<double>> h(static_cast<std::size_t>(nx));
  std::vector<double> xs(static_cast<std::size_t>(nx)), k2(static_cast<std::size_t>(nx));
  for (int i = 0; i < nx; ++i) {
    xs[std::size_t(i)] = -5.0 + L * double(i) / nx;
    h[std::size_t(i)] = 2.0 / std::cosh(xs[std::size_t(i)]);
    int m = i <= nx / 2 ? i : i - nx;
    double k = 2.0 * pi * double(m) / L;
    k2[std::size_t(i)] = k * k;
  }

  Dataset ds;
  ds.coord_dim = 2;
  ds.value_dim = 2;
  auto snapshot = [&](double t) {
    for (int i = 0; i < nx; ++i) {
      ds.coords.push_back(t);
      ds.coords.push_back(xs[std::size_t(i)]);
      ds.values.push_back(h[std::size_t(i)].real());
      ds.values.push_back(h[std::size_t(i)].imag());
    }
  };

  snapshot(0.0);
  auto nonlinear = [&](double tau) {
    for (auto& v : h) {
      double m2 = std::norm(v);
      v *= std::complex<double>(std::cos(m2 * tau), std::sin(m2 * tau));
    }
  };
  for (int snap = 1; snap < nt; ++snap) {
    for (int s = 0; s < steps_per_snap; ++s) {
      nonlinear(0.5 * dt);
      detail::fft_pow2(h, false);
      for (int i = 0; i < nx; ++i) {
        double phase = -0.5 * k2[std::size_t(i)] * dt;
        h[std::size_t(i)] *= std::complex<double>(std::cos(phase), std::sin(phase));
      }
      detail::fft_pow2(h, true);
      nonlinear(0.5 * dt);
    }
    snapshot(T * double(snap) / (nt - 1));
  }
  return ds;
}

}  // namespace gapinn
