//==============================================================================
// grid.hpp
// Periodic scalar/vector fields on the d-torus with uniform n-per-axis grids.
//   * values: flattened row-major samples; spectral: lazily cached DFT.
//   * Norms: L^r by uniform-grid quadrature (exact for resolved trigonometric
//     interpolants on periodic domains), L^inf as the grid max, fractional
//     Sobolev norms through the multiplier (1 + 4 pi^2 |k|^2)^(theta/2).
//   * derivative / gradient / divergence / laplacian: spectral (2 pi i k).
//   * dilate(f, lambda): f(lambda x); for integer lambda the map sends grid
//     points to grid points, so it is realized by exact physical resampling
//     (this preserves compact supports exactly, which the disjointness
//     invariants of the building blocks rely on).
//   * translate(f, y): exact spectral phase shift, arbitrary real y.
//==============================================================================
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "fft.hpp"

namespace mikado {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

//------------------------------------------------------------------------------
// GridSpec: spatial dimension d, n points per axis, n_t time points on [0,1].
//------------------------------------------------------------------------------
struct GridSpec {
  int d = 2;
  int n = 64;
  int n_t = 64;

  GridSpec() = default;
  GridSpec(int d_, int n_, int n_t_ = 64) : d(d_), n(n_), n_t(n_t_) {
    if (d < 2) throw std::invalid_argument("GridSpec: d must be >= 2");
    if (n < 8 || (n & (n - 1)) != 0)
      throw std::invalid_argument("GridSpec: n must be a power of two >= 8");
    if (n_t < 8) throw std::invalid_argument("GridSpec: n_t must be >= 8");
  }

  std::size_t size() const {
    std::size_t s = 1;
    for (int i = 0; i < d; ++i) s *= static_cast<std::size_t>(n);
    return s;
  }
  double h() const { return 1.0 / n; }
  double dt() const { return 1.0 / (n_t - 1); }
  bool operator==(const GridSpec& o) const {
    return d == o.d && n == o.n && n_t == o.n_t;
  }
  bool operator!=(const GridSpec& o) const { return !(*this == o); }
};

inline void require_same_grid(const GridSpec& a, const GridSpec& b) {
  if (a != b) throw std::invalid_argument("grid mismatch between operands");
}

// Row-major index <-> multi-index helpers.
inline std::size_t flat_index(const GridSpec& g, const std::vector<int>& idx) {
  std::size_t f = 0;
  for (int a = 0; a < g.d; ++a) f = f * g.n + static_cast<std::size_t>(idx[a]);
  return f;
}

// Iterate multi-index in row-major order; returns false after the last one.
inline bool next_index(const GridSpec& g, std::vector<int>& idx) {
  for (int a = g.d - 1; a >= 0; --a) {
    if (++idx[a] < g.n) return true;
    idx[a] = 0;
  }
  return false;
}

//------------------------------------------------------------------------------
// ScalarField
//------------------------------------------------------------------------------
class ScalarField {
 public:
  GridSpec grid;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(const GridSpec& g, double fill = 0.0)
      : grid(g), values(g.size(), fill) {}

  // Build by sampling x -> f(x) at grid points (x components in [0,1)).
  static ScalarField sample(const GridSpec& g,
                            const std::function<double(const std::vector<double>&)>& f) {
    ScalarField out(g);
    std::vector<int> idx(static_cast<size_t>(g.d), 0);
    std::vector<double> x(static_cast<size_t>(g.d), 0.0);
    std::size_t flat = 0;
    do {
      for (int a = 0; a < g.d; ++a) x[a] = static_cast<double>(idx[a]) / g.n;
      out.values[flat++] = f(x);
    } while (next_index(g, idx));
    return out;
  }

  double mean() const {
    double s = std::accumulate(values.begin(), values.end(), 0.0);
    return s / static_cast<double>(values.size());
  }

  // Lazily computed, cached DFT (convention: coeff(0) = mean).
  const std::vector<cplx>& spectral() const {
    if (!spec_) {
      auto sp = std::make_shared<std::vector<cplx>>(values.size());
      for (std::size_t i = 0; i < values.size(); ++i) (*sp)[i] = values[i];
      fft_forward(grid.d, grid.n, *sp);
      spec_ = std::move(sp);
    }
    return *spec_;
  }

  static ScalarField from_spectral(const GridSpec& g, std::vector<cplx> coeffs) {
    ScalarField out(g);
    auto sp = std::make_shared<std::vector<cplx>>(coeffs);
    fft_inverse(g.d, g.n, coeffs);
    for (std::size_t i = 0; i < coeffs.size(); ++i) out.values[i] = coeffs[i].real();
    out.spec_ = std::move(sp);
    return out;
  }

  // Largest |k|_inf carrying relative spectral mass above tol.
  int bandwidth(double tol = 1e-12) const {
    const auto& sp = spectral();
    double mx = 0.0;
    for (const auto& z : sp) mx = std::max(mx, std::abs(z));
    if (mx == 0.0) return 0;
    int bw = 0;
    std::vector<int> idx(static_cast<size_t>(grid.d), 0);
    std::size_t flat = 0;
    do {
      if (std::abs(sp[flat]) > tol * mx) {
        int m = 0;
        for (int a = 0; a < grid.d; ++a)
          m = std::max(m, std::abs(signed_freq(idx[a], grid.n)));
        bw = std::max(bw, m);
      }
      ++flat;
    } while (next_index(grid, idx));
    return bw;
  }

  // Max relative deviation between values and the inverse of the cached DFT.
  double spectral_roundtrip_error() const {
    std::vector<cplx> c = spectral();
    fft_inverse(grid.d, grid.n, c);
    double mx = 1e-300, err = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      mx = std::max(mx, std::abs(values[i]));
      err = std::max(err, std::abs(c[i].real() - values[i]));
    }
    return err / std::max(mx, 1.0);
  }

  ScalarField& operator+=(const ScalarField& o) {
    require_same_grid(grid, o.grid);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += o.values[i];
    spec_.reset();
    return *this;
  }
  ScalarField& operator-=(const ScalarField& o) {
    require_same_grid(grid, o.grid);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] -= o.values[i];
    spec_.reset();
    return *this;
  }
  ScalarField& operator*=(double c) {
    for (auto& v : values) v *= c;
    spec_.reset();
    return *this;
  }
  ScalarField& operator+=(double c) {
    for (auto& v : values) v += c;
    spec_.reset();
    return *this;
  }

 private:
  mutable std::shared_ptr<std::vector<cplx>> spec_;
};

inline ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
inline ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
inline ScalarField operator*(ScalarField a, double c) { return a *= c; }
inline ScalarField operator*(double c, ScalarField a) { return a *= c; }

// Pointwise product of samples.
inline ScalarField pointwise(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a.grid, b.grid);
  ScalarField out(a.grid);
  for (std::size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = a.values[i] * b.values[i];
  return out;
}

//------------------------------------------------------------------------------
// VectorField: d scalar components on one grid.
//------------------------------------------------------------------------------
class VectorField {
 public:
  GridSpec grid;
  std::vector<ScalarField> comp;

  VectorField() = default;
  explicit VectorField(const GridSpec& g) : grid(g) {
    comp.assign(static_cast<size_t>(g.d), ScalarField(g));
  }
  ScalarField& operator[](int i) { return comp[static_cast<size_t>(i)]; }
  const ScalarField& operator[](int i) const { return comp[static_cast<size_t>(i)]; }

  VectorField& operator+=(const VectorField& o) {
    require_same_grid(grid, o.grid);
    for (int i = 0; i < grid.d; ++i) comp[i] += o.comp[i];
    return *this;
  }
  VectorField& operator-=(const VectorField& o) {
    require_same_grid(grid, o.grid);
    for (int i = 0; i < grid.d; ++i) comp[i] -= o.comp[i];
    return *this;
  }
  VectorField& operator*=(double c) {
    for (auto& f : comp) f *= c;
    return *this;
  }
};

inline VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
inline VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }
inline VectorField operator*(VectorField a, double c) { return a *= c; }
inline VectorField operator*(double c, VectorField a) { return a *= c; }

// Scalar * vector, componentwise.
inline VectorField pointwise(const ScalarField& s, const VectorField& v) {
  VectorField out(v.grid);
  for (int i = 0; i < v.grid.d; ++i) out[i] = pointwise(s, v[i]);
  return out;
}

// Pointwise dot product of two vector fields.
inline ScalarField dot(const VectorField& a, const VectorField& b) {
  require_same_grid(a.grid, b.grid);
  ScalarField out(a.grid);
  for (int i = 0; i < a.grid.d; ++i) {
    for (std::size_t k = 0; k < out.values.size(); ++k)
      out.values[k] += a[i].values[k] * b[i].values[k];
  }
  return out;
}

//------------------------------------------------------------------------------
// Norms
//------------------------------------------------------------------------------
constexpr double kInf = std::numeric_limits<double>::infinity();

inline double lebesgue_norm(const ScalarField& f, double r) {
  if (r < 1.0) throw std::invalid_argument("lebesgue_norm: r must be >= 1 or inf");
  if (std::isinf(r)) {
    double m = 0.0;
    for (double v : f.values) m = std::max(m, std::abs(v));
    return m;
  }
  double s = 0.0;
  for (double v : f.values) s += std::pow(std::abs(v), r);
  return std::pow(s / static_cast<double>(f.values.size()), 1.0 / r);
}

// Vector L^r: pointwise Euclidean magnitude, then scalar L^r quadrature.
inline double lebesgue_norm(const VectorField& f, double r) {
  if (r < 1.0) throw std::invalid_argument("lebesgue_norm: r must be >= 1 or inf");
  const std::size_t m = f.grid.size();
  double s = 0.0, mx = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    double q = 0.0;
    for (int i = 0; i < f.grid.d; ++i) q += f[i].values[k] * f[i].values[k];
    double mag = std::sqrt(q);
    if (std::isinf(r)) mx = std::max(mx, mag);
    else s += std::pow(mag, r);
  }
  if (std::isinf(r)) return mx;
  return std::pow(s / static_cast<double>(m), 1.0 / r);
}

// Relative Parseval defect: |sum |c_k|^2 - mean(f^2)| / mean(f^2).
inline double parseval_defect(const ScalarField& f) {
  const auto& sp = f.spectral();
  double se = 0.0;
  for (const auto& z : sp) se += std::norm(z);
  double sv = 0.0;
  for (double v : f.values) sv += v * v;
  sv /= static_cast<double>(f.values.size());
  if (sv == 0.0) return se;
  return std::abs(se - sv) / sv;
}

//------------------------------------------------------------------------------
// Spectral calculus
//------------------------------------------------------------------------------
namespace detail {

// Apply a multiplier m(k) (as a function of the signed frequency multi-index).
template <class M>
ScalarField apply_multiplier(const ScalarField& f, M&& m) {
  const GridSpec& g = f.grid;
  std::vector<cplx> sp = f.spectral();
  std::vector<int> idx(static_cast<size_t>(g.d), 0);
  std::vector<int> k(static_cast<size_t>(g.d), 0);
  std::size_t flat = 0;
  do {
    for (int a = 0; a < g.d; ++a) k[a] = signed_freq(idx[a], g.n);
    sp[flat] *= m(k);
    ++flat;
  } while (next_index(g, idx));
  return ScalarField::from_spectral(g, std::move(sp));
}

}  // namespace detail

// d/dx_axis (axis is 1-based).  The unmatched Nyquist mode is zeroed, the
// standard convention that keeps derivatives of real fields real.
inline ScalarField derivative(const ScalarField& f, int axis) {
  if (axis < 1 || axis > f.grid.d) throw std::invalid_argument("derivative: bad axis");
  const int n = f.grid.n;
  return detail::apply_multiplier(f, [axis, n](const std::vector<int>& k) -> cplx {
    int ka = k[static_cast<size_t>(axis - 1)];
    if (ka == -n / 2) return 0.0;
    return cplx(0.0, kTwoPi * ka);
  });
}

inline VectorField gradient(const ScalarField& f) {
  VectorField out(f.grid);
  for (int i = 0; i < f.grid.d; ++i) out[i] = derivative(f, i + 1);
  return out;
}

inline ScalarField divergence(const VectorField& v) {
  ScalarField out(v.grid);
  for (int i = 0; i < v.grid.d; ++i) out += derivative(v[i], i + 1);
  return out;
}

inline ScalarField laplacian(const ScalarField& f) {
  return detail::apply_multiplier(f, [](const std::vector<int>& k) -> cplx {
    double k2 = 0.0;
    for (int ka : k) k2 += static_cast<double>(ka) * ka;
    return -4.0 * kPi * kPi * k2;
  });
}

// L^r norm of the pointwise Frobenius magnitude of the k-th gradient tensor.
inline double grad_norm(const ScalarField& f, int order, double r) {
  if (order == 0) return lebesgue_norm(f, r);
  // Build all order-fold derivative combinations and accumulate squares.
  std::vector<ScalarField> cur{f};
  for (int o = 0; o < order; ++o) {
    std::vector<ScalarField> nxt;
    nxt.reserve(cur.size() * static_cast<size_t>(f.grid.d));
    for (const auto& g : cur)
      for (int a = 1; a <= f.grid.d; ++a) nxt.push_back(derivative(g, a));
    cur = std::move(nxt);
  }
  ScalarField mag(f.grid);
  for (const auto& g : cur)
    for (std::size_t i = 0; i < mag.values.size(); ++i)
      mag.values[i] += g.values[i] * g.values[i];
  for (auto& v : mag.values) v = std::sqrt(v);
  return lebesgue_norm(mag, r);
}

//------------------------------------------------------------------------------
// Fractional Sobolev norm W^{theta,r}: multiplier (1 + 4 pi^2 |k|^2)^{theta/2},
// inverted, then L^r; vector fields sum componentwise.
//------------------------------------------------------------------------------
inline double sobolev_norm(const ScalarField& f, double theta, double r) {
  if (!(r > 1.0) || std::isinf(r))
    throw std::invalid_argument("sobolev_norm: r must lie in (1, inf)");
  if (theta == 0.0) return lebesgue_norm(f, r);
  ScalarField g = detail::apply_multiplier(
      f, [theta](const std::vector<int>& k) -> cplx {
        double k2 = 0.0;
        for (int ka : k) k2 += static_cast<double>(ka) * ka;
        return std::pow(1.0 + 4.0 * kPi * kPi * k2, 0.5 * theta);
      });
  return lebesgue_norm(g, r);
}

inline double sobolev_norm(const VectorField& f, double theta, double r) {
  double s = 0.0;
  for (int i = 0; i < f.grid.d; ++i) s += sobolev_norm(f[i], theta, r);
  return s;
}

//------------------------------------------------------------------------------
// dilate(f, lambda): f(lambda x) by exact physical resampling (integer lambda
// maps grid points to grid points).  The anti-aliasing guard protects later
// spectral calculus: spectral operations on the dilation are only trustworthy
// when lambda * bandwidth(f) < n/2.
//------------------------------------------------------------------------------
inline ScalarField dilate(const ScalarField& f, int lambda, bool guard = true) {
  if (lambda < 1) throw std::invalid_argument("dilate: lambda must be >= 1");
  if (lambda == 1) return f;
  const GridSpec& g = f.grid;
  if (guard && static_cast<long>(lambda) * f.bandwidth() >= g.n / 2)
    throw std::runtime_error("dilate: anti-aliasing guard violated (lambda * bandwidth >= n/2)");
  ScalarField out(g);
  std::vector<int> idx(static_cast<size_t>(g.d), 0);
  std::vector<int> src(static_cast<size_t>(g.d), 0);
  std::size_t flat = 0;
  do {
    for (int a = 0; a < g.d; ++a)
      src[a] = static_cast<int>((static_cast<long>(lambda) * idx[a]) % g.n);
    out.values[flat++] = f.values[flat_index(g, src)];
  } while (next_index(g, idx));
  return out;
}

// translate(f, y): f(x - y) for arbitrary real y, via the exact spectral phase
// e^{-2 pi i k.y}.
inline ScalarField translate(const ScalarField& f, const std::vector<double>& y) {
  if (static_cast<int>(y.size()) != f.grid.d)
    throw std::invalid_argument("translate: shift dimension mismatch");
  return detail::apply_multiplier(f, [&y](const std::vector<int>& k) -> cplx {
    double ph = 0.0;
    for (std::size_t a = 0; a < y.size(); ++a) ph += k[a] * y[a];
    return std::polar(1.0, -kTwoPi * ph);
  });
}

inline VectorField translate(const VectorField& f, const std::vector<double>& y) {
  VectorField out(f.grid);
  for (int i = 0; i < f.grid.d; ++i) out[i] = translate(f[i], y);
  return out;
}

//------------------------------------------------------------------------------
// Random band-limited fields (for property tests): modes |k|_inf <= kmax with
// i.i.d. coefficients, conjugate-symmetrized so samples are real.
//------------------------------------------------------------------------------
inline ScalarField random_band_limited(const GridSpec& g, int kmax,
                                       std::uint64_t seed, bool mean_zero = false) {
  std::mt19937_64 rng(seed);
  auto unif = [&rng]() {
    return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
  };
  std::vector<cplx> sp(g.size(), cplx(0.0, 0.0));
  std::vector<int> idx(static_cast<size_t>(g.d), 0);
  std::size_t flat = 0;
  do {
    bool in_band = true;
    for (int a = 0; a < g.d && in_band; ++a) {
      int k = signed_freq(idx[a], g.n);
      if (std::abs(k) > kmax || k == -g.n / 2) in_band = false;
    }
    if (in_band) sp[flat] = cplx(unif(), unif());
    ++flat;
  } while (next_index(g, idx));
  if (mean_zero) sp[0] = 0.0;
  else sp[0] = cplx(sp[0].real(), 0.0);
  // Hermitian symmetrization: average with the conjugate at -k.
  std::fill(idx.begin(), idx.end(), 0);
  flat = 0;
  std::vector<int> conj_idx(static_cast<size_t>(g.d), 0);
  std::vector<cplx> sym(sp.size());
  do {
    for (int a = 0; a < g.d; ++a) conj_idx[a] = (g.n - idx[a]) % g.n;
    const cplx z = sp[flat];
    const cplx w = sp[flat_index(g, conj_idx)];
    sym[flat] = 0.5 * (z + std::conj(w));
    ++flat;
  } while (next_index(g, idx));
  return ScalarField::from_spectral(g, std::move(sym));
}

// Fits log(norm) = a + slope*log(x) by least squares; returns slope.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 3)
    throw std::invalid_argument("loglog_slope: need at least 3 sweep points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

//------------------------------------------------------------------------------
// Improved Hoelder inequality check:
//   ||f g_lambda||_{L^r} <= ||f||_{L^r} ||g||_{L^r}
//                           + C_r lambda^{-1/r} ||f||_{C^1} ||g||_{L^r}.
// The excess ||f g_lambda|| - ||f|| ||g|| decays like lambda^{-1/r}; C_r is
// fitted as the smallest constant closing the inequality over the sweep.
//------------------------------------------------------------------------------
struct HolderReport {
  std::vector<double> lambdas;  // swept dilation factors
  std::vector<double> lhs;      // ||f g_lambda||_{L^r}
  std::vector<double> product;  // ||f||_{L^r} ||g||_{L^r}
  std::vector<double> excess;   // lhs - product (may be negative)
  double c_fit = 0.0;           // max over sweep of excess lambda^{1/r} / (||f||_C1 ||g||_r)
  double slope = 0.0;           // log-log slope of positive excesses vs lambda
  bool pass = true;             // lhs <= product + c excess-term at every lambda
};

inline HolderReport improved_holder_check(const ScalarField& f, const ScalarField& g,
                                          const std::vector<int>& lambdas, double r,
                                          double c_given = -1.0) {
  if (lambdas.empty()) throw std::invalid_argument("improved_holder_check: empty sweep");
  HolderReport rep;
  const double nf = lebesgue_norm(f, r);
  const double ng = lebesgue_norm(g, r);
  const double fc1 = lebesgue_norm(f, kInf) + grad_norm(f, 1, kInf);
  std::vector<double> pos_l, pos_e;
  for (int lam : lambdas) {
    ScalarField gl = dilate(g, lam);
    ScalarField fg(f.grid);
    for (std::size_t i = 0; i < fg.values.size(); ++i)
      fg.values[i] = f.values[i] * gl.values[i];
    const double lhs = lebesgue_norm(fg, r);
    rep.lambdas.push_back(lam);
    rep.lhs.push_back(lhs);
    rep.product.push_back(nf * ng);
    const double ex = lhs - nf * ng;
    rep.excess.push_back(ex);
    if (ex > 0.0) {
      rep.c_fit = std::max(rep.c_fit, ex * std::pow(lam, 1.0 / r) / (fc1 * ng));
      pos_l.push_back(lam);
      pos_e.push_back(ex);
    }
  }
  const double c = (c_given >= 0.0) ? c_given : rep.c_fit;
  for (std::size_t i = 0; i < rep.lambdas.size(); ++i) {
    const double rhs = rep.product[i] +
                       c * std::pow(rep.lambdas[i], -1.0 / r) * fc1 * ng;
    if (rep.lhs[i] > rhs * (1.0 + 1e-12)) rep.pass = false;
  }
  if (pos_l.size() >= 3) rep.slope = loglog_slope(pos_l, pos_e);
  return rep;
}

//------------------------------------------------------------------------------
// Serialization: CSV (one row per grid point: indices then value) and a raw
// binary dump with a small text header.  Debug aids, not interchange formats.
//------------------------------------------------------------------------------
inline void write_csv(const ScalarField& f, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  out << "# d=" << f.grid.d << " n=" << f.grid.n << " n_t=" << f.grid.n_t << "\n";
  std::vector<int> idx(static_cast<size_t>(f.grid.d), 0);
  std::size_t flat = 0;
  out.precision(17);
  do {
    for (int a = 0; a < f.grid.d; ++a) out << idx[a] << ",";
    out << f.values[flat++] << "\n";
  } while (next_index(f.grid, idx));
}

inline void write_binary(const ScalarField& f, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_binary: cannot open " + path);
  std::string header = "mikado-field d=" + std::to_string(f.grid.d) +
                       " n=" + std::to_string(f.grid.n) + "\n";
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(f.values.data()),
            static_cast<std::streamsize>(f.values.size() * sizeof(double)));
}

}  // namespace mikado
