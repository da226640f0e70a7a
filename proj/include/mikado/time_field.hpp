//==============================================================================
// time_field.hpp
// Time-dependent fields on [0,1]: closed-form evaluators with optional
// memoization, C_t norms over sampled times, and space-time mollification
// with a one-sided (backward-looking) time kernel.
//
// The mollifier is a product kernel eta(x, t) = eta1_eps(x) * eta2_eps(t):
//   * eta1: radial smooth bump of radius eps in space, applied as a discrete
//     circular convolution (grid-sampled kernel, normalized to unit mass, DFT
//     product) — a legitimate discrete mollifier in its own right.
//   * eta2: smooth bump supported in (0,1), scaled to (0,eps); the convolution
//     F_eps(t) = sum_s w(s) F(t - s) only looks into the past (adaptedness).
//     Inputs are extended constantly outside [0, tau].
//   * d/dt of the mollification uses the analytically differentiated time
//     kernel, never finite differences.
//==============================================================================
#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "grid.hpp"

namespace mikado {

//------------------------------------------------------------------------------
// Uniform time grid on [0,1] with n_t points (dt = 1/(n_t - 1)).
//------------------------------------------------------------------------------
inline std::vector<double> time_grid(int n_t) {
  std::vector<double> t(static_cast<size_t>(n_t));
  for (int i = 0; i < n_t; ++i) t[i] = static_cast<double>(i) / (n_t - 1);
  return t;
}

// A thinned subset of the time grid (always includes both endpoints), used for
// C_t norm sampling where evaluating every grid time would be wasteful.
inline std::vector<double> sampled_times(int n_t, int max_samples) {
  std::vector<double> out;
  int stride = std::max(1, (n_t - 1) / std::max(1, max_samples - 1));
  for (int i = 0; i < n_t; i += stride) out.push_back(static_cast<double>(i) / (n_t - 1));
  if (out.back() != 1.0) out.push_back(1.0);
  return out;
}

//------------------------------------------------------------------------------
// TimeField<F>: F is ScalarField or VectorField.  Wraps an evaluator t -> F
// with an optional bounded memo cache (fields are immutable; the cache is the
// only mutable state and is mutex-guarded).
//------------------------------------------------------------------------------
template <class F>
class TimeField {
 public:
  TimeField() = default;
  TimeField(GridSpec g, std::function<F(double)> eval, bool memoize = true)
      : grid(g), eval_(std::move(eval)) {
    if (memoize) cache_ = std::make_shared<Cache>();
  }

  GridSpec grid;

  F operator()(double t) const {
    if (!cache_) return eval_(t);
    {
      std::lock_guard<std::mutex> lock(cache_->mu);
      auto it = cache_->map.find(t);
      if (it != cache_->map.end()) return it->second;
    }
    F v = eval_(t);
    {
      std::lock_guard<std::mutex> lock(cache_->mu);
      if (cache_->map.size() >= kMaxEntries) cache_->map.clear();
      cache_->map.emplace(t, v);
    }
    return v;
  }

  bool valid() const { return static_cast<bool>(eval_); }

 private:
  static constexpr std::size_t kMaxEntries = 96;
  struct Cache {
    std::mutex mu;
    std::map<double, F> map;
  };
  std::function<F(double)> eval_;
  std::shared_ptr<Cache> cache_;
};

using TimeScalarField = TimeField<ScalarField>;
using TimeVectorField = TimeField<VectorField>;

template <class F>
TimeField<F> constant_in_time(const GridSpec& g, const F& f) {
  return TimeField<F>(g, [f](double) { return f; }, /*memoize=*/false);
}

// C([0,t_max]; L^r) norm over the given sample times.
template <class F>
double ct_norm(const TimeField<F>& f, const std::vector<double>& times, double r,
               double t_max = 1.0) {
  double m = 0.0;
  for (double t : times) {
    if (t > t_max + 1e-12) break;
    m = std::max(m, lebesgue_norm(f(t), r));
  }
  return m;
}

//------------------------------------------------------------------------------
// Mollification kernels.
//------------------------------------------------------------------------------
namespace detail {

// Normalized smooth bump on (0,1): exp(-1/(t(1-t))), zero outside.
inline double time_bump_raw(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  return std::exp(-1.0 / (t * (1.0 - t)));
}
inline double time_bump_raw_deriv(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  const double d = t * (1.0 - t);
  return time_bump_raw(t) * (1.0 - 2.0 * t) / (d * d);
}

}  // namespace detail

// Discrete one-sided time-mollification weights at lag samples s_i = i*dt in
// (0, eps); weights sum to 1.  deriv = true gives the differentiated-kernel
// weights (sum to 0, first moment -1 enforced against the exact lags) for d/dt.
struct TimeKernel {
  double eps = 0.0;
  std::vector<double> lags;     // s_i > 0 (backward looking)
  std::vector<double> weights;  // unit mass
  std::vector<double> dweights; // differentiated kernel

  TimeKernel() = default;
  TimeKernel(double eps_, double dt) : eps(eps_) {
    if (eps <= 2.0 * dt)
      throw std::runtime_error("TimeKernel: eps below time-grid resolution");
    // Midpoint sampling of the scaled kernel on (0, eps).
    int m = std::max(4, static_cast<int>(std::ceil(eps / dt)));
    lags.resize(static_cast<size_t>(m));
    weights.resize(static_cast<size_t>(m));
    dweights.resize(static_cast<size_t>(m));
    double wsum = 0.0;
    for (int i = 0; i < m; ++i) {
      double u = (i + 0.5) / m;  // in (0,1)
      lags[i] = u * eps;
      weights[i] = detail::time_bump_raw(u);
      dweights[i] = detail::time_bump_raw_deriv(u);
      wsum += weights[i];
    }
    for (auto& w : weights) w /= wsum;
    // Differentiated kernel: d/dt [f * k](t) = sum f(t - s) k'(s)/eps (up to
    // the same normalization); enforce the two exact discrete moment
    // conditions  sum dw = 0  and  sum dw * s = -1  (constants -> 0, linear
    // functions -> their slope).
    double dsum = 0.0, dmom = 0.0;
    for (int i = 0; i < m; ++i) dsum += dweights[i];
    for (auto& w : dweights) w -= dsum / m;
    for (int i = 0; i < m; ++i) dmom += dweights[i] * lags[i];
    if (std::abs(dmom) < 1e-300)
      throw std::runtime_error("TimeKernel: degenerate derivative weights");
    for (auto& w : dweights) w *= -1.0 / dmom;
  }
};

// Spatial mollifier: multiply the spectrum by the DFT of a grid-sampled radial
// bump of radius eps (unit discrete mass).  Returns the multiplier spectrum.
inline std::vector<cplx> space_mollifier_spectrum(const GridSpec& g, double eps) {
  if (eps < 2.0 * g.h())
    throw std::runtime_error("space mollifier: eps below grid resolution");
  ScalarField ker = ScalarField::sample(g, [&](const std::vector<double>& x) {
    double q = 0.0;
    for (int a = 0; a < g.d; ++a) {
      double dx = x[a] < 0.5 ? x[a] : x[a] - 1.0;
      q += dx * dx;
    }
    q /= eps * eps;
    return q < 1.0 ? std::exp(-4.0 * q / (1.0 - q)) : 0.0;
  });
  double mass = ker.mean();
  std::vector<cplx> sp = ker.spectral();
  for (auto& z : sp) z /= mass;  // unit mean -> multiplier(0) = 1
  return sp;
}

inline ScalarField apply_spectrum_multiplier(const ScalarField& f,
                                             const std::vector<cplx>& mult) {
  std::vector<cplx> sp = f.spectral();
  for (std::size_t i = 0; i < sp.size(); ++i) sp[i] *= mult[i];
  return ScalarField::from_spectral(f.grid, std::move(sp));
}

//------------------------------------------------------------------------------
// mollify_space_time: returns the mollified field; with deriv=true returns its
// exact-kernel time derivative instead.  tau caps the constant extension.
//------------------------------------------------------------------------------
template <class F>
F mollify_eval(const TimeField<F>& f, const TimeKernel& tk,
               const std::vector<cplx>& space_mult, double t, double tau,
               bool deriv) {
  auto clamp_t = [tau](double s) { return std::min(std::max(s, 0.0), tau); };
  const auto& w = deriv ? tk.dweights : tk.weights;
  F acc;
  bool first = true;
  for (std::size_t i = 0; i < tk.lags.size(); ++i) {
    F v = f(clamp_t(t - tk.lags[i]));
    if (first) {
      acc = v * w[i];
      first = false;
    } else {
      acc += v * w[i];
    }
  }
  if constexpr (std::is_same_v<F, ScalarField>) {
    return apply_spectrum_multiplier(acc, space_mult);
  } else {
    F out(acc.grid);
    for (int i = 0; i < acc.grid.d; ++i)
      out[i] = apply_spectrum_multiplier(acc[i], space_mult);
    return out;
  }
}

template <class F>
TimeField<F> mollify_space_time(const TimeField<F>& f, double eps, double tau = 1.0,
                                bool deriv = false) {
  GridSpec g = f.grid;
  auto tk = std::make_shared<TimeKernel>(eps, g.dt());
  auto mult = std::make_shared<std::vector<cplx>>(space_mollifier_spectrum(g, eps));
  return TimeField<F>(g, [f, tk, mult, tau, deriv](double t) {
    return mollify_eval(f, *tk, *mult, t, tau, deriv);
  });
}

}  // namespace mikado
