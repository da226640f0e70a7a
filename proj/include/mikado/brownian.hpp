//==============================================================================
// brownian.hpp
// Brownian path sampling on the time grid, Hölder-seminorm stopping times,
// one-sided path mollification, and composition of fields with the random
// translation maps  Psi(t,x) = (t, x + B(t))  and its mollified analogue.
//
// Reproducibility: increments use a fixed Box–Muller transform over the raw
// mt19937_64 stream (std::normal_distribution is implementation-defined and
// would break byte-identical reruns across standard libraries).
//==============================================================================
#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <stdexcept>
#include <vector>

#include "grid.hpp"
#include "time_field.hpp"

namespace mikado {

//------------------------------------------------------------------------------
// BrownianPath: d-dimensional trajectory on a uniform grid, B(0) = 0, with
// the convention B(t) = 0 for t < 0 (left extension).
//------------------------------------------------------------------------------
struct BrownianPath {
  std::uint64_t seed = 0;
  int d = 2;
  std::vector<double> times;              // n_t points on [0,1]
  std::vector<std::vector<double>> vals;  // vals[a][i], a < d

  // Linear interpolation between grid times; zero for t <= 0.
  std::vector<double> at(double t) const {
    std::vector<double> b(static_cast<size_t>(d), 0.0);
    if (t <= 0.0 || times.size() < 2) return b;
    const int n_t = static_cast<int>(times.size());
    const double dt = times[1] - times[0];
    double u = std::min(t, times.back()) / dt;
    int i = std::min(static_cast<int>(u), n_t - 2);
    double fr = u - i;
    for (int a = 0; a < d; ++a)
      b[a] = (1.0 - fr) * vals[a][i] + fr * vals[a][i + 1];
    return b;
  }
};

namespace detail {

// Deterministic standard normals from the raw engine stream.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : rng_(seed) {}
  double next() {
    if (have_) {
      have_ = false;
      return spare_;
    }
    double u1 = unit(), u2 = unit();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(kTwoPi * u2);
    have_ = true;
    return r * std::cos(kTwoPi * u2);
  }

 private:
  double unit() {
    // Uniform in (0,1]: avoid log(0).
    return (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;
  }
  std::mt19937_64 rng_;
  bool have_ = false;
  double spare_ = 0.0;
};

}  // namespace detail

inline BrownianPath sample_path(std::uint64_t seed, int n_t, int d) {
  if (n_t < 2) throw std::invalid_argument("sample_path: n_t must be >= 2");
  BrownianPath p;
  p.seed = seed;
  p.d = d;
  p.times = time_grid(n_t);
  p.vals.assign(static_cast<size_t>(d), std::vector<double>(static_cast<size_t>(n_t), 0.0));
  detail::NormalStream ns(seed);
  const double sdt = std::sqrt(p.times[1] - p.times[0]);
  for (int i = 1; i < n_t; ++i)
    for (int a = 0; a < d; ++a)
      p.vals[a][i] = p.vals[a][i - 1] + sdt * ns.next();
  return p;
}

// Discrete Hölder seminorm sup_{s<t<=t_max} |B(t)-B(s)| / (t-s)^theta.
inline double holder_seminorm(const BrownianPath& p, double theta, double t_max = 1.0) {
  if (theta <= 0.0 || theta >= 1.0)
    throw std::invalid_argument("holder_seminorm: exponent must be in (0,1)");
  if (t_max < 0.0 || t_max > 1.0)
    throw std::invalid_argument("holder_seminorm: t_max outside [0,1]");
  const int n_t = static_cast<int>(p.times.size());
  double m = 0.0;
  for (int i = 0; i < n_t; ++i) {
    if (p.times[i] > t_max + 1e-15) break;
    for (int j = 0; j < i; ++j) {
      double diff2 = 0.0;
      for (int a = 0; a < p.d; ++a) {
        double dv = p.vals[a][i] - p.vals[a][j];
        diff2 += dv * dv;
      }
      m = std::max(m, std::sqrt(diff2) / std::pow(p.times[i] - p.times[j], theta));
    }
  }
  return m;
}

struct StoppingData {
  double kappa = 0.0;
  double L = 0.0;
  double tau = 1.0;
};

// First grid time where the running C^{1/2-kappa} seminorm exceeds L, capped
// at 1.  Incremental: only pairs ending at the newest index are examined per
// step, so the scan is O(n_t^2) total and uses no lookahead.
inline StoppingData stopping_time(const BrownianPath& p, double L, double kappa) {
  StoppingData sd;
  sd.kappa = kappa;
  sd.L = L;
  const double theta = 0.5 - kappa;
  const int n_t = static_cast<int>(p.times.size());
  double running = 0.0;
  for (int i = 1; i < n_t; ++i) {
    for (int j = 0; j < i; ++j) {
      double diff2 = 0.0;
      for (int a = 0; a < p.d; ++a) {
        double dv = p.vals[a][i] - p.vals[a][j];
        diff2 += dv * dv;
      }
      running = std::max(running, std::sqrt(diff2) / std::pow(p.times[i] - p.times[j], theta));
    }
    if (running > L) {
      sd.tau = p.times[i];
      return sd;
    }
  }
  sd.tau = 1.0;
  return sd;
}

// Empirical quantile of [B]_{C^{1/2-kappa}([0,1])} at level prob over a fresh
// Monte Carlo batch (seeds derived from batch_seed, disjoint from experiment
// seeds by convention).
inline double calibrate_L(double prob, double kappa, int n_paths, int n_t, int d,
                          std::uint64_t batch_seed = 0x5eedca11) {
  if (prob < 0.0 || prob >= 1.0)
    throw std::invalid_argument("calibrate_L: prob must be in [0,1)");
  std::vector<double> norms;
  norms.reserve(static_cast<size_t>(n_paths));
  for (int i = 0; i < n_paths; ++i) {
    BrownianPath p = sample_path(batch_seed + static_cast<std::uint64_t>(i), n_t, d);
    norms.push_back(holder_seminorm(p, 0.5 - kappa, 1.0));
  }
  std::sort(norms.begin(), norms.end());
  auto idx = static_cast<std::size_t>(prob * (norms.size() - 1));
  return norms[idx];
}

//------------------------------------------------------------------------------
// Path mollification: B_ell(t) = sum_s chi_ell(s) B(t-s) ds with a smooth
// kernel chi supported in (0,1) (backward looking), plus the derivative path
// via the analytically differentiated kernel.
//------------------------------------------------------------------------------
struct MollifiedPath {
  double ell = 0.0;
  BrownianPath base;        // original path (for B - B_ell checks)
  std::vector<double> times;
  std::vector<std::vector<double>> vals;   // B_ell
  std::vector<std::vector<double>> dvals;  // dB_ell/dt

  std::vector<double> at(double t) const { return interp(vals, t); }
  std::vector<double> deriv_at(double t) const { return interp(dvals, t); }

 private:
  std::vector<double> interp(const std::vector<std::vector<double>>& v, double t) const {
    std::vector<double> b(v.size(), 0.0);
    const int n_t = static_cast<int>(times.size());
    const double dt = times[1] - times[0];
    double tc = std::min(std::max(t, 0.0), times.back());
    double u = tc / dt;
    int i = std::min(static_cast<int>(u), n_t - 2);
    double fr = u - i;
    for (std::size_t a = 0; a < v.size(); ++a)
      b[a] = (1.0 - fr) * v[a][i] + fr * v[a][i + 1];
    return b;
  }
};

inline MollifiedPath mollify_path(const BrownianPath& p, double ell) {
  const double dt = p.times[1] - p.times[0];
  TimeKernel tk(ell, dt);  // throws if ell below time resolution
  MollifiedPath mp;
  mp.ell = ell;
  mp.base = p;
  mp.times = p.times;
  const int n_t = static_cast<int>(p.times.size());
  mp.vals.assign(static_cast<size_t>(p.d), std::vector<double>(static_cast<size_t>(n_t), 0.0));
  mp.dvals = mp.vals;
  // Left extension: B(t) = 0 for t < 0 — evaluate the base path with clamping
  // built into BrownianPath::at.
  for (int i = 0; i < n_t; ++i) {
    double t = p.times[i];
    for (std::size_t s = 0; s < tk.lags.size(); ++s) {
      std::vector<double> b = p.at(t - tk.lags[s]);
      for (int a = 0; a < p.d; ++a) {
        mp.vals[a][i] += tk.weights[s] * b[a];
        mp.dvals[a][i] += tk.dweights[s] * b[a];
      }
    }
  }
  return mp;
}

//------------------------------------------------------------------------------
// Composition with the translation maps: (F o Psi)(t, x) = F(t, x + B(t)).
// Realized by the exact spectral phase shift translate(F(t), -B(t)); sign=-1
// gives the inverse map (t, x - B(t)); mollified=true uses B_ell.
//------------------------------------------------------------------------------
template <class F>
TimeField<F> shift_by_path(const TimeField<F>& f, const BrownianPath& path,
                           int sign = +1) {
  return TimeField<F>(f.grid, [f, path, sign](double t) {
    std::vector<double> b = path.at(t);
    for (auto& v : b) v *= -sign;  // F(x + B) = translate(F, -B)
    return translate(f(t), b);
  });
}

template <class F>
TimeField<F> shift_by_path(const TimeField<F>& f, const MollifiedPath& path,
                           int sign = +1) {
  return TimeField<F>(f.grid, [f, path, sign](double t) {
    std::vector<double> b = path.at(t);
    for (auto& v : b) v *= -sign;
    return translate(f(t), b);
  });
}

//------------------------------------------------------------------------------
// CSV serialization: header carries the seed; one row per grid time.
//------------------------------------------------------------------------------
inline void write_csv(const BrownianPath& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  out << "# seed=" << p.seed << " d=" << p.d << " n_t=" << p.times.size() << "\n";
  out << "t";
  for (int a = 0; a < p.d; ++a) out << ",B" << (a + 1);
  out << "\n";
  out.precision(17);
  for (std::size_t i = 0; i < p.times.size(); ++i) {
    out << p.times[i];
    for (int a = 0; a < p.d; ++a) out << "," << p.vals[a][i];
    out << "\n";
  }
}

}  // namespace mikado
