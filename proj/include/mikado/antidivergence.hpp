//==============================================================================
// antidivergence.hpp
// Standard and improved antidivergence operators.
//   * std_antidiv(f) = grad(Laplace^-1 f): component i at k != 0 is
//     (2 pi i k_i / (-4 pi^2 |k|^2)) f_hat(k); requires mean-zero input and
//     satisfies div(std_antidiv(f)) = f exactly on the grid.
//   * improved_antidiv(f, g, N): bilinear operator R_N with
//       div(R_N(f,g)) = f g - mean(f g),
//     gaining one inverse oscillation factor per order when g oscillates.
//     Construction (with G := std_antidiv(g), each component mean-zero):
//       R_1(f,g)    = f G - std_antidiv(grad f . G - mean(grad f . G))
//       R_{k+1}(f,g)= f G - sum_i R_k(d_i f, G_i)
//     The divergence identity follows from div(f G) = grad f . G + f g and
//     mean(f g) = -mean(grad f . G); the Leibniz rule is inherited order by
//     order.  Properties are enforced by tests, not trusted from the algebra.
//==============================================================================
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "grid.hpp"

namespace mikado {

inline VectorField std_antidiv(const ScalarField& f, double mean_tol = 1e-10) {
  const GridSpec& g = f.grid;
  const double scale = lebesgue_norm(f, kInf);
  if (std::abs(f.mean()) > mean_tol * std::max(1.0, scale))
    throw std::runtime_error("std_antidiv: input has nonzero mean");
  const auto& sp = f.spectral();
  VectorField out(g);
  std::vector<std::vector<cplx>> comp(
      static_cast<size_t>(g.d), std::vector<cplx>(sp.size(), cplx(0.0, 0.0)));
  std::vector<int> idx(static_cast<size_t>(g.d), 0);
  std::size_t flat = 0;
  do {
    double k2 = 0.0;
    std::vector<int> k(static_cast<size_t>(g.d));
    for (int a = 0; a < g.d; ++a) {
      k[a] = signed_freq(idx[a], g.n);
      k2 += static_cast<double>(k[a]) * k[a];
    }
    if (k2 > 0.0) {
      const cplx base = sp[flat] / (-4.0 * kPi * kPi * k2);
      for (int a = 0; a < g.d; ++a)
        comp[a][flat] = cplx(0.0, kTwoPi * k[a]) * base;
    }
    ++flat;
  } while (next_index(g, idx));
  for (int a = 0; a < g.d; ++a)
    out[a] = ScalarField::from_spectral(g, std::move(comp[a]));
  return out;
}

struct AntidivOrder {
  int N = 1;
  explicit AntidivOrder(int n) : N(n) {
    if (n < 1) throw std::invalid_argument("AntidivOrder: N must be >= 1");
  }
};

namespace detail {

inline ScalarField remove_mean(const ScalarField& f) {
  ScalarField out = f;
  out += -f.mean();
  return out;
}

}  // namespace detail

inline VectorField improved_antidiv(const ScalarField& f, const ScalarField& g,
                                    AntidivOrder N, double mean_tol = 1e-8) {
  require_same_grid(f.grid, g.grid);
  const double scale = lebesgue_norm(g, kInf);
  if (std::abs(g.mean()) > mean_tol * std::max(1.0, scale))
    throw std::runtime_error("improved_antidiv: second argument has nonzero mean");
  VectorField G = std_antidiv(detail::remove_mean(g), 1e-6);
  // Unrolled recursion on the first argument.
  struct Rec {
    static VectorField run(const ScalarField& f, const VectorField& G, int order) {
      VectorField head = pointwise(f, G);
      if (order == 1) {
        ScalarField r = detail::remove_mean(dot(gradient(f), G));
        return head - std_antidiv(r, 1e-6);
      }
      VectorField tail(G.grid);
      for (int i = 0; i < G.grid.d; ++i) {
        VectorField Gi = std_antidiv(detail::remove_mean(G[i]), 1e-6);
        tail += run(derivative(f, i + 1), Gi, order - 1);
      }
      return head - tail;
    }
  };
  return Rec::run(f, G, N.N);
}

struct DecayProbeReport {
  std::vector<int> lambdas;
  std::vector<double> norms;
  double fitted_slope = 0.0;
  double predicted_slope = -1.0;
  bool degenerate = false;
};

// Fits ||R_N(f, g_lambda)||_{L^r} against lambda; leading prediction is -1.
inline DecayProbeReport antidiv_decay_probe(const ScalarField& f, const ScalarField& g,
                                            const std::vector<int>& lambdas,
                                            AntidivOrder N, double r = 2.0) {
  DecayProbeReport rep;
  rep.lambdas = lambdas;
  std::vector<double> xs;
  for (int lam : lambdas) {
    ScalarField gl = dilate(g, lam);
    VectorField R = improved_antidiv(f, gl, N);
    double nrm = lebesgue_norm(R, r);
    rep.norms.push_back(nrm);
    xs.push_back(static_cast<double>(lam));
  }
  for (double v : rep.norms)
    if (v < 1e-300) rep.degenerate = true;
  if (!rep.degenerate) rep.fitted_slope = loglog_slope(xs, rep.norms);
  return rep;
}

}  // namespace mikado
