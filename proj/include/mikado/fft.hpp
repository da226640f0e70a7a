//==============================================================================
// fft.hpp
// Thin wrapper around FFTW for d-dimensional periodic complex transforms.
//   * Plans are cached per (rank, n, direction) and reused; FFTW's planner is
//     not thread-safe, so plan creation is mutex-guarded.
//   * Transforms are unnormalized in FFTW convention; forward() here divides
//     by n^d so the zero-frequency coefficient equals the grid mean, matching
//     the convention  f_hat(k) = integral of f(x) e^{-2 pi i k.x} dx.
//==============================================================================
#pragma once

#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

namespace mikado {

using cplx = std::complex<double>;

namespace detail {

// Key: (d, n, sign).  Plans are created once with FFTW_ESTIMATE (deterministic,
// no measurement noise in planning) and shared via the new-array execute API.
class FftPlanCache {
 public:
  static FftPlanCache& instance() {
    static FftPlanCache c;
    return c;
  }

  fftw_plan get(int d, int n, int sign, fftw_complex* buf) {
    std::lock_guard<std::mutex> lock(mu_);
    auto key = std::make_tuple(d, n, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::vector<int> dims(static_cast<size_t>(d), n);
    // FFTW_ESTIMATE | FFTW_UNALIGNED: the plan must accept any caller buffer
    // through fftw_execute_dft (alignment is not guaranteed for vector data).
    fftw_plan p = fftw_plan_dft(d, dims.data(), buf, buf, sign,
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!p) throw std::runtime_error("fftw plan creation failed");
    plans_.emplace(key, p);
    return p;
  }

 private:
  FftPlanCache() = default;
  ~FftPlanCache() {
    for (auto& kv : plans_) fftw_destroy_plan(kv.second);
  }
  std::mutex mu_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

}  // namespace detail

// In-place forward DFT of a flattened d-dim array (n points per axis),
// normalized so out[0] = mean of input.
inline void fft_forward(int d, int n, std::vector<cplx>& a) {
  auto* buf = reinterpret_cast<fftw_complex*>(a.data());
  fftw_plan p = detail::FftPlanCache::instance().get(d, n, FFTW_FORWARD, buf);
  fftw_execute_dft(p, buf, buf);
  const double scale = 1.0 / static_cast<double>(a.size());
  for (auto& z : a) z *= scale;
}

// In-place inverse DFT (undoes fft_forward exactly up to rounding).
inline void fft_inverse(int d, int n, std::vector<cplx>& a) {
  auto* buf = reinterpret_cast<fftw_complex*>(a.data());
  fftw_plan p = detail::FftPlanCache::instance().get(d, n, FFTW_BACKWARD, buf);
  fftw_execute_dft(p, buf, buf);
}

// Signed frequency of index i on an n-point axis: i in [0, n) -> k in [-n/2, n/2).
inline int signed_freq(int i, int n) { return (i <= n / 2 - 1 || n == 1) ? i : i - n; }

}  // namespace mikado
