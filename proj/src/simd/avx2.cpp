// Compiled with -mavx2 -mfma; only reached through the dispatch table after
// a CPUID check.

#include <immintrin.h>

#include <cmath>
#include <limits>

#include "cfs/simd/kernels.hpp"

namespace cfs::simd {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// exp(x) for 4 doubles: Cody-Waite reduction by ln 2 and a degree-13 Taylor
// polynomial on |r| <= ln2 / 2 (truncation < 1e-17 relative). Inputs below
// -708 flush to 0; inputs above 709 saturate.
inline __m256d exp_pd(__m256d x) {
  const __m256d lo = _mm256_set1_pd(-708.0);
  const __m256d hi = _mm256_set1_pd(709.0);
  const __m256d underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  x = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

  const __m256d log2e = _mm256_set1_pd(1.4426950408889634);
  const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
  const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
  const __m256d k = _mm256_round_pd(_mm256_mul_pd(x, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(k, ln2_hi, x);
  r = _mm256_fnmadd_pd(k, ln2_lo, r);

  static constexpr double c[] = {
      1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0, 1.0 / 362880.0,
      1.0 / 40320.0,      1.0 / 5040.0,      1.0 / 720.0,      1.0 / 120.0,     1.0 / 24.0,
      1.0 / 6.0,          0.5,               1.0,              1.0};
  __m256d p = _mm256_set1_pd(c[0]);
  for (int i = 1; i < 14; ++i) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(c[i]));

  const __m128i ki = _mm256_cvtpd_epi32(k);
  __m256i e = _mm256_cvtepi32_epi64(ki);
  e = _mm256_add_epi64(e, _mm256_set1_epi64x(1023));
  e = _mm256_slli_epi64(e, 52);
  const __m256d scale = _mm256_castsi256_pd(e);
  return _mm256_blendv_pd(_mm256_mul_pd(p, scale), _mm256_setzero_pd(), underflow);
}

void sq_mahalanobis_avx2(const double* chol, const double* inv_diag, const double* mean, const double* x,
                         std::size_t ld, std::size_t n, std::size_t d, double* out) {
  constexpr std::size_t kMaxDim = 64;
  __m256d z[kMaxDim];
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t r = 0; r < d; ++r) {
      __m256d s = _mm256_sub_pd(_mm256_loadu_pd(x + r * ld + i), _mm256_set1_pd(mean[r]));
      const double* row = chol + r * d;
      for (std::size_t c = 0; c < r; ++c) s = _mm256_fnmadd_pd(_mm256_set1_pd(row[c]), z[c], s);
      z[r] = _mm256_mul_pd(s, _mm256_set1_pd(inv_diag[r]));
      acc = _mm256_fmadd_pd(z[r], z[r], acc);
    }
    _mm256_storeu_pd(out + i, acc);
  }
  double zs[kMaxDim];
  for (; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t r = 0; r < d; ++r) {
      double s = x[r * ld + i] - mean[r];
      const double* row = chol + r * d;
      for (std::size_t c = 0; c < r; ++c) s = std::fma(-row[c], zs[c], s);
      zs[r] = s * inv_diag[r];
      acc = std::fma(zs[r], zs[r], acc);
    }
    out[i] = acc;
  }
}

void log_sum_exp_tail(const double* terms, std::size_t k, std::size_t n, std::size_t i, double* out) {
  double m = kNegInf;
  for (std::size_t j = 0; j < k; ++j) m = std::fmax(m, terms[j * n + i]);
  if (m == kNegInf) {
    out[i] = kNegInf;
    return;
  }
  double s = 0.0;
  for (std::size_t j = 0; j < k; ++j) s += std::exp(terms[j * n + i] - m);
  out[i] = m + std::log(s);
}

void log_sum_exp_avx2(const double* terms, std::size_t k, std::size_t n, double* out) {
  const __m256d neg_inf = _mm256_set1_pd(kNegInf);
  std::size_t i = 0;
  alignas(32) double sums[4];
  alignas(32) double maxes[4];
  for (; i + 4 <= n; i += 4) {
    __m256d m = neg_inf;
    for (std::size_t j = 0; j < k; ++j) m = _mm256_max_pd(m, _mm256_loadu_pd(terms + j * n + i));
    // Lanes whose maximum is -inf would produce NaN in t - m; shift them by 0.
    const __m256d dead = _mm256_cmp_pd(m, neg_inf, _CMP_EQ_OQ);
    const __m256d shift = _mm256_blendv_pd(m, _mm256_setzero_pd(), dead);
    __m256d s = _mm256_setzero_pd();
    for (std::size_t j = 0; j < k; ++j) s = _mm256_add_pd(s, exp_pd(_mm256_sub_pd(_mm256_loadu_pd(terms + j * n + i), shift)));
    _mm256_store_pd(sums, s);
    _mm256_store_pd(maxes, m);
    for (int l = 0; l < 4; ++l) out[i + l] = maxes[l] == kNegInf ? kNegInf : maxes[l] + std::log(sums[l]);
  }
  for (; i < n; ++i) log_sum_exp_tail(terms, k, n, i, out);
}

void softmax_avx2(double* terms, std::size_t k, std::size_t n, double* out) {
  log_sum_exp_avx2(terms, k, n, out);
  const __m256d neg_inf = _mm256_set1_pd(kNegInf);
  for (std::size_t j = 0; j < k; ++j) {
    double* row = terms + j * n;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
      const __m256d lse = _mm256_loadu_pd(out + i);
      const __m256d dead = _mm256_cmp_pd(lse, neg_inf, _CMP_EQ_OQ);
      const __m256d v = exp_pd(_mm256_sub_pd(_mm256_loadu_pd(row + i), _mm256_blendv_pd(lse, _mm256_setzero_pd(), dead)));
      _mm256_storeu_pd(row + i, _mm256_blendv_pd(v, _mm256_setzero_pd(), dead));
    }
    for (; i < n; ++i) row[i] = out[i] == kNegInf ? 0.0 : std::exp(row[i] - out[i]);
  }
}

}  // namespace

const KernelTable& avx2_kernel_table() noexcept {
  static const KernelTable table{"avx2", &sq_mahalanobis_avx2, &log_sum_exp_avx2, &softmax_avx2};
  return table;
}

}  // namespace cfs::simd
