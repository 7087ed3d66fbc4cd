#include <cmath>
#include <limits>

#include "cfs/simd/kernels.hpp"

namespace cfs::simd {
namespace {

void sq_mahalanobis_scalar(const double* chol, const double* inv_diag, const double* mean, const double* x,
                           std::size_t ld, std::size_t n, std::size_t d, double* out) {
  constexpr std::size_t kMaxDim = 64;
  double z[kMaxDim];
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t r = 0; r < d; ++r) {
      double s = x[r * ld + i] - mean[r];
      const double* row = chol + r * d;
      for (std::size_t c = 0; c < r; ++c) s -= row[c] * z[c];
      z[r] = s * inv_diag[r];
      acc += z[r] * z[r];
    }
    out[i] = acc;
  }
}

void log_sum_exp_scalar(const double* terms, std::size_t k, std::size_t n, double* out) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    double m = kNegInf;
    for (std::size_t j = 0; j < k; ++j) m = std::fmax(m, terms[j * n + i]);
    if (m == kNegInf) {
      out[i] = kNegInf;
      continue;
    }
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(terms[j * n + i] - m);
    out[i] = m + std::log(s);
  }
}

void softmax_scalar(double* terms, std::size_t k, std::size_t n, double* out) {
  log_sum_exp_scalar(terms, k, n, out);
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    double* row = terms + j * n;
    for (std::size_t i = 0; i < n; ++i) row[i] = out[i] == kNegInf ? 0.0 : std::exp(row[i] - out[i]);
  }
}

}  // namespace

const KernelTable& scalar_kernels() noexcept {
  static const KernelTable table{"scalar", &sq_mahalanobis_scalar, &log_sum_exp_scalar, &softmax_scalar};
  return table;
}

}  // namespace cfs::simd
