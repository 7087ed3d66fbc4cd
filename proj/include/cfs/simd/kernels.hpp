#pragma once

// Batched density kernels behind the mixture log-density, EM E-step and
// Monte-Carlo divergence loops. Each kernel has a scalar reference version
// and, on x86-64, an AVX2/FMA version; the active table is picked once at
// runtime from CPUID and can be pinned with CFS_SIMD=scalar|avx2.
//
// Point batches are structure-of-arrays: coordinate c of point i lives at
// x[c * ld + i] (an Eigen column-major n x d matrix with ld = n).

#include <cstddef>
#include <string_view>

namespace cfs::simd {

/// out[i] = || L^{-1} (x_i - mean) ||^2 with L lower-triangular, row-major
/// d x d. inv_diag[r] = 1 / L(r, r).
using SqMahalanobisFn = void (*)(const double* chol, const double* inv_diag, const double* mean,
                                 const double* x, std::size_t ld, std::size_t n, std::size_t d,
                                 double* out);

/// terms is k x n row-major (row j at terms + j * n). out[i] = log sum_j exp(terms[j][i]).
/// A column of all -inf yields -inf.
using LogSumExpFn = void (*)(const double* terms, std::size_t k, std::size_t n, double* out);

/// In-place column softmax: terms[j][i] <- exp(terms[j][i] - lse_i); lse written to out.
using SoftmaxFn = void (*)(double* terms, std::size_t k, std::size_t n, double* out);

struct KernelTable {
  std::string_view name;
  SqMahalanobisFn sq_mahalanobis;
  LogSumExpFn log_sum_exp;
  SoftmaxFn softmax_columns;
};

const KernelTable& scalar_kernels() noexcept;

/// nullptr when not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels() noexcept;

/// Table used by the library.
const KernelTable& active() noexcept;

/// Overrides the runtime choice ("scalar", "avx2", "auto"); returns false if
/// the request cannot be honoured on this machine.
bool select(std::string_view which) noexcept;

}  // namespace cfs::simd
