#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cfs/error.hpp"
#include "cfs/gmm.hpp"
#include "cfs/simd/kernels.hpp"

namespace cfs::gmm {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

struct Params {
  std::vector<double> weights;
  std::vector<Vector> means;
  std::vector<Matrix> covs;
};

std::vector<std::size_t> kmeanspp(const Matrix& x, std::size_t k, Rng& rng) {
  const auto n = static_cast<std::size_t>(x.rows());
  std::vector<std::size_t> centers;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  centers.push_back(pick(rng));
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (centers.size() < k) {
    const auto last = x.row(static_cast<Eigen::Index>(centers.back()));
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (x.row(static_cast<Eigen::Index>(i)) - last).squaredNorm());
      total += d2[i];
    }
    if (total <= 0.0) {
      centers.push_back(pick(rng));
      continue;
    }
    const double u = unit(rng) * total;
    double acc = 0.0;
    std::size_t chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      acc += d2[i];
      if (acc >= u && d2[i] > 0.0) {
        chosen = i;
        break;
      }
    }
    centers.push_back(chosen);
  }
  return centers;
}

// Fills terms (k x n) with log pi_j + log N(x_i | mu_j, Sigma_j).
void component_terms(const Matrix& x, const Params& p, std::vector<double>& terms) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto d = static_cast<std::size_t>(x.cols());
  const auto& kern = simd::active();
  terms.resize(p.weights.size() * n);
  for (std::size_t j = 0; j < p.weights.size(); ++j) {
    Eigen::LLT<Matrix> llt(p.covs[j]);
    if (llt.info() != Eigen::Success) throw NumericError("EM: covariance of component " + std::to_string(j) + " lost positive definiteness");
    const Matrix L = llt.matrixL();
    const Matrix Lrow = L.transpose();
    const Vector inv_diag = L.diagonal().cwiseInverse();
    double* row = terms.data() + j * n;
    kern.sq_mahalanobis(Lrow.data(), inv_diag.data(), p.means[j].data(), x.data(), n, n, d, row);
    const double c = std::log(p.weights[j]) - 0.5 * (static_cast<double>(d) * kLog2Pi) - L.diagonal().array().log().sum();
    for (std::size_t i = 0; i < n; ++i) row[i] = c - 0.5 * row[i];
  }
}

}  // namespace

EmResult fit_em(const Matrix& data, const FeatureLayout& layout, const EmOptions& options) {
  const auto n = static_cast<std::size_t>(data.rows());
  const auto d = static_cast<std::size_t>(data.cols());
  const std::size_t k = options.k;
  if (k == 0) throw ArgumentError("fit_em: K must be >= 1");
  if (n < k) throw ArgumentError("fit_em: " + std::to_string(n) + " rows for K = " + std::to_string(k));
  if (d != layout.dim()) throw ArgumentError("fit_em: data has " + std::to_string(d) + " columns, layout " + std::to_string(layout.dim()));
  if (!data.allFinite()) throw ArgumentError("fit_em: data contains non-finite values");

  EmResult res;
  res.scaler = Scaler::fit(data);
  const Matrix x = res.scaler.apply(data);
  const Vector mu_all = x.colwise().mean().transpose();
  const Matrix xc_all = x.rowwise() - mu_all.transpose();
  const Matrix data_cov = (xc_all.transpose() * xc_all) / static_cast<double>(n);
  const double mean_var = data_cov.diagonal().mean();
  const double eps = mean_var > 0.0 ? 1e-6 * mean_var : 1e-6;
  res.regularization = eps;
  const Matrix reg = eps * Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));

  Rng rng(options.seed);
  Params p;
  for (std::size_t c : kmeanspp(x, k, rng)) {
    p.means.push_back(x.row(static_cast<Eigen::Index>(c)).transpose());
    p.covs.push_back(data_cov + reg);
    p.weights.push_back(1.0 / static_cast<double>(k));
  }

  const auto& kern = simd::active();
  std::vector<double> terms;
  std::vector<double> lse(n);
  double prev = -std::numeric_limits<double>::infinity();
  for (std::size_t it = 0;; ++it) {
    component_terms(x, p, terms);
    kern.softmax_columns(terms.data(), k, n, lse.data());
    double ll = 0.0;
    for (double v : lse) ll += v;
    ll /= static_cast<double>(n);
    if (!std::isfinite(ll)) throw NumericError("EM: log-likelihood is not finite at iteration " + std::to_string(it));
    res.loglik_trace.push_back(ll);
    res.iterations = it;
    if (it > 0 && std::abs(ll - prev) <= options.tol * std::max(std::abs(prev), 1e-12)) {
      res.converged = true;
      break;
    }
    if (it >= options.max_iter) break;
    prev = ll;

    // M-step
    for (std::size_t j = 0; j < k; ++j) {
      const Eigen::Map<const Vector> r(terms.data() + j * n, static_cast<Eigen::Index>(n));
      const double nk = r.sum();
      p.weights[j] = nk / static_cast<double>(n);
      if (nk < 1e-10) continue;  // keep a starved component's previous shape
      p.means[j] = (x.transpose() * r) / nk;
      const Matrix xc = x.rowwise() - p.means[j].transpose();
      Matrix cov = (xc.transpose() * (xc.array().colwise() * r.array()).matrix()) / nk;
      p.covs[j] = 0.5 * (cov + cov.transpose()) + reg;
    }
    const double wsum = std::accumulate(p.weights.begin(), p.weights.end(), 0.0);
    for (double& w : p.weights) w /= wsum;
  }

  res.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (terms[j * n + i] > terms[best * n + i]) best = j;
    res.labels[i] = best;
  }
  const double total_scaled = std::accumulate(lse.begin(), lse.end(), 0.0);
  res.total_loglik = total_scaled - static_cast<double>(n) * res.scaler.log_jacobian();
  res.model = res.scaler.unscale(Gmm(layout, p.weights, p.means, p.covs));
  return res;
}

std::size_t free_parameters(std::size_t k, std::size_t d) { return k * (1 + d + d * (d + 1) / 2) - 1; }

double bic(double total_loglik, std::size_t k, std::size_t d, std::size_t n) {
  return -2.0 * total_loglik + static_cast<double>(free_parameters(k, d)) * std::log(static_cast<double>(n));
}

Selection select_k(const Matrix& data, const FeatureLayout& layout, std::size_t k_min, std::size_t k_max,
                   std::uint64_t seed, const EmOptions& base) {
  if (k_min == 0 || k_min > k_max) throw ArgumentError("select_k: empty or invalid K range");
  const auto n = static_cast<std::size_t>(data.rows());
  if (n == 0) throw ArgumentError("select_k: no data rows");
  Selection sel;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = k_min; k <= k_max; ++k) {
    if (k > n) break;
    EmOptions opt = base;
    opt.k = k;
    opt.seed = mix_seed(seed, k);
    EmResult fit = fit_em(data, layout, opt);
    const double b = bic(fit.total_loglik, k, layout.dim(), n);
    sel.bic_by_k.emplace_back(k, b);
    if (b < best) {
      best = b;
      sel.k = k;
      sel.fit = std::move(fit);
    }
  }
  if (sel.k == 0) {
    EmOptions opt = base;
    opt.k = std::min<std::size_t>(5, n);
    opt.seed = mix_seed(seed, opt.k);
    sel.k = opt.k;
    sel.fit = fit_em(data, layout, opt);
  }
  return sel;
}

}  // namespace cfs::gmm
