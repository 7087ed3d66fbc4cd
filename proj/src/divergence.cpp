#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "cfs/error.hpp"
#include "cfs/interaction.hpp"
#include "cfs/transport.hpp"

namespace cfs::interaction {
namespace {

struct SqrtFactor {
  Matrix root;
  double trace = 0.0;
};

SqrtFactor spd_sqrt(const Matrix& cov, const char* which) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (cov + cov.transpose()));
  if (es.info() != Eigen::Success) throw NumericError(std::string("gaussian_w2: eigendecomposition of ") + which + " failed");
  const Vector& ev = es.eigenvalues();
  if (!(ev.minCoeff() > 0.0)) throw NumericError(std::string("gaussian_w2: ") + which + " is not positive definite");
  SqrtFactor f;
  f.root = es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
  f.trace = ev.sum();
  return f;
}

double squared_w2(const Vector& mu1, const Matrix& cov1, const SqrtFactor& s1, const Vector& mu2, const SqrtFactor& s2) {
  const Matrix m = s2.root * cov1 * s2.root;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericError("gaussian_w2: eigendecomposition of the cross term failed");
  double cross = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) cross += std::sqrt(std::max(0.0, es.eigenvalues()(i)));
  double bures = s1.trace + s2.trace - 2.0 * cross;
  // round-off of the trace difference would survive the final sqrt as ~1e-8
  if (std::abs(bures) <= 64.0 * std::numeric_limits<double>::epsilon() * (s1.trace + s2.trace)) bures = 0.0;
  if (bures < 0.0) {
    if (bures < -1e-8 * std::max(1.0, s1.trace + s2.trace)) throw NumericError("gaussian_w2: Bures term is negative beyond round-off");
    bures = 0.0;
  }
  return (mu1 - mu2).squaredNorm() + bures;
}

void check_dims(const Vector& mu1, const Matrix& cov1, const Vector& mu2, const Matrix& cov2) {
  const auto d = mu1.size();
  if (mu2.size() != d || cov1.rows() != d || cov1.cols() != d || cov2.rows() != d || cov2.cols() != d)
    throw ArgumentError("gaussian_w2: dimension mismatch");
}

void check_simplex(const Gmm& m, const char* which) {
  double s = 0.0;
  for (double w : m.weights()) {
    if (!(w >= 0.0)) throw ArgumentError(std::string("mixture_w2: negative weight in ") + which);
    s += w;
  }
  if (std::abs(s - 1.0) > 1e-9) throw ArgumentError(std::string("mixture_w2: weights of ") + which + " are not on the simplex");
}

double log_add(double a, double b) {
  const double m = std::max(a, b);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct Moments {
  double mean = 0.0, var = 0.0;
};

Moments moments(const std::vector<double>& x) {
  Moments mo;
  for (double v : x) mo.mean += v;
  mo.mean /= static_cast<double>(x.size());
  for (double v : x) mo.var += (v - mo.mean) * (v - mo.mean);
  mo.var = x.size() > 1 ? mo.var / static_cast<double>(x.size() - 1) : 0.0;
  return mo;
}

// log p(x) - log h(x) for x drawn from p, where h = (p + q) / 2.
std::vector<double> js_terms(const Gmm& p, const Gmm& q, std::size_t n, std::uint64_t seed) {
  const Matrix x = p.sample(n, seed);
  std::vector<double> lp(n), lq(n);
  p.log_pdf_batch(x, lp);
  q.log_pdf_batch(x, lq);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = lp[i] - (log_add(lp[i], lq[i]) - std::numbers::ln2);
  return out;
}

}  // namespace

double gaussian_w2(const Vector& mu1, const Matrix& cov1, const Vector& mu2, const Matrix& cov2) {
  check_dims(mu1, cov1, mu2, cov2);
  const SqrtFactor s1 = spd_sqrt(cov1, "first covariance");
  const SqrtFactor s2 = spd_sqrt(cov2, "second covariance");
  return std::sqrt(squared_w2(mu1, cov1, s1, mu2, s2));
}

Matrix w2_cost_matrix(const Gmm& f, const Gmm& g) {
  if (f.dim() != g.dim()) throw ArgumentError("mixture_w2: dimension mismatch");
  std::vector<SqrtFactor> sf, sg;
  for (std::size_t i = 0; i < f.k(); ++i) sf.push_back(spd_sqrt(f.cov(i), "covariance"));
  for (std::size_t j = 0; j < g.k(); ++j) sg.push_back(spd_sqrt(g.cov(j), "covariance"));
  Matrix c(static_cast<Eigen::Index>(f.k()), static_cast<Eigen::Index>(g.k()));
  for (std::size_t i = 0; i < f.k(); ++i)
    for (std::size_t j = 0; j < g.k(); ++j)
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = squared_w2(f.mean(i), f.cov(i), sf[i], g.mean(j), sg[j]);
  return c;
}

double mixture_w2(const Gmm& f, const Gmm& g) {
  check_simplex(f, "f");
  check_simplex(g, "g");
  const TransportPlan plan = solve_transport(f.weights(), g.weights(), w2_cost_matrix(f, g));
  return std::sqrt(std::max(0.0, plan.cost));
}

McEstimate kl_mc(const Gmm& f, const Gmm& g, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ArgumentError("kl_mc: n must be >= 1");
  if (f.dim() != g.dim()) throw ArgumentError("kl_mc: dimension mismatch");
  const Matrix x = f.sample(n, seed);
  std::vector<double> lf(n), lg(n);
  f.log_pdf_batch(x, lf);
  g.log_pdf_batch(x, lg);
  for (std::size_t i = 0; i < n; ++i) lf[i] -= lg[i];
  const Moments mo = moments(lf);
  if (!std::isfinite(mo.mean)) throw NumericError("kl_mc: estimate is not finite");
  return {std::max(0.0, mo.mean), mo.mean, std::sqrt(mo.var / static_cast<double>(n))};
}

McEstimate js_divergence(const Gmm& f, const Gmm& g, std::size_t n, std::uint64_t seed_f, std::uint64_t seed_g) {
  if (n == 0) throw ArgumentError("js_divergence: n must be >= 1");
  if (f.dim() != g.dim()) throw ArgumentError("js_divergence: dimension mismatch");
  const Moments a = moments(js_terms(f, g, n, seed_f));
  const Moments b = moments(js_terms(g, f, n, seed_g));
  const double raw = 0.5 * a.mean + 0.5 * b.mean;
  if (!std::isfinite(raw)) throw NumericError("js_divergence: estimate is not finite");
  return {std::clamp(raw, 0.0, std::numbers::ln2), raw, 0.5 * std::sqrt((a.var + b.var) / static_cast<double>(n))};
}

McEstimate js_divergence(const Gmm& f, const Gmm& g, std::size_t n, std::uint64_t seed) {
  return js_divergence(f, g, n, mix_seed(seed, 1), mix_seed(seed, 2));
}

std::string to_string(Metric m) { return m == Metric::JS ? "js" : "w2"; }

Metric parse_metric(const std::string& s) {
  if (s == "js" || s == "JS") return Metric::JS;
  if (s == "w2" || s == "W2") return Metric::W2;
  throw ArgumentError("unknown metric '" + s + "' (expected js or w2)");
}

}  // namespace cfs::interaction
