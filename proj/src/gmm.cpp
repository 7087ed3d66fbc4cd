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
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(std::span<const double> v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

Matrix sub_matrix(const Matrix& m, const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) {
  Matrix out(rows.size(), cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c) out(r, c) = m(rows[r], cols[c]);
  return out;
}

Vector sub_vector(const Vector& v, const std::vector<std::size_t>& idx) {
  Vector out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out(i) = v(idx[i]);
  return out;
}

}  // namespace

Gmm::Gmm(FeatureLayout layout, std::vector<double> weights, std::vector<Vector> means, std::vector<Matrix> covs)
    : layout_(std::move(layout)), weights_(std::move(weights)), means_(std::move(means)), covs_(std::move(covs)) {
  const std::size_t d = layout_.dim();
  if (weights_.empty()) throw ArgumentError("Gmm needs at least one component");
  if (d == 0 || d > kMaxDim) throw ArgumentError("Gmm dimension must be in 1.." + std::to_string(kMaxDim));
  if (means_.size() != weights_.size() || covs_.size() != weights_.size()) throw ArgumentError("Gmm component arrays differ in length");
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ArgumentError("Gmm weights must be finite and >= 0");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ArgumentError("Gmm weights sum to " + std::to_string(total) + ", not 1");
  for (double& w : weights_) w /= total;
  for (std::size_t i = 0; i < k(); ++i) {
    if (static_cast<std::size_t>(means_[i].size()) != d) throw ArgumentError("Gmm mean " + std::to_string(i) + " has wrong dimension");
    if (static_cast<std::size_t>(covs_[i].rows()) != d || static_cast<std::size_t>(covs_[i].cols()) != d)
      throw ArgumentError("Gmm covariance " + std::to_string(i) + " has wrong shape");
    if (!means_[i].allFinite() || !covs_[i].allFinite()) throw NumericError("Gmm component " + std::to_string(i) + " is not finite");
    covs_[i] = symmetrize(covs_[i]);
  }
  factorize();
}

void Gmm::factorize() {
  const std::size_t d = dim();
  chol_.clear();
  factors_.clear();
  for (std::size_t i = 0; i < k(); ++i) {
    Eigen::LLT<Matrix> llt(covs_[i]);
    if (llt.info() != Eigen::Success) throw NumericError("covariance of component " + std::to_string(i) + " is not positive definite");
    Matrix L = llt.matrixL();
    Factor f;
    f.chol_rowmajor = L.transpose();
    f.inv_diag = L.diagonal().cwiseInverse();
    f.log_norm = -0.5 * (static_cast<double>(d) * kLog2Pi + 2.0 * L.diagonal().array().log().sum());
    chol_.push_back(std::move(L));
    factors_.push_back(std::move(f));
  }
}

double Gmm::log_pdf(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != dim()) throw ArgumentError("log_pdf: dimension mismatch");
  std::vector<double> terms(k());
  for (std::size_t i = 0; i < k(); ++i) {
    const Vector z = chol_[i].triangularView<Eigen::Lower>().solve(x - means_[i]);
    terms[i] = std::log(weights_[i]) + factors_[i].log_norm - 0.5 * z.squaredNorm();
  }
  return log_sum_exp(terms);
}

double Gmm::pdf(const Vector& x) const { return std::exp(log_pdf(x)); }

void Gmm::log_pdf_batch(const Matrix& points, std::span<double> out) const {
  const auto n = static_cast<std::size_t>(points.rows());
  if (static_cast<std::size_t>(points.cols()) != dim()) throw ArgumentError("log_pdf_batch: dimension mismatch");
  if (out.size() != n) throw ArgumentError("log_pdf_batch: output size mismatch");
  if (n == 0) return;
  const auto& kern = simd::active();
  std::vector<double> terms(k() * n);
  for (std::size_t j = 0; j < k(); ++j) {
    double* row = terms.data() + j * n;
    kern.sq_mahalanobis(factors_[j].chol_rowmajor.data(), factors_[j].inv_diag.data(), means_[j].data(), points.data(), n, n, dim(), row);
    const double c = std::log(weights_[j]) + factors_[j].log_norm;
    for (std::size_t i = 0; i < n; ++i) row[i] = c - 0.5 * row[i];
  }
  kern.log_sum_exp(terms.data(), k(), n, out.data());
}

Matrix Gmm::sample(std::size_t n, Rng& rng) const {
  std::vector<double> cumulative(k());
  std::partial_sum(weights_.begin(), weights_.end(), cumulative.begin());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t d = dim();
  Matrix out(n, d);
  Vector z(d);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = unit(rng) * cumulative.back();
    auto c = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    c = std::min(c, k() - 1);
    while (weights_[c] == 0.0 && c > 0) --c;
    for (std::size_t r = 0; r < d; ++r) z(r) = normal(rng);
    out.row(i) = (means_[c] + chol_[c].triangularView<Eigen::Lower>() * z).transpose();
  }
  return out;
}

Matrix Gmm::sample(std::size_t n, std::uint64_t seed) const {
  Rng rng(seed);
  return sample(n, rng);
}

Conditioner::Conditioner(const Gmm& joint, std::vector<std::string> observed) : observed_(std::move(observed)) {
  const FeatureLayout& layout = joint.layout();
  obs_idx_ = layout.indices(observed_);
  const auto targets = layout.complement(observed_);
  if (targets.empty()) throw ArgumentError("condition: no blocks left to predict");
  target_layout_ = layout.subset(targets);
  tgt_idx_ = layout.indices(targets);
  const auto dx = static_cast<double>(obs_idx_.size());
  for (std::size_t c = 0; c < joint.k(); ++c) {
    const Matrix& cov = joint.cov(c);
    const Matrix sxx = sub_matrix(cov, obs_idx_, obs_idx_);
    const Matrix syx = sub_matrix(cov, tgt_idx_, obs_idx_);
    const Matrix syy = sub_matrix(cov, tgt_idx_, tgt_idx_);
    Eigen::LLT<Matrix> llt(sxx);
    if (llt.info() != Eigen::Success) throw NumericError("condition: observed covariance of component " + std::to_string(c) + " is singular");
    Matrix gain = llt.solve(syx.transpose()).transpose();
    Matrix cc = symmetrize(syy - gain * syx.transpose());
    Eigen::LLT<Matrix> llt_c(cc);
    if (llt_c.info() != Eigen::Success) throw NumericError("condition: conditional covariance of component " + std::to_string(c) + " is not positive definite");
    Matrix Lc = llt_c.matrixL();
    Gmm::Factor f;
    f.chol_rowmajor = Lc.transpose();
    f.inv_diag = Lc.diagonal().cwiseInverse();
    f.log_norm = -0.5 * (static_cast<double>(tgt_idx_.size()) * kLog2Pi + 2.0 * Lc.diagonal().array().log().sum());

    Matrix Lx = llt.matrixL();
    log_norm_x_.push_back(-0.5 * (dx * kLog2Pi + 2.0 * Lx.diagonal().array().log().sum()));
    log_weights_.push_back(std::log(joint.weight(c)));
    mean_x_.push_back(sub_vector(joint.mean(c), obs_idx_));
    mean_y_.push_back(sub_vector(joint.mean(c), tgt_idx_));
    gain_.push_back(std::move(gain));
    cond_cov_.push_back(std::move(cc));
    cond_chol_.push_back(std::move(Lc));
    cond_factor_.push_back(std::move(f));
    llt_x_.push_back(std::move(llt));
  }
}

Gmm Conditioner::operator()(const Vector& value) const {
  if (static_cast<std::size_t>(value.size()) != obs_idx_.size()) throw ArgumentError("condition: observed value has wrong dimension");
  const std::size_t kk = mean_x_.size();
  std::vector<double> lw(kk);
  std::vector<Vector> diffs(kk);
  for (std::size_t c = 0; c < kk; ++c) {
    diffs[c] = value - mean_x_[c];
    const Vector z = llt_x_[c].matrixL().solve(diffs[c]);
    lw[c] = log_weights_[c] + log_norm_x_[c] - 0.5 * z.squaredNorm();
  }
  const double lse = log_sum_exp(lw);
  if (!std::isfinite(lse)) throw NumericError("condition: observation has zero density under every component");
  Gmm out;
  out.layout_ = target_layout_;
  out.weights_.resize(kk);
  double total = 0.0;
  for (std::size_t c = 0; c < kk; ++c) total += (out.weights_[c] = std::exp(lw[c] - lse));
  for (auto& w : out.weights_) w /= total;
  out.means_.resize(kk);
  for (std::size_t c = 0; c < kk; ++c) out.means_[c] = mean_y_[c] + gain_[c] * diffs[c];
  out.covs_ = cond_cov_;
  out.chol_ = cond_chol_;
  out.factors_ = cond_factor_;
  return out;
}

Gmm condition(const Gmm& model, const std::vector<std::string>& observed, const Vector& value) {
  if (observed.empty()) {
    if (value.size() != 0) throw ArgumentError("condition: value given for zero observed blocks");
    return model;
  }
  return Conditioner(model, observed)(value);
}

Gmm marginalize(const Gmm& model, const std::vector<std::string>& dropped) {
  if (dropped.empty()) return model;
  const auto keep = model.layout().complement(dropped);
  if (keep.empty()) throw ArgumentError("marginalize: cannot drop every block");
  const auto idx = model.layout().indices(keep);
  std::vector<Vector> means;
  std::vector<Matrix> covs;
  for (std::size_t c = 0; c < model.k(); ++c) {
    means.push_back(sub_vector(model.mean(c), idx));
    covs.push_back(sub_matrix(model.cov(c), idx, idx));
  }
  return Gmm(model.layout().subset(keep), model.weights(), std::move(means), std::move(covs));
}

FeatureWindow window_at(const TrajectoryPair& pair, std::size_t start, std::size_t history) {
  if (start + history > pair.size()) throw ArgumentError("window_at: window exceeds pair " + pair.pair_id);
  FeatureWindow w;
  for (std::size_t i = start; i < start + history; ++i) {
    w.a_hist.push_back(pair.follower[i].a);
    w.v_foll.push_back(pair.follower[i].v);
    w.dv.push_back(pair.dv(i));
    w.dx.push_back(pair.dx(i));
  }
  return w;
}

Vector observed_vector(const FeatureWindow& w, const FeatureLayout& layout, const std::vector<std::string>& observed) {
  Vector out(static_cast<Eigen::Index>(layout.indices(observed).size()));
  Eigen::Index pos = 0;
  for (const auto& b : layout.blocks()) {
    if (std::find(observed.begin(), observed.end(), b.name) == observed.end()) continue;
    const std::vector<double>* src = nullptr;
    if (b.name == blocks::kAccelHistory) src = &w.a_hist;
    else if (b.name == blocks::kSpeed) src = &w.v_foll;
    else if (b.name == blocks::kRelSpeed) src = &w.dv;
    else if (b.name == blocks::kGap) src = &w.dx;
    else throw ArgumentError("observed_vector: block '" + b.name + "' is not part of a history window");
    if (src->size() != b.size) throw ArgumentError("observed_vector: block '" + b.name + "' size mismatch");
    for (double v : *src) out(pos++) = v;
  }
  return out;
}

std::size_t window_count(std::size_t length, const FeatureLayout& layout) {
  const std::size_t span = layout.block(blocks::kAccelHistory).size + layout.block(blocks::kAccelFuture).size;
  return length >= span ? length - span + 1 : 0;
}

Matrix build_dataset(std::span<const TrajectoryPair> pairs, const FeatureLayout& layout) {
  const std::size_t h = layout.block(blocks::kAccelHistory).size;
  for (const char* name : {blocks::kSpeed, blocks::kRelSpeed, blocks::kGap})
    if (layout.block(name).size != h) throw ArgumentError(std::string("build_dataset: block ") + name + " must have the history length");
  if (layout.blocks().size() != 5) throw ArgumentError("build_dataset: layout must hold exactly the five car-following blocks");

  std::size_t rows = 0;
  for (const auto& p : pairs) rows += window_count(p.size(), layout);
  Matrix data(rows, layout.dim());
  Eigen::Index r = 0;
  for (const auto& p : pairs) {
    const std::size_t n = window_count(p.size(), layout);
    for (std::size_t j = 0; j < n; ++j, ++r) {
      for (const auto& b : layout.blocks()) {
        for (std::size_t i = 0; i < b.size; ++i) {
          double v = 0.0;
          if (b.name == blocks::kAccelHistory) v = p.follower[j + i].a;
          else if (b.name == blocks::kAccelFuture) v = p.follower[j + h + i].a;
          else if (b.name == blocks::kSpeed) v = p.follower[j + i].v;
          else if (b.name == blocks::kRelSpeed) v = p.dv(j + i);
          else v = p.dx(j + i);
          data(r, static_cast<Eigen::Index>(b.offset + i)) = v;
        }
      }
    }
  }
  return data;
}

Scaler Scaler::fit(const Matrix& data) {
  if (data.rows() == 0) throw ArgumentError("Scaler: empty data");
  Scaler s;
  s.mean = data.colwise().mean().transpose();
  s.scale.resize(data.cols());
  for (Eigen::Index c = 0; c < data.cols(); ++c) {
    const double var = (data.col(c).array() - s.mean(c)).square().mean();
    s.scale(c) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return s;
}

Matrix Scaler::apply(const Matrix& data) const {
  return (data.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

Gmm Scaler::unscale(const Gmm& scaled) const {
  std::vector<Vector> means;
  std::vector<Matrix> covs;
  const auto S = scale.asDiagonal();
  for (std::size_t c = 0; c < scaled.k(); ++c) {
    means.push_back(scale.cwiseProduct(scaled.mean(c)) + mean);
    covs.push_back(S * scaled.cov(c) * S);
  }
  return Gmm(scaled.layout(), scaled.weights(), std::move(means), std::move(covs));
}

double Scaler::log_jacobian() const { return scale.array().log().sum(); }

}  // namespace cfs::gmm
