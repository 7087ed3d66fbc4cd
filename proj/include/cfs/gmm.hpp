#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cfs/feature_layout.hpp"
#include "cfs/rng.hpp"
#include "cfs/trajectory.hpp"

namespace cfs::gmm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr std::size_t kMaxDim = 64;

/// Gaussian mixture over a named feature layout. Immutable once built; all
/// queries are const and safe to call concurrently.
class Gmm {
 public:
  Gmm() = default;

  /// Weights must lie on the simplex (sum within 1e-9, renormalised exactly);
  /// covariances are symmetrised and must admit a Cholesky factor.
  Gmm(FeatureLayout layout, std::vector<double> weights, std::vector<Vector> means, std::vector<Matrix> covs);

  std::size_t k() const noexcept { return weights_.size(); }
  std::size_t dim() const noexcept { return layout_.dim(); }
  const FeatureLayout& layout() const noexcept { return layout_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  double weight(std::size_t i) const { return weights_[i]; }
  const Vector& mean(std::size_t i) const { return means_[i]; }
  const Matrix& cov(std::size_t i) const { return covs_[i]; }

  /// Lower Cholesky factor of cov(i).
  const Matrix& chol(std::size_t i) const { return chol_[i]; }

  double log_pdf(const Vector& x) const;
  double pdf(const Vector& x) const;

  /// points is n x dim (one point per row); writes n log-densities.
  void log_pdf_batch(const Matrix& points, std::span<double> out) const;

  /// n x dim draws: component by weight, then mean + L z.
  Matrix sample(std::size_t n, Rng& rng) const;
  Matrix sample(std::size_t n, std::uint64_t seed) const;

 private:
  struct Factor {
    Matrix chol_rowmajor;  // L stored row-major (= L^T column-major)
    Vector inv_diag;
    double log_norm = 0.0;  // -(d log 2pi + log det) / 2
  };

  void factorize();
  friend class Conditioner;

  FeatureLayout layout_;
  std::vector<double> weights_;
  std::vector<Vector> means_;
  std::vector<Matrix> covs_;
  std::vector<Matrix> chol_;
  std::vector<Factor> factors_;
};

/// Gaussian-mixture regression: conditions a fixed joint model on a fixed
/// set of observed blocks. Per-component gains, conditional covariances and
/// marginal factors are computed once; each call only shifts means and
/// re-weights components.
class Conditioner {
 public:
  Conditioner(const Gmm& joint, std::vector<std::string> observed);

  /// value is the concatenation of the observed blocks in layout order.
  Gmm operator()(const Vector& value) const;

  const FeatureLayout& target_layout() const noexcept { return target_layout_; }
  std::size_t observed_dim() const noexcept { return obs_idx_.size(); }

 private:
  std::vector<std::string> observed_;
  FeatureLayout target_layout_;
  std::vector<std::size_t> obs_idx_, tgt_idx_;
  std::vector<double> log_weights_;
  std::vector<Vector> mean_x_, mean_y_;
  std::vector<Matrix> gain_;
  std::vector<Matrix> cond_cov_;
  std::vector<Matrix> cond_chol_;
  std::vector<Gmm::Factor> cond_factor_;
  std::vector<Eigen::LLT<Matrix>> llt_x_;
  std::vector<double> log_norm_x_;
};

/// Conditional mixture over the complement of `observed`.
/// Conditioning on no blocks returns the model unchanged.
Gmm condition(const Gmm& model, const std::vector<std::string>& observed, const Vector& value);

/// Drops blocks; weights are kept, means/covariances are sub-blocks.
Gmm marginalize(const Gmm& model, const std::vector<std::string>& dropped);

/// Observed history of a car-following window of H samples.
struct FeatureWindow {
  std::vector<double> a_hist, v_foll, dv, dx;
};

FeatureWindow window_at(const TrajectoryPair& pair, std::size_t start, std::size_t history);

/// Concatenates the named window blocks in `layout` order.
Vector observed_vector(const FeatureWindow& w, const FeatureLayout& layout, const std::vector<std::string>& observed);

/// Number of windows a pair of this length yields (0 if too short).
std::size_t window_count(std::size_t length, const FeatureLayout& layout);

/// One row per sliding window (stride 1) over each pair, columns per layout.
Matrix build_dataset(std::span<const TrajectoryPair> pairs, const FeatureLayout& layout);

/// Per-dimension z-scoring; zero-variance dimensions get unit scale.
struct Scaler {
  Vector mean;
  Vector scale;

  static Scaler fit(const Matrix& data);
  Matrix apply(const Matrix& data) const;
  /// Maps a model fitted on scaled data back to original units.
  Gmm unscale(const Gmm& scaled) const;
  double log_jacobian() const;  // sum log scale
};

struct EmOptions {
  std::size_t k = 5;
  std::uint64_t seed = 0;
  std::size_t max_iter = 200;
  double tol = 1e-6;  // relative change of the mean log-likelihood
};

struct EmResult {
  Gmm model;                        // original units
  Scaler scaler;
  std::vector<double> loglik_trace;  // mean per-row log-likelihood, scaled space
  std::size_t iterations = 0;
  bool converged = false;
  double total_loglik = 0.0;  // original units
  double regularization = 0.0;
  std::vector<std::size_t> labels;  // argmax responsibility per row
};

/// EM with k-means++ seeding on z-scored features. Every M-step adds
/// eps I to each covariance, eps = 1e-6 x mean diagonal variance.
EmResult fit_em(const Matrix& data, const FeatureLayout& layout, const EmOptions& options);

std::size_t free_parameters(std::size_t k, std::size_t d);
double bic(double total_loglik, std::size_t k, std::size_t d, std::size_t n);

struct Selection {
  std::size_t k = 0;
  EmResult fit;
  std::vector<std::pair<std::size_t, double>> bic_by_k;
};

/// Fits every K in [k_min, k_max] (seeds derived per K) and keeps the lowest
/// BIC; ties go to the smaller K. Falls back to K = min(5, rows) when no
/// candidate in range is feasible.
Selection select_k(const Matrix& data, const FeatureLayout& layout, std::size_t k_min, std::size_t k_max,
                   std::uint64_t seed, const EmOptions& base = {});

/// Serialized joint model plus the windowing it was fitted with.
struct ModelFile {
  Gmm joint;
  Scaler scaler;
  double dt = 0.2;
  double history_s = 1.0;
  double horizon_s = 0.6;
};

void save_model(const std::filesystem::path& path, const ModelFile& model);
ModelFile load_model(const std::filesystem::path& path);

/// CSV with a "# layout: ..." first line and one row per dataset row.
void write_dataset_csv(const std::filesystem::path& path, const Matrix& data, const FeatureLayout& layout);
Matrix read_dataset_csv(const std::filesystem::path& path, FeatureLayout* layout = nullptr);

}  // namespace cfs::gmm
