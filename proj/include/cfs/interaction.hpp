#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfs/gmm.hpp"
#include "cfs/trajectory.hpp"

namespace cfs::interaction {

using gmm::Gmm;
using gmm::Matrix;
using gmm::Vector;

/// W2 between two Gaussians: sqrt(|mu1 - mu2|^2 + B), with the Bures term
/// B computed through symmetric eigendecompositions. Negative B within
/// 1e-8 (relative to the trace scale) is clamped to 0; non-SPD input and
/// larger negative B throw NumericError.
double gaussian_w2(const Vector& mu1, const Matrix& cov1, const Vector& mu2, const Matrix& cov2);

/// Squared W2 between component i of f and component j of g.
Matrix w2_cost_matrix(const Gmm& f, const Gmm& g);

/// Mixture W2: square root of the optimal transport cost between the
/// component weights under the squared Gaussian W2 cost.
double mixture_w2(const Gmm& f, const Gmm& g);

struct McEstimate {
  double value = 0.0;   // clamped
  double raw = 0.0;     // before clamping
  double std_error = 0.0;  // of the mean
};

/// KL(f || g) from n draws of f: mean of log f - log g. Clamped at 0.
McEstimate kl_mc(const Gmm& f, const Gmm& g, std::size_t n, std::uint64_t seed);

/// (KL(f || h) + KL(g || h)) / 2, h = (f + g) / 2 evaluated pointwise.
/// f draws come from seed_f, g draws from seed_g; swapping both the models
/// and the seeds gives a bit-identical result. Clamped to [0, ln 2].
McEstimate js_divergence(const Gmm& f, const Gmm& g, std::size_t n, std::uint64_t seed_f, std::uint64_t seed_g);

/// Same, with both streams derived from one seed.
McEstimate js_divergence(const Gmm& f, const Gmm& g, std::size_t n, std::uint64_t seed);

enum class Metric { JS, W2 };

std::string to_string(Metric m);
Metric parse_metric(const std::string& s);

inline constexpr std::size_t kDefaultMcSamples = 20000;

/// Conditional model f (given the full window) and marginal model g (leader
/// blocks dropped, given the follower's own history) derived once from a
/// joint car-following model.
class IntensityModel {
 public:
  explicit IntensityModel(const Gmm& joint);

  std::size_t history() const noexcept { return history_; }
  std::size_t horizon() const noexcept { return horizon_; }
  const FeatureLayout& layout() const noexcept { return layout_; }

  Gmm conditional(const gmm::FeatureWindow& w) const;
  Gmm marginal(const gmm::FeatureWindow& w) const;

  double evaluate(const gmm::FeatureWindow& w, Metric metric, std::size_t n, std::uint64_t seed) const;

 private:
  FeatureLayout layout_;
  std::size_t history_ = 0, horizon_ = 0;
  std::vector<std::string> full_obs_, self_obs_;
  gmm::Conditioner f_;
  gmm::Conditioner g_;
};

struct IntensitySeries {
  std::string pair_id;
  Metric metric = Metric::JS;
  std::vector<std::size_t> index;  // decision sample (last history sample) in the pair
  std::vector<double> t;
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
};

/// One value per window position; step j uses seed mix_seed(seed, j).
IntensitySeries intensity_series(const IntensityModel& model, const TrajectoryPair& pair, Metric metric,
                                 std::size_t n, std::uint64_t seed);

struct SampleSplit {
  std::vector<std::size_t> interactive;      // positions into the series
  std::vector<std::size_t> non_interactive;
  std::vector<std::size_t> random;
  double frac_int = 0.0, frac_non = 0.0, frac_rand = 0.0;
};

/// Top / bottom ceil(frac * N) positions by intensity (ties to the earlier
/// position; the bottom set excludes the top set) plus a seeded uniform
/// sample without replacement. All lists are returned sorted.
SampleSplit split_by_intensity(const std::vector<double>& values, double frac_int, double frac_non, double frac_rand,
                               std::uint64_t seed);

}  // namespace cfs::interaction
