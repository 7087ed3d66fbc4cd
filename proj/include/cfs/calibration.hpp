#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cfs/idm.hpp"
#include "cfs/interaction.hpp"
#include "cfs/trajectory.hpp"

namespace cfs::idm {

/// Independent uniform priors on each IDM parameter plus a half-normal
/// prior (scale sigma_scale, metres) on the spacing noise.
struct PriorBox {
  IdmParams lo{20.0, 0.5, 0.5, 0.3, 0.5};
  IdmParams hi{45.0, 3.0, 6.0, 3.0, 4.0};
  double sigma_scale = 1.0;

  void validate() const;
  bool contains(const IdmParams& p) const;
  IdmParams center() const;
  /// A box collapsed onto p.
  static PriorBox point(const IdmParams& p, double sigma_scale = 1.0);
  static PriorBox from_json_file(const std::filesystem::path& path);
};

struct McmcOptions {
  std::size_t iterations = 20000;
  std::size_t burn_in = 5000;
  std::size_t thin = 10;
  std::uint64_t seed = 0;
  /// Open-loop IDM steps from the observed state at each selected index to
  /// the spacing that enters the likelihood. 1 is a one-step prediction.
  std::size_t rollout_steps = 15;
  double target_accept = 0.25;
};

/// A pair with the decision indices selected for calibration.
struct CalibrationSubset {
  TrajectoryPair pair;
  std::vector<std::size_t> indices;
};

enum class Provenance { Interactive, NonInteractive, Random, Custom };

std::string to_string(Provenance p);
Provenance parse_provenance(const std::string& s);  // int|non|rand|custom or long names

struct IdmPosterior {
  std::vector<IdmParams> draws;
  std::vector<double> sigma_draws;
  double sigma_obs = 0.0;  // posterior mean
  Provenance provenance = Provenance::Custom;
  double acceptance_rate = 0.0;  // after burn-in
  std::size_t n_observations = 0;
  std::vector<std::string> warnings;
  PriorBox prior;
  McmcOptions options;

  IdmParams mean() const;
  /// Central credible interval per parameter, e.g. level 0.9 -> 5 % .. 95 %.
  std::pair<IdmParams, IdmParams> credible_box(double level) const;
};

void save_posterior(const std::filesystem::path& path, const IdmPosterior& post);
IdmPosterior load_posterior(const std::filesystem::path& path);

/// Gap at the end of an open-loop rollout of `steps` IDM steps from the
/// follower's observed state at `start`, against the replayed leader.
/// Returns a non-positive value if the rollout collides.
double rollout_gap(const IdmParams& p, const TrajectoryPair& pair, std::size_t start, std::size_t steps);

/// Adaptive random-walk Metropolis-Hastings over the box-normalised IDM
/// parameters and log sigma_obs. The proposal covariance adapts during
/// burn-in only. Deterministic given options.seed.
IdmPosterior calibrate(std::span<const CalibrationSubset> data, const PriorBox& prior, const McmcOptions& options,
                       Provenance provenance = Provenance::Custom);

/// Geweke z-score comparing the first `first` and last `last` fractions of
/// a chain, variances by batch means.
double geweke_z(std::span<const double> chain, double first = 0.1, double last = 0.5);

struct PolicyFractions {
  double interactive = 0.03;
  double non_interactive = 0.03;
  double random = 0.06;
};

struct PolicySet {
  IdmPosterior interactive, non_interactive, random;
};

/// Splits every pair's intensity series by the given fractions and
/// calibrates one posterior per split with identical prior and MCMC
/// settings. Chains use seeds derived from options.seed.
PolicySet make_policies(std::span<const TrajectoryPair> corpus, std::span<const interaction::IntensitySeries> series,
                        const PolicyFractions& fractions, const PriorBox& prior, const McmcOptions& options);

/// The per-pair subsets make_policies calibrates on, for one provenance.
std::vector<CalibrationSubset> policy_subsets(std::span<const TrajectoryPair> corpus,
                                              std::span<const interaction::IntensitySeries> series,
                                              const PolicyFractions& fractions, Provenance which, std::uint64_t seed);

}  // namespace cfs::idm
