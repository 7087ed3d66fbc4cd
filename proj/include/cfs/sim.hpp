#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cfs/calibration.hpp"
#include "cfs/interaction.hpp"
#include "cfs/switching.hpp"
#include "cfs/trajectory.hpp"

namespace cfs::sim {

enum class PolicyKind { Int, Non, Rand, SwitchHard, SwitchSoft };

std::string to_string(PolicyKind k);  // int, non, rand, switch_hard, switch_soft
PolicyKind parse_policy(const std::string& s);
bool is_switching(PolicyKind k) noexcept;

/// Posterior bags the policies draw from. Switching policies need the
/// interactive and non-interactive ones.
struct PolicyLibrary {
  const idm::IdmPosterior* interactive = nullptr;
  const idm::IdmPosterior* non_interactive = nullptr;
  const idm::IdmPosterior* random = nullptr;

  /// Throws ConfigError naming the missing posterior.
  void require(PolicyKind k) const;
};

/// The parameter sets used by one run.
struct Realization {
  PolicyKind kind = PolicyKind::Non;
  idm::IdmParams single;       // int / non / rand
  idm::IdmParams interactive;  // switching
  idm::IdmParams non_interactive;
};

/// One draw per posterior from streams of run_seed: interactive 1,
/// non-interactive 2, random 3. A non run and a switching run with the
/// same seed therefore share the non-interactive draw.
Realization realize(const PolicyLibrary& lib, PolicyKind kind, std::uint64_t run_seed);

struct SimConfig {
  PolicyKind policy = PolicyKind::SwitchSoft;
  std::size_t n_runs = 20;
  std::uint64_t seed = 0;
  interaction::Metric metric = interaction::Metric::JS;
  std::size_t mc_samples = 2000;  // per online JS evaluation
  switching::SwitchConfig switch_config;
  bool record_intensity = false;  // also evaluate intensity for non-switching policies
};

struct Episode {
  std::vector<TrajectorySample> follower;  // simulated, aligned with the leader
  std::vector<double> dx;
  std::vector<double> intensity;  // 0 until a full history window exists
  std::vector<double> w_int;
  bool collided = false;
  std::size_t collision_step = 0;
  Realization realization;
};

/// Closed loop against the replayed leader, starting from the human
/// follower's first sample. The online window at step k covers the H
/// simulated samples before k. A non-positive gap ends the episode.
Episode run_episode(const TrajectoryPair& pair, const Realization& policy, const interaction::IntensityModel* model,
                    const SimConfig& cfg, std::uint64_t run_seed);

/// RMSE of the gap over the overlapping prefix. Throws NumericError when
/// the overlap is empty.
double rmse_dx(std::span<const double> dx_sim, const TrajectoryPair& human);

/// One-sided: only steps where the simulation is closer than the human count.
double rmse_safe(std::span<const double> dx_sim, const TrajectoryPair& human);

/// mix_seed(seed, hash(pair_id), run).
std::uint64_t run_seed(std::uint64_t seed, const std::string& pair_id, std::size_t run);

struct SimResult {
  std::string pair_id;
  PolicyKind policy = PolicyKind::Non;
  std::vector<Episode> runs;
  std::vector<double> rmse_dx, rmse_safe;
  double rmse_dx_mean = 0.0, rmse_dx_std = 0.0;
  double rmse_safe_mean = 0.0, rmse_safe_std = 0.0;
  std::size_t collisions = 0;
  double mean_spacing = 0.0;  // over all simulated steps of all runs
};

/// The switch mode follows cfg.policy (switch_hard or switch_soft); i0 and
/// beta come from cfg.switch_config.
SimResult simulate(const TrajectoryPair& pair, const PolicyLibrary& lib, const interaction::IntensityModel* model,
                   const SimConfig& cfg);

/// Every pair x policy, cfg.policy ignored.
std::vector<SimResult> evaluate(std::span<const TrajectoryPair> pairs, std::span<const PolicyKind> policies,
                                const PolicyLibrary& lib, const interaction::IntensityModel* model, const SimConfig& cfg);

inline constexpr const char* kResultsHeader =
    "pair_id,policy,rmse_dx_mean,rmse_dx_std,rmse_safe_mean,rmse_safe_std,collisions";

void write_results_csv(const std::filesystem::path& path, std::span<const SimResult> results);

/// Pairs as rows, policies as columns; '*' marks each pair's lowest mean.
std::string format_table(std::span<const SimResult> results);

/// Per-run samples: run,t,x_lead,x_foll,v_foll,a_foll,dx,dx_human,intensity,w_int.
void write_runs_csv(const std::filesystem::path& path, const SimResult& result, const TrajectoryPair& pair);

}  // namespace cfs::sim
