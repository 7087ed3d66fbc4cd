#include <algorithm>
#include <cmath>
#include <numeric>

#include "cfs/error.hpp"
#include "cfs/interaction.hpp"

namespace cfs::interaction {
namespace {

namespace b = cfs::blocks;

std::vector<std::string> full_observed() { return {b::kAccelHistory, b::kSpeed, b::kRelSpeed, b::kGap}; }
std::vector<std::string> self_observed() { return {b::kAccelHistory, b::kSpeed}; }

const Gmm& checked(const Gmm& joint) {
  const auto& L = joint.layout();
  for (const char* name : {b::kAccelHistory, b::kAccelFuture, b::kSpeed, b::kRelSpeed, b::kGap})
    if (!L.has(name)) throw ArgumentError(std::string("intensity model: joint layout lacks block ") + name);
  if (L.blocks().size() != 5) throw ArgumentError("intensity model: joint layout must hold exactly the car-following blocks");
  return joint;
}

std::size_t ceil_count(double frac, std::size_t n) {
  return std::min(n, static_cast<std::size_t>(std::ceil(frac * static_cast<double>(n) - 1e-9)));
}

}  // namespace

IntensityModel::IntensityModel(const Gmm& joint)
    : layout_(checked(joint).layout()),
      history_(layout_.block(b::kAccelHistory).size),
      horizon_(layout_.block(b::kAccelFuture).size),
      full_obs_(full_observed()),
      self_obs_(self_observed()),
      f_(joint, full_obs_),
      g_(gmm::marginalize(joint, {b::kRelSpeed, b::kGap}), self_obs_) {
  for (const char* name : {b::kSpeed, b::kRelSpeed, b::kGap})
    if (layout_.block(name).size != history_) throw ArgumentError(std::string("intensity model: block ") + name + " must match the history length");
}

Gmm IntensityModel::conditional(const gmm::FeatureWindow& w) const {
  return f_(gmm::observed_vector(w, layout_, full_obs_));
}

Gmm IntensityModel::marginal(const gmm::FeatureWindow& w) const {
  return g_(gmm::observed_vector(w, layout_, self_obs_));
}

double IntensityModel::evaluate(const gmm::FeatureWindow& w, Metric metric, std::size_t n, std::uint64_t seed) const {
  const Gmm f = conditional(w);
  const Gmm g = marginal(w);
  if (metric == Metric::W2) return mixture_w2(f, g);
  return js_divergence(f, g, n, seed).value;
}

IntensitySeries intensity_series(const IntensityModel& model, const TrajectoryPair& pair, Metric metric,
                                 std::size_t n, std::uint64_t seed) {
  IntensitySeries s;
  s.pair_id = pair.pair_id;
  s.metric = metric;
  const std::size_t h = model.history();
  const std::size_t count = gmm::window_count(pair.size(), model.layout());
  for (std::size_t j = 0; j < count; ++j) {
    try {
      const double v = model.evaluate(gmm::window_at(pair, j, h), metric, n, mix_seed(seed, j));
      s.index.push_back(j + h - 1);
      s.t.push_back(pair.follower[j + h - 1].t);
      s.values.push_back(v);
    } catch (const NumericError& e) {
      throw NumericError(pair.pair_id + " timestep " + std::to_string(j + h - 1) + ": " + e.what());
    }
  }
  return s;
}

SampleSplit split_by_intensity(const std::vector<double>& values, double frac_int, double frac_non, double frac_rand,
                               std::uint64_t seed) {
  for (double f : {frac_int, frac_non, frac_rand})
    if (!(f > 0.0 && f <= 1.0)) throw ArgumentError("split_by_intensity: fractions must lie in (0, 1]");
  if (frac_int + frac_non > 1.0 + 1e-12) throw ArgumentError("split_by_intensity: frac_int + frac_non exceeds 1");
  const std::size_t n = values.size();
  SampleSplit s{{}, {}, {}, frac_int, frac_non, frac_rand};
  if (n == 0) return s;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) { return values[a] > values[c]; });
  const std::size_t n_int = ceil_count(frac_int, n);
  std::vector<char> taken(n, 0);
  for (std::size_t i = 0; i < n_int; ++i) {
    s.interactive.push_back(order[i]);
    taken[order[i]] = 1;
  }

  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) { return values[a] < values[c]; });
  const std::size_t n_non = ceil_count(frac_non, n);
  for (std::size_t i = 0; i < n && s.non_interactive.size() < n_non; ++i)
    if (!taken[order[i]]) s.non_interactive.push_back(order[i]);

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  Rng rng(mix_seed(seed, 0x5a3b));
  // Partial Fisher-Yates with an explicit index draw, stable across standard libraries.
  const std::size_t n_rand = ceil_count(frac_rand, n);
  for (std::size_t i = 0; i < n_rand; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
    std::swap(all[i], all[j]);
  }
  s.random.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_rand));

  std::sort(s.interactive.begin(), s.interactive.end());
  std::sort(s.non_interactive.begin(), s.non_interactive.end());
  std::sort(s.random.begin(), s.random.end());
  return s;
}

}  // namespace cfs::interaction
