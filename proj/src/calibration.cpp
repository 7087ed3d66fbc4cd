#include "cfs/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <Eigen/Dense>
#include <json.hpp>

#include "cfs/error.hpp"
#include "cfs/rng.hpp"

namespace cfs::idm {
namespace {

using nlohmann::json;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr const char* kNames[5] = {"v0", "T", "s0", "a_max", "b"};

double& field(IdmParams& p, int i) {
  switch (i) {
    case 0: return p.v0;
    case 1: return p.T;
    case 2: return p.s0;
    case 3: return p.a_max;
    default: return p.b;
  }
}

double field(const IdmParams& p, int i) { return field(const_cast<IdmParams&>(p), i); }

json params_json(const IdmParams& p) {
  json j;
  for (int i = 0; i < 5; ++i) j[kNames[i]] = field(p, i);
  return j;
}

IdmParams params_from(const json& j) {
  IdmParams p;
  for (int i = 0; i < 5; ++i) field(p, i) = j.at(kNames[i]).get<double>();
  return p;
}

struct Observation {
  const TrajectoryPair* pair;
  std::size_t start, steps;
  double gap;
};

class Target {
 public:
  Target(std::vector<Observation> obs, const PriorBox& prior) : obs_(std::move(obs)), prior_(prior) {
    for (int i = 0; i < 5; ++i)
      if (field(prior.hi, i) > field(prior.lo, i)) free_.push_back(i);
  }

  std::size_t dim() const { return free_.size() + 1; }

  IdmParams params(const Eigen::VectorXd& z) const {
    IdmParams p = prior_.lo;
    for (std::size_t k = 0; k < free_.size(); ++k) {
      const int i = free_[k];
      field(p, i) = field(prior_.lo, i) + z(static_cast<Eigen::Index>(k)) * (field(prior_.hi, i) - field(prior_.lo, i));
    }
    return p;
  }

  double sigma(const Eigen::VectorXd& z) const { return std::exp(z(static_cast<Eigen::Index>(free_.size()))); }

  /// Sum of squared spacing residuals; +inf on collision.
  double ssr(const IdmParams& p) const {
    double s = 0.0;
    for (const auto& o : obs_) {
      const double g = rollout_gap(p, *o.pair, o.start, o.steps);
      if (!(g > 0.0)) return std::numeric_limits<double>::infinity();
      s += (g - o.gap) * (g - o.gap);
    }
    return s;
  }

  double log_post(const Eigen::VectorXd& z, double* ssr_out = nullptr) const {
    for (std::size_t k = 0; k < free_.size(); ++k) {
      const double u = z(static_cast<Eigen::Index>(k));
      if (u < 0.0 || u > 1.0) return kNegInf;
    }
    const double log_sigma = z(static_cast<Eigen::Index>(free_.size()));
    const double sigma = std::exp(log_sigma);
    if (!(sigma > 1e-6) || !(sigma < 1e3)) return kNegInf;
    const double r = ssr(params(z));
    if (ssr_out) *ssr_out = r;
    if (!std::isfinite(r)) return kNegInf;
    const double n = static_cast<double>(obs_.size());
    const double s2 = prior_.sigma_scale * prior_.sigma_scale;
    return -0.5 * r / (sigma * sigma) - n * log_sigma - 0.5 * sigma * sigma / s2 + log_sigma;
  }

  std::size_t n_obs() const { return obs_.size(); }

 private:
  std::vector<Observation> obs_;
  PriorBox prior_;
  std::vector<int> free_;
};

double batch_means_var(std::span<const double> x) {
  const std::size_t n = x.size();
  const auto nb = std::max<std::size_t>(2, static_cast<std::size_t>(std::sqrt(static_cast<double>(n))));
  const std::size_t bs = n / nb;
  if (bs == 0) return 0.0;
  double mean = 0.0;
  for (std::size_t i = 0; i < nb * bs; ++i) mean += x[i];
  mean /= static_cast<double>(nb * bs);
  double v = 0.0;
  for (std::size_t b = 0; b < nb; ++b) {
    double m = 0.0;
    for (std::size_t i = 0; i < bs; ++i) m += x[b * bs + i];
    m /= static_cast<double>(bs);
    v += (m - mean) * (m - mean);
  }
  // variance of the batch means times batch size estimates n * var(mean)
  return v / static_cast<double>(nb - 1) * static_cast<double>(bs) / static_cast<double>(n);
}

}  // namespace

void PriorBox::validate() const {
  for (int i = 0; i < 5; ++i) {
    const double a = field(lo, i), b = field(hi, i);
    if (!(a > 0.0) || !std::isfinite(b) || b < a)
      throw ConfigError(std::string("prior box for ") + kNames[i] + " must satisfy 0 < lo <= hi");
  }
  if (!(sigma_scale > 0.0)) throw ConfigError("prior sigma_scale must be > 0");
}

bool PriorBox::contains(const IdmParams& p) const {
  for (int i = 0; i < 5; ++i)
    if (field(p, i) < field(lo, i) || field(p, i) > field(hi, i)) return false;
  return true;
}

IdmParams PriorBox::center() const {
  IdmParams c;
  for (int i = 0; i < 5; ++i) field(c, i) = 0.5 * (field(lo, i) + field(hi, i));
  return c;
}

PriorBox PriorBox::point(const IdmParams& p, double sigma_scale) { return {p, p, sigma_scale}; }

PriorBox PriorBox::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open prior file " + path.string());
  PriorBox box;
  try {
    const json j = json::parse(in);
    for (int i = 0; i < 5; ++i) {
      if (!j.contains(kNames[i])) continue;
      const auto r = j.at(kNames[i]).get<std::vector<double>>();
      if (r.size() != 2) throw ConfigError(std::string("prior ") + kNames[i] + " must be [lo, hi]");
      field(box.lo, i) = r[0];
      field(box.hi, i) = r[1];
    }
    box.sigma_scale = j.value("sigma_scale", box.sigma_scale);
  } catch (const json::exception& e) {
    throw ConfigError("prior file " + path.string() + ": " + e.what());
  }
  box.validate();
  return box;
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Interactive: return "interactive";
    case Provenance::NonInteractive: return "non_interactive";
    case Provenance::Random: return "random";
    default: return "custom";
  }
}

Provenance parse_provenance(const std::string& s) {
  if (s == "int" || s == "interactive") return Provenance::Interactive;
  if (s == "non" || s == "non_interactive") return Provenance::NonInteractive;
  if (s == "rand" || s == "random") return Provenance::Random;
  if (s == "custom") return Provenance::Custom;
  throw ArgumentError("unknown split '" + s + "' (expected int, non or rand)");
}

IdmParams IdmPosterior::mean() const {
  if (draws.empty()) throw ArgumentError("posterior has no draws");
  IdmParams m{0, 0, 0, 0, 0};
  for (const auto& d : draws)
    for (int i = 0; i < 5; ++i) field(m, i) += field(d, i);
  for (int i = 0; i < 5; ++i) field(m, i) /= static_cast<double>(draws.size());
  return m;
}

std::pair<IdmParams, IdmParams> IdmPosterior::credible_box(double level) const {
  if (draws.empty()) throw ArgumentError("posterior has no draws");
  IdmParams lo, hi;
  const double tail = 0.5 * (1.0 - level);
  for (int i = 0; i < 5; ++i) {
    std::vector<double> v;
    for (const auto& d : draws) v.push_back(field(d, i));
    std::sort(v.begin(), v.end());
    const auto at = [&](double q) {
      const auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(v.size() - 1) + 0.5));
      return v[std::min(idx, v.size() - 1)];
    };
    field(lo, i) = at(tail);
    field(hi, i) = at(1.0 - tail);
  }
  return {lo, hi};
}

void save_posterior(const std::filesystem::path& path, const IdmPosterior& post) {
  json j;
  j["version"] = 1;
  j["provenance"] = to_string(post.provenance);
  j["acceptance_rate"] = post.acceptance_rate;
  j["sigma_obs"] = post.sigma_obs;
  j["n_observations"] = post.n_observations;
  j["warnings"] = post.warnings;
  json prior = {{"sigma_scale", post.prior.sigma_scale}};
  for (int i = 0; i < 5; ++i) prior[kNames[i]] = {field(post.prior.lo, i), field(post.prior.hi, i)};
  j["prior"] = prior;
  j["mcmc"] = {{"iterations", post.options.iterations}, {"burn_in", post.options.burn_in},
               {"thin", post.options.thin},             {"seed", post.options.seed},
               {"rollout_steps", post.options.rollout_steps}, {"target_accept", post.options.target_accept}};
  json draws = json::array();
  for (std::size_t k = 0; k < post.draws.size(); ++k) {
    json d = params_json(post.draws[k]);
    if (k < post.sigma_draws.size()) d["sigma"] = post.sigma_draws[k];
    draws.push_back(d);
  }
  j["draws"] = draws;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write posterior file " + path.string());
  out << j.dump(1) << '\n';
}

IdmPosterior load_posterior(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open posterior file " + path.string());
  try {
    const json j = json::parse(in);
    IdmPosterior p;
    p.provenance = parse_provenance(j.at("provenance").get<std::string>());
    p.acceptance_rate = j.value("acceptance_rate", 0.0);
    p.sigma_obs = j.value("sigma_obs", 0.0);
    p.n_observations = j.value("n_observations", std::size_t{0});
    p.warnings = j.value("warnings", std::vector<std::string>{});
    if (j.contains("prior")) {
      const auto& jp = j.at("prior");
      for (int i = 0; i < 5; ++i) {
        const auto r = jp.at(kNames[i]).get<std::vector<double>>();
        field(p.prior.lo, i) = r.at(0);
        field(p.prior.hi, i) = r.at(1);
      }
      p.prior.sigma_scale = jp.value("sigma_scale", 1.0);
    }
    if (j.contains("mcmc")) {
      const auto& m = j.at("mcmc");
      p.options.iterations = m.value("iterations", p.options.iterations);
      p.options.burn_in = m.value("burn_in", p.options.burn_in);
      p.options.thin = m.value("thin", p.options.thin);
      p.options.seed = m.value("seed", p.options.seed);
      p.options.rollout_steps = m.value("rollout_steps", p.options.rollout_steps);
      p.options.target_accept = m.value("target_accept", p.options.target_accept);
    }
    for (const auto& d : j.at("draws")) {
      p.draws.push_back(params_from(d));
      validate(p.draws.back());
      if (d.contains("sigma")) p.sigma_draws.push_back(d.at("sigma").get<double>());
    }
    if (p.draws.empty()) throw ConfigError("posterior file " + path.string() + " has no draws");
    return p;
  } catch (const json::exception& e) {
    throw ConfigError("posterior file " + path.string() + ": " + e.what());
  } catch (const ArgumentError& e) {
    throw ConfigError("posterior file " + path.string() + ": " + e.what());
  }
}

double rollout_gap(const IdmParams& p, const TrajectoryPair& pair, std::size_t start, std::size_t steps) {
  if (start + steps >= pair.size()) throw ArgumentError("rollout_gap: rollout runs past the end of " + pair.pair_id);
  FollowerState s{pair.follower[start].x, pair.follower[start].v};
  const double len = pair.leader_length;
  for (std::size_t k = 0; k < steps; ++k) {
    const auto& l = pair.leader[start + k];
    const double gap = l.x - len - s.x;
    if (!(gap > 0.0)) return gap;
    s = integrate(s, clamp_accel(idm_accel(p, s.v, s.v - l.v, gap)), pair.dt);
  }
  return pair.leader[start + steps].x - len - s.x;
}

IdmPosterior calibrate(std::span<const CalibrationSubset> data, const PriorBox& prior, const McmcOptions& options,
                       Provenance provenance) {
  prior.validate();
  if (options.iterations <= options.burn_in) throw ArgumentError("calibrate: iterations must exceed burn-in");
  if (options.thin == 0) throw ArgumentError("calibrate: thin must be >= 1");
  if (options.rollout_steps == 0) throw ArgumentError("calibrate: rollout_steps must be >= 1");

  std::vector<Observation> obs;
  for (const auto& sub : data) {
    for (std::size_t i : sub.indices) {
      if (i >= sub.pair.size()) throw ArgumentError("calibrate: index " + std::to_string(i) + " outside " + sub.pair.pair_id);
      const std::size_t h = std::min(options.rollout_steps, sub.pair.size() - 1 - i);
      if (h == 0) continue;
      obs.push_back({&sub.pair, i, h, sub.pair.dx(i + h)});
    }
  }
  if (obs.empty()) throw ArgumentError("calibrate: empty calibration subset");

  const Target target(std::move(obs), prior);
  const auto dim = static_cast<Eigen::Index>(target.dim());
  const Eigen::Index nfree = dim - 1;
  Rng rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Start from the best of a few prior draws, with sigma at its conditional optimum.
  Eigen::VectorXd z = Eigen::VectorXd::Constant(dim, 0.5);
  {
    double best = std::numeric_limits<double>::infinity();
    Eigen::VectorXd cand = z;
    for (int c = 0; c < 256; ++c) {
      for (Eigen::Index k = 0; k < nfree; ++k) cand(k) = c == 0 ? 0.5 : unit(rng);
      const double r = target.ssr(target.params(cand));
      if (r < best) {
        best = r;
        z = cand;
      }
    }
    const double s = std::isfinite(best) ? std::sqrt(best / static_cast<double>(target.n_obs())) : prior.sigma_scale;
    z(nfree) = std::log(std::clamp(s, 1e-3, 10.0 * prior.sigma_scale));
  }
  double lp = target.log_post(z);

  Eigen::MatrixXd chol = Eigen::MatrixXd::Identity(dim, dim) * 0.02;
  chol(nfree, nfree) = 0.1;
  double log_scale = 0.0;
  std::vector<Eigen::VectorXd> history;
  history.reserve(options.burn_in);

  IdmPosterior post;
  post.provenance = provenance;
  post.prior = prior;
  post.options = options;
  post.n_observations = target.n_obs();

  std::size_t accepted_window = 0, accepted_after = 0;
  Eigen::VectorXd eps(dim);
  for (std::size_t it = 0; it < options.iterations; ++it) {
    for (Eigen::Index k = 0; k < dim; ++k) eps(k) = normal(rng);
    const Eigen::VectorXd prop = z + std::exp(log_scale) * (chol * eps);
    const double lp_new = target.log_post(prop);
    const bool accept = std::log(unit(rng)) < lp_new - lp;
    if (accept) {
      z = prop;
      lp = lp_new;
    }
    if (it < options.burn_in) {
      accepted_window += accept;
      history.push_back(z);
      if ((it + 1) % 100 == 0) {
        const double rate = static_cast<double>(accepted_window) / 100.0;
        log_scale += (rate - options.target_accept) * 2.0 / std::sqrt(static_cast<double>(it + 1) / 100.0);
        accepted_window = 0;
      }
      // Proposal covariance from the second half of the burn-in history so far;
      // the last fifth of burn-in only tunes the scale.
      if ((it + 1) % 500 == 0 && history.size() >= 1000 && 5 * (it + 1) <= 4 * options.burn_in) {
        const std::size_t from = history.size() / 2;
        Eigen::MatrixXd X(static_cast<Eigen::Index>(history.size() - from), dim);
        for (std::size_t r = from; r < history.size(); ++r) X.row(static_cast<Eigen::Index>(r - from)) = history[r].transpose();
        const Eigen::RowVectorXd mu = X.colwise().mean();
        const Eigen::MatrixXd Xc = X.rowwise() - mu;
        Eigen::MatrixXd cov = (Xc.transpose() * Xc) / static_cast<double>(X.rows() - 1);
        cov += 1e-12 * Eigen::MatrixXd::Identity(dim, dim);
        Eigen::LLT<Eigen::MatrixXd> llt(cov * (2.38 * 2.38 / static_cast<double>(dim)));
        if (llt.info() == Eigen::Success && cov.diagonal().minCoeff() > 1e-14) {
          chol = llt.matrixL();
          log_scale = 0.0;
        }
      }
    } else {
      accepted_after += accept;
      if ((it - options.burn_in) % options.thin == 0) {
        post.draws.push_back(target.params(z));
        post.sigma_draws.push_back(target.sigma(z));
      }
    }
  }

  post.acceptance_rate = static_cast<double>(accepted_after) / static_cast<double>(options.iterations - options.burn_in);
  double s = 0.0;
  for (double v : post.sigma_draws) s += v;
  post.sigma_obs = s / static_cast<double>(post.sigma_draws.size());
  if (nfree > 0 && (post.acceptance_rate < 0.05 || post.acceptance_rate > 0.7)) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "acceptance rate %.3f outside [0.05, 0.7]", post.acceptance_rate);
    post.warnings.emplace_back(buf);
  }
  for (int i = 0; i < 5; ++i) {
    if (field(prior.lo, i) == field(prior.hi, i)) continue;
    std::vector<double> chain;
    for (const auto& d : post.draws) chain.push_back(field(d, i));
    const double zg = geweke_z(chain);
    if (std::abs(zg) > 3.0) post.warnings.push_back(std::string("Geweke |z| > 3 for ") + kNames[i]);
  }
  return post;
}

double geweke_z(std::span<const double> chain, double first, double last) {
  const std::size_t n = chain.size();
  const auto na = static_cast<std::size_t>(first * static_cast<double>(n));
  const auto nb = static_cast<std::size_t>(last * static_cast<double>(n));
  if (na < 4 || nb < 4 || na + nb > n) throw ArgumentError("geweke_z: chain too short for the requested windows");
  const auto a = chain.subspan(0, na);
  const auto b = chain.subspan(n - nb, nb);
  double ma = 0.0, mb = 0.0;
  for (double v : a) ma += v;
  for (double v : b) mb += v;
  ma /= static_cast<double>(na);
  mb /= static_cast<double>(nb);
  const double var = batch_means_var(a) + batch_means_var(b);
  if (var <= 0.0) return ma == mb ? 0.0 : std::numeric_limits<double>::infinity();
  return (ma - mb) / std::sqrt(var);
}

std::vector<CalibrationSubset> policy_subsets(std::span<const TrajectoryPair> corpus,
                                              std::span<const interaction::IntensitySeries> series,
                                              const PolicyFractions& fractions, Provenance which, std::uint64_t seed) {
  if (corpus.size() != series.size()) throw ArgumentError("policy_subsets: one intensity series per pair required");
  std::vector<CalibrationSubset> out;
  for (std::size_t p = 0; p < corpus.size(); ++p) {
    if (corpus[p].pair_id != series[p].pair_id)
      throw ArgumentError("policy_subsets: series " + series[p].pair_id + " does not belong to pair " + corpus[p].pair_id);
    if (series[p].size() == 0) continue;
    const auto split = interaction::split_by_intensity(series[p].values, fractions.interactive, fractions.non_interactive,
                                                       fractions.random, mix_seed(seed, hash_string(corpus[p].pair_id)));
    const auto& pos = which == Provenance::Interactive      ? split.interactive
                      : which == Provenance::NonInteractive ? split.non_interactive
                                                            : split.random;
    CalibrationSubset sub{corpus[p], {}};
    for (std::size_t k : pos) sub.indices.push_back(series[p].index[k]);
    if (!sub.indices.empty()) out.push_back(std::move(sub));
  }
  if (out.empty()) throw ArgumentError("policy_subsets: " + to_string(which) + " split is empty");
  return out;
}

PolicySet make_policies(std::span<const TrajectoryPair> corpus, std::span<const interaction::IntensitySeries> series,
                        const PolicyFractions& fractions, const PriorBox& prior, const McmcOptions& options) {
  PolicySet set;
  const std::pair<Provenance, IdmPosterior*> jobs[] = {{Provenance::Interactive, &set.interactive},
                                                       {Provenance::NonInteractive, &set.non_interactive},
                                                       {Provenance::Random, &set.random}};
  for (const auto& [prov, dest] : jobs) {
    const auto subsets = policy_subsets(corpus, series, fractions, prov, options.seed);
    McmcOptions opt = options;
    opt.seed = mix_seed(options.seed, static_cast<std::uint64_t>(prov) + 1);
    *dest = calibrate(subsets, prior, opt, prov);
  }
  return set;
}

}  // namespace cfs::idm
