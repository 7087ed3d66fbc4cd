#include "cfs/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "cfs/error.hpp"
#include "cfs/rng.hpp"
#include "cfs/stats.hpp"

namespace cfs::sim {
namespace {

const idm::IdmParams& draw(const idm::IdmPosterior& post, std::uint64_t run_seed, std::uint64_t stream) {
  Rng rng = make_rng(run_seed, stream);
  return post.draws[static_cast<std::size_t>(rng() % post.draws.size())];
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

std::string to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::Int: return "int";
    case PolicyKind::Non: return "non";
    case PolicyKind::Rand: return "rand";
    case PolicyKind::SwitchHard: return "switch_hard";
    default: return "switch_soft";
  }
}

PolicyKind parse_policy(const std::string& s) {
  if (s == "int") return PolicyKind::Int;
  if (s == "non") return PolicyKind::Non;
  if (s == "rand") return PolicyKind::Rand;
  if (s == "switch_hard") return PolicyKind::SwitchHard;
  if (s == "switch_soft" || s == "switch") return PolicyKind::SwitchSoft;
  throw ArgumentError("unknown policy '" + s + "' (expected int, non, rand, switch_hard or switch_soft)");
}

bool is_switching(PolicyKind k) noexcept { return k == PolicyKind::SwitchHard || k == PolicyKind::SwitchSoft; }

void PolicyLibrary::require(PolicyKind k) const {
  const auto need = [](const idm::IdmPosterior* p, const char* name) {
    if (!p) throw ConfigError(std::string("missing ") + name + " posterior");
    if (p->draws.empty()) throw ConfigError(std::string(name) + " posterior has no draws");
  };
  switch (k) {
    case PolicyKind::Int: need(interactive, "interactive"); break;
    case PolicyKind::Non: need(non_interactive, "non-interactive"); break;
    case PolicyKind::Rand: need(random, "random"); break;
    default:
      need(interactive, "interactive");
      need(non_interactive, "non-interactive");
  }
}

Realization realize(const PolicyLibrary& lib, PolicyKind kind, std::uint64_t seed) {
  lib.require(kind);
  Realization r;
  r.kind = kind;
  switch (kind) {
    case PolicyKind::Int: r.single = r.interactive = draw(*lib.interactive, seed, 1); break;
    case PolicyKind::Non: r.single = r.non_interactive = draw(*lib.non_interactive, seed, 2); break;
    case PolicyKind::Rand: r.single = draw(*lib.random, seed, 3); break;
    default:
      r.interactive = draw(*lib.interactive, seed, 1);
      r.non_interactive = r.single = draw(*lib.non_interactive, seed, 2);
  }
  return r;
}

Episode run_episode(const TrajectoryPair& pair, const Realization& policy, const interaction::IntensityModel* model,
                    const SimConfig& cfg, std::uint64_t seed) {
  const bool switching = is_switching(policy.kind);
  const bool want_intensity = switching || cfg.record_intensity;
  if (want_intensity && !model) throw ConfigError("simulation: intensity model required for " + to_string(policy.kind));
  if (switching) cfg.switch_config.validate();
  if (pair.size() == 0) throw ArgumentError("simulation: empty pair " + pair.pair_id);

  Episode ep;
  ep.realization = policy;
  const std::size_t n = pair.size();
  const std::size_t h = model ? model->history() : 0;
  idm::FollowerState s{pair.follower[0].x, pair.follower[0].v};
  gmm::FeatureWindow w;

  for (std::size_t k = 0; k < n; ++k) {
    const auto& lead = pair.leader[k];
    const double gap = lead.x - pair.leader_length - s.x;
    if (!(gap > 0.0)) {
      ep.collided = true;
      ep.collision_step = k;
      break;
    }

    double intensity = 0.0;
    if (want_intensity && k >= h) {
      w.a_hist.clear();
      w.v_foll.clear();
      w.dv.clear();
      w.dx.clear();
      for (std::size_t i = k - h; i < k; ++i) {
        w.a_hist.push_back(ep.follower[i].a);
        w.v_foll.push_back(ep.follower[i].v);
        w.dv.push_back(pair.leader[i].v - ep.follower[i].v);
        w.dx.push_back(ep.dx[i]);
      }
      intensity = model->evaluate(w, cfg.metric, cfg.mc_samples, mix_seed(seed, 4, k));
    }

    const double approach = s.v - lead.v;
    double a = 0.0, w_int = 0.0;
    if (switching) {
      const auto b = switching::blend(intensity, cfg.switch_config);
      w_int = b.w_int;
      // Only the policies that carry weight are evaluated.
      const double a_int = b.w_int > 0.0 ? idm::idm_accel(policy.interactive, s.v, approach, gap) : 0.0;
      const double a_non = b.w_int < 1.0 ? idm::idm_accel(policy.non_interactive, s.v, approach, gap) : 0.0;
      a = switching::blended_accel(b, a_int, a_non);
    } else {
      a = idm::idm_accel(policy.single, s.v, approach, gap);
      w_int = policy.kind == PolicyKind::Int ? 1.0 : 0.0;
    }
    a = idm::clamp_accel(a);

    ep.follower.push_back({lead.t, s.x, s.v, a});
    ep.dx.push_back(gap);
    ep.intensity.push_back(intensity);
    ep.w_int.push_back(w_int);
    s = idm::integrate(s, a, pair.dt);
  }
  return ep;
}

double rmse_dx(std::span<const double> dx_sim, const TrajectoryPair& human) {
  const std::size_t n = std::min(dx_sim.size(), human.size());
  if (n == 0) throw NumericError("rmse_dx: empty overlap for " + human.pair_id);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = dx_sim[i] - human.dx(i);
    s += e * e;
  }
  return std::sqrt(s / static_cast<double>(n));
}

double rmse_safe(std::span<const double> dx_sim, const TrajectoryPair& human) {
  const std::size_t n = std::min(dx_sim.size(), human.size());
  if (n == 0) throw NumericError("rmse_safe: empty overlap for " + human.pair_id);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = std::max(0.0, human.dx(i) - dx_sim[i]);
    s += e * e;
  }
  return std::sqrt(s / static_cast<double>(n));
}

std::uint64_t run_seed(std::uint64_t seed, const std::string& pair_id, std::size_t run) {
  return mix_seed(seed, hash_string(pair_id), run);
}

SimResult simulate(const TrajectoryPair& pair, const PolicyLibrary& lib, const interaction::IntensityModel* model,
                   const SimConfig& cfg) {
  if (cfg.n_runs == 0) throw ArgumentError("simulation: n_runs must be >= 1");
  lib.require(cfg.policy);
  SimConfig c = cfg;
  if (cfg.policy == PolicyKind::SwitchHard) c.switch_config.mode = switching::Mode::Hard;
  if (cfg.policy == PolicyKind::SwitchSoft) c.switch_config.mode = switching::Mode::Soft;
  SimResult res;
  res.pair_id = pair.pair_id;
  res.policy = cfg.policy;
  double spacing = 0.0;
  std::size_t steps = 0;
  for (std::size_t r = 0; r < cfg.n_runs; ++r) {
    const std::uint64_t rs = run_seed(cfg.seed, pair.pair_id, r);
    Episode ep = run_episode(pair, realize(lib, cfg.policy, rs), model, c, rs);
    if (ep.dx.empty()) throw NumericError("simulation: " + pair.pair_id + " starts in collision");
    res.rmse_dx.push_back(rmse_dx(ep.dx, pair));
    res.rmse_safe.push_back(rmse_safe(ep.dx, pair));
    res.collisions += ep.collided;
    for (double d : ep.dx) spacing += d;
    steps += ep.dx.size();
    res.runs.push_back(std::move(ep));
  }
  res.rmse_dx_mean = stats::mean(res.rmse_dx);
  res.rmse_dx_std = stats::stddev(res.rmse_dx);
  res.rmse_safe_mean = stats::mean(res.rmse_safe);
  res.rmse_safe_std = stats::stddev(res.rmse_safe);
  res.mean_spacing = spacing / static_cast<double>(steps);
  return res;
}

std::vector<SimResult> evaluate(std::span<const TrajectoryPair> pairs, std::span<const PolicyKind> policies,
                                const PolicyLibrary& lib, const interaction::IntensityModel* model, const SimConfig& cfg) {
  for (PolicyKind k : policies) lib.require(k);
  std::vector<SimResult> out;
  for (const auto& pair : pairs)
    for (PolicyKind k : policies) {
      SimConfig c = cfg;
      c.policy = k;
      out.push_back(simulate(pair, lib, model, c));
    }
  return out;
}

void write_results_csv(const std::filesystem::path& path, std::span<const SimResult> results) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << kResultsHeader << '\n';
  for (const auto& r : results) {
    out << r.pair_id << ',' << to_string(r.policy) << ',' << fmt("%.17g", r.rmse_dx_mean) << ',' << fmt("%.17g", r.rmse_dx_std)
        << ',' << fmt("%.17g", r.rmse_safe_mean) << ',' << fmt("%.17g", r.rmse_safe_std) << ',' << r.collisions << '\n';
  }
}

std::string format_table(std::span<const SimResult> results) {
  std::vector<std::string> pairs;
  std::vector<PolicyKind> policies;
  std::map<std::pair<std::string, PolicyKind>, const SimResult*> cell;
  for (const auto& r : results) {
    if (std::find(pairs.begin(), pairs.end(), r.pair_id) == pairs.end()) pairs.push_back(r.pair_id);
    if (std::find(policies.begin(), policies.end(), r.policy) == policies.end()) policies.push_back(r.policy);
    cell[{r.pair_id, r.policy}] = &r;
  }
  std::ostringstream os;
  const auto block = [&](const char* title, auto mean, auto sd) {
    os << title << '\n';
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-16s", "pair");
    os << buf;
    for (PolicyKind k : policies) {
      std::snprintf(buf, sizeof buf, " %17s", to_string(k).c_str());
      os << buf;
    }
    os << '\n';
    for (const auto& p : pairs) {
      double best = std::numeric_limits<double>::infinity();
      for (PolicyKind k : policies)
        if (auto it = cell.find({p, k}); it != cell.end()) best = std::min(best, mean(*it->second));
      std::snprintf(buf, sizeof buf, "%-16s", p.c_str());
      os << buf;
      for (PolicyKind k : policies) {
        auto it = cell.find({p, k});
        if (it == cell.end()) {
          std::snprintf(buf, sizeof buf, " %17s", "-");
        } else {
          const double m = mean(*it->second);
          std::snprintf(buf, sizeof buf, " %7.2f +- %5.2f%c", m, sd(*it->second), m == best ? '*' : ' ');
        }
        os << buf;
      }
      os << '\n';
    }
    os << '\n';
  };
  block("RMSE(dx) [m]", [](const SimResult& r) { return r.rmse_dx_mean; }, [](const SimResult& r) { return r.rmse_dx_std; });
  block("RMSE(safe) [m]", [](const SimResult& r) { return r.rmse_safe_mean; }, [](const SimResult& r) { return r.rmse_safe_std; });
  os << "mean spacing [m]\n";
  for (const auto& p : pairs) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-16s", p.c_str());
    os << buf;
    for (PolicyKind k : policies) {
      auto it = cell.find({p, k});
      std::snprintf(buf, sizeof buf, " %17s", it == cell.end() ? "-" : fmt("%.2f", it->second->mean_spacing).c_str());
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

void write_runs_csv(const std::filesystem::path& path, const SimResult& result, const TrajectoryPair& pair) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "run,t,x_lead,x_foll,v_foll,a_foll,dx,dx_human,intensity,w_int\n";
  for (std::size_t r = 0; r < result.runs.size(); ++r) {
    const auto& ep = result.runs[r];
    for (std::size_t k = 0; k < ep.follower.size(); ++k) {
      const auto& f = ep.follower[k];
      out << r << ',' << fmt("%.17g", f.t) << ',' << fmt("%.17g", pair.leader[k].x) << ',' << fmt("%.17g", f.x) << ','
          << fmt("%.17g", f.v) << ',' << fmt("%.17g", f.a) << ',' << fmt("%.17g", ep.dx[k]) << ','
          << fmt("%.17g", pair.dx(k)) << ',' << fmt("%.17g", ep.intensity[k]) << ',' << fmt("%.17g", ep.w_int[k]) << '\n';
    }
  }
}

}  // namespace cfs::sim
