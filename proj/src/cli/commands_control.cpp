#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include "cfs/error.hpp"
#include "cfs/gmm.hpp"
#include "cfs/ingest.hpp"
#include "cfs/plots.hpp"
#include "cfs/sim.hpp"
#include "internal.hpp"

namespace cfs::cli {
namespace {

struct ControlOpts {
  std::string model;
  std::string posteriors;
  std::string post_int, post_non, post_rand;
  std::string switch_config;
  std::string intensity_dir;
  std::optional<double> i0, beta;
  std::size_t runs = 20;
  std::string metric = "js";
  std::size_t mc_samples = 2000;
  bool record_intensity = false;
};

void add_control_options(CLI::App* sub, ControlOpts& o) {
  sub->add_option("--model", o.model, "fitted model JSON (switching policies)")->check(CLI::ExistingFile);
  sub->add_option("--posteriors", o.posteriors, "directory holding posterior_{int,non,rand}.json");
  sub->add_option("--posterior-int", o.post_int, "interactive posterior JSON");
  sub->add_option("--posterior-non", o.post_non, "non-interactive posterior JSON");
  sub->add_option("--posterior-rand", o.post_rand, "random posterior JSON");
  sub->add_option("--switch-config", o.switch_config, "switch JSON {mode, i0, beta}")->check(CLI::ExistingFile);
  sub->add_option("--intensity-dir", o.intensity_dir, "training intensities for an automatic threshold")
      ->check(CLI::ExistingDirectory);
  sub->add_option("--i0", o.i0, "switching threshold (overrides the switch config)");
  sub->add_option("--beta", o.beta, "soft switch temperature (overrides the switch config)");
  sub->add_option("--runs", o.runs, "runs per pair and policy")->check(CLI::PositiveNumber);
  sub->add_option("--metric", o.metric, "online intensity metric: js | w2")->check(CLI::IsMember({"js", "w2"}));
  sub->add_option("--mc-samples", o.mc_samples, "Monte Carlo samples per online JS evaluation")->check(CLI::PositiveNumber);
  sub->add_flag("--record-intensity", o.record_intensity, "evaluate intensity for non-switching policies too");
}

std::vector<double> pooled_intensities(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<double> pooled;
  for (const auto& f : files) {
    std::ifstream in(f);
    std::string line;
    if (!std::getline(in, line) || line != "t,intensity") throw ParseError(f.string() + ": expected header t,intensity", 1);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto comma = line.find(',');
      try {
        if (comma == std::string::npos) throw std::invalid_argument(line);
        pooled.push_back(std::stod(line.substr(comma + 1)));
      } catch (const std::exception&) {
        throw ParseError(f.string() + ": bad row", lineno);
      }
    }
  }
  return pooled;
}

/// Posteriors, model and switch settings needed by a set of policies.
struct ControlSetup {
  std::optional<idm::IdmPosterior> interactive, non_interactive, random;
  std::optional<interaction::IntensityModel> model;
  sim::PolicyLibrary lib;
  sim::SimConfig cfg;
};

void load_posterior_into(Context& ctx, const std::string& explicit_path, const std::string& dir, const std::string& stem,
                         std::optional<idm::IdmPosterior>& dest) {
  fs::path p = explicit_path;
  if (p.empty()) {
    if (dir.empty()) throw ConfigError("missing " + stem + " posterior: give --posteriors or --posterior-" + stem);
    p = fs::path(dir) / ("posterior_" + stem + ".json");
  }
  if (!fs::exists(p)) throw ConfigError("missing posterior file " + p.string());
  dest = idm::load_posterior(p);
  ctx.note_input(p);
}

void setup(Context& ctx, const ControlOpts& o, const std::vector<sim::PolicyKind>& policies, ControlSetup& s) {
  bool need_int = false, need_non = false, need_rand = false, need_switch = false;
  for (auto k : policies) {
    need_int |= k == sim::PolicyKind::Int || sim::is_switching(k);
    need_non |= k == sim::PolicyKind::Non || sim::is_switching(k);
    need_rand |= k == sim::PolicyKind::Rand;
    need_switch |= sim::is_switching(k);
  }
  if (need_int) load_posterior_into(ctx, o.post_int, o.posteriors, "int", s.interactive);
  if (need_non) load_posterior_into(ctx, o.post_non, o.posteriors, "non", s.non_interactive);
  if (need_rand) load_posterior_into(ctx, o.post_rand, o.posteriors, "rand", s.random);
  s.lib.interactive = s.interactive ? &*s.interactive : nullptr;
  s.lib.non_interactive = s.non_interactive ? &*s.non_interactive : nullptr;
  s.lib.random = s.random ? &*s.random : nullptr;

  s.cfg.n_runs = o.runs;
  s.cfg.seed = ctx.global.seed;
  s.cfg.metric = interaction::parse_metric(o.metric);
  s.cfg.mc_samples = o.mc_samples;
  s.cfg.record_intensity = o.record_intensity;

  if (need_switch || o.record_intensity) {
    if (o.model.empty()) throw ConfigError("switching policies need --model");
    s.model.emplace(gmm::load_model(o.model).joint);
    ctx.note_input(o.model);
  }
  if (need_switch) {
    switching::SwitchSpec spec;
    if (!o.switch_config.empty()) {
      spec = switching::SwitchSpec::from_json_file(o.switch_config);
      ctx.note_input(o.switch_config);
    }
    if (o.i0) spec.i0 = *o.i0;
    if (o.beta) spec.beta = *o.beta;
    std::vector<double> pooled;
    if (!spec.i0) {
      if (o.intensity_dir.empty()) throw ConfigError("automatic threshold needs --intensity-dir (or give --i0)");
      pooled = pooled_intensities(o.intensity_dir);
      ctx.note_input(o.intensity_dir);
    }
    s.cfg.switch_config = spec.resolve(pooled);
    ctx.log("switch: i0=" + format_double(s.cfg.switch_config.i0) + " beta=" + format_double(s.cfg.switch_config.beta));
  }
}

std::vector<sim::PolicyKind> parse_policies(const std::vector<std::string>& names) {
  std::vector<sim::PolicyKind> out;
  for (const auto& n : names) {
    const auto k = sim::parse_policy(n);
    if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
  }
  return out;
}

}  // namespace

Command add_simulate(CLI::App& app) {
  struct Opts : ControlOpts {
    std::string pair;
    std::string policy = "switch_soft";
    bool no_plot = false;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("simulate", "Closed-loop runs of one policy against a recorded leader");
  sub->add_option("--pair", o->pair, "pair CSV")->required()->check(CLI::ExistingFile);
  sub->add_option("--policy", o->policy, "int | non | rand | switch_hard | switch_soft");
  add_control_options(sub, *o);
  sub->add_flag("--no-plot", o->no_plot, "skip the SVG");
  return {sub, [o](Context& ctx) {
            const auto pair = ingest::read_pair_csv(o->pair);
            ctx.note_input(o->pair);
            const auto kind = sim::parse_policy(o->policy);
            ControlSetup s;
            setup(ctx, *o, {kind}, s);
            s.cfg.policy = kind;
            const auto res = sim::simulate(pair, s.lib, s.model ? &*s.model : nullptr, s.cfg);
            const std::string stem = pair.pair_id + "_" + sim::to_string(kind);
            const fs::path runs = ctx.out_path("runs_" + stem + ".csv");
            sim::write_runs_csv(runs, res, pair);
            ctx.note_output(runs);
            const fs::path results = ctx.out_path("results_" + stem + ".csv");
            sim::write_results_csv(results, std::span<const sim::SimResult>(&res, 1));
            ctx.note_output(results);
            if (!o->no_plot) {
              plots::SimPlot sp;
              sp.title = "simulation: " + pair.pair_id + " (" + sim::to_string(kind) + ")";
              for (std::size_t i = 0; i < pair.size(); ++i) {
                sp.t.push_back(pair.follower[i].t);
                sp.leader_x.push_back(pair.leader[i].x);
                sp.human_x.push_back(pair.follower[i].x);
              }
              for (const auto& ep : res.runs) {
                std::vector<double> x;
                for (const auto& f : ep.follower) x.push_back(f.x);
                sp.runs_x.push_back(std::move(x));
              }
              sp.intensity = res.runs.front().intensity;
              sp.w_int = res.runs.front().w_int;
              ctx.write_text(ctx.out_path("sim_" + stem + ".svg"), plots::sim_svg(sp));
            }
            char line[256];
            std::snprintf(line, sizeof line, "%s %s: RMSE(dx) %.3f +- %.3f  RMSE(safe) %.3f +- %.3f  collisions %zu/%zu\n",
                          pair.pair_id.c_str(), sim::to_string(kind).c_str(), res.rmse_dx_mean, res.rmse_dx_std,
                          res.rmse_safe_mean, res.rmse_safe_std, res.collisions, res.runs.size());
            ctx.out << line;
          }};
}

Command add_evaluate(CLI::App& app) {
  struct Opts : ControlOpts {
    std::string data;
    std::vector<std::string> policies{"int", "non", "rand", "switch_hard", "switch_soft"};
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("evaluate", "Benchmark policies over a test corpus");
  sub->add_option("--data", o->data, "test corpus directory")->required()->check(CLI::ExistingDirectory);
  sub->add_option("--policies", o->policies, "policies to compare")->delimiter(',');
  add_control_options(sub, *o);
  return {sub, [o](Context& ctx) {
            const auto pairs = ingest::read_corpus(o->data);
            ctx.note_input(o->data);
            if (pairs.empty()) throw EmptyCorpusError("test corpus holds no pairs");
            const auto kinds = parse_policies(o->policies);
            if (kinds.empty()) throw ConfigError("--policies is empty");
            ControlSetup s;
            setup(ctx, *o, kinds, s);
            const auto results = sim::evaluate(pairs, kinds, s.lib, s.model ? &*s.model : nullptr, s.cfg);
            const fs::path csv = ctx.out_path("results.csv");
            sim::write_results_csv(csv, results);
            ctx.note_output(csv);
            const std::string table = sim::format_table(results);
            ctx.write_text(ctx.out_path("results.txt"), table);
            ctx.out << table;
          }};
}

}  // namespace cfs::cli
