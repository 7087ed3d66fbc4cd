#include <cmath>

#include "cfs/calibration.hpp"
#include "cfs/error.hpp"
#include "cfs/gmm.hpp"
#include "cfs/ingest.hpp"
#include "internal.hpp"

namespace cfs::cli {
namespace {

double common_dt(const std::vector<TrajectoryPair>& pairs) {
  if (pairs.empty()) throw EmptyCorpusError("corpus holds no pairs");
  const double dt = pairs.front().dt;
  for (const auto& p : pairs)
    if (std::abs(p.dt - dt) > 1e-9 * dt) throw ConfigError("pairs " + pairs.front().pair_id + " and " + p.pair_id + " differ in dt");
  return dt;
}

std::vector<TrajectoryPair> load_pairs(Context& ctx, const std::string& data, const std::vector<std::string>& files) {
  std::vector<TrajectoryPair> pairs;
  if (!data.empty()) {
    pairs = ingest::read_corpus(data);
    ctx.note_input(data);
  }
  for (const auto& f : files) {
    pairs.push_back(ingest::read_pair_csv(f));
    ctx.note_input(f);
  }
  if (pairs.empty()) throw EmptyCorpusError("no pairs given (use --data or --pair)");
  return pairs;
}

}  // namespace

Command add_fit(CLI::App& app) {
  struct Opts {
    std::string data;
    std::string k = "auto";
    std::size_t k_min = 2, k_max = 10;
    double history = 1.0, horizon = 0.6;
    std::size_t max_iter = 200;
    double tol = 1e-6;
    std::string out;
    bool write_dataset = false;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("fit", "Fit the joint GMM over car-following windows");
  sub->add_option("--data", o->data, "corpus directory")->required()->check(CLI::ExistingDirectory);
  sub->add_option("--k", o->k, "component count or 'auto' (BIC)");
  sub->add_option("--k-min", o->k_min, "smallest K tried by auto")->check(CLI::PositiveNumber);
  sub->add_option("--k-max", o->k_max, "largest K tried by auto")->check(CLI::PositiveNumber);
  sub->add_option("--history", o->history, "history window [s]")->check(CLI::PositiveNumber);
  sub->add_option("--horizon", o->horizon, "prediction horizon [s]")->check(CLI::PositiveNumber);
  sub->add_option("--max-iter", o->max_iter, "EM iteration cap")->check(CLI::PositiveNumber);
  sub->add_option("--tol", o->tol, "EM relative tolerance")->check(CLI::PositiveNumber);
  sub->add_option("--out", o->out, "model path (default <out-dir>/model.gmm.json)");
  sub->add_flag("--write-dataset", o->write_dataset, "also write the windowed dataset CSV");
  return {sub, [o](Context& ctx) {
            const auto pairs = load_pairs(ctx, o->data, {});
            const double dt = common_dt(pairs);
            const auto layout = FeatureLayout::car_following(o->history, o->horizon, dt);
            const gmm::Matrix data = gmm::build_dataset(pairs, layout);
            if (data.rows() == 0) throw EmptyCorpusError("no pair is long enough for a " + layout.describe() + " window");
            ctx.log("dataset: " + std::to_string(data.rows()) + " rows, layout " + layout.describe());
            if (o->write_dataset) {
              const auto p = ctx.out_path("dataset.csv");
              gmm::write_dataset_csv(p, data, layout);
              ctx.note_output(p);
            }
            gmm::EmOptions em;
            em.seed = ctx.global.seed;
            em.max_iter = o->max_iter;
            em.tol = o->tol;
            json report;
            gmm::EmResult fit;
            if (o->k == "auto") {
              if (o->k_min > o->k_max) throw ConfigError("--k-min exceeds --k-max");
              auto sel = gmm::select_k(data, layout, o->k_min, o->k_max, ctx.global.seed, em);
              json b = json::array();
              for (const auto& [k, v] : sel.bic_by_k) b.push_back({{"k", k}, {"bic", v}});
              report["bic"] = b;
              fit = std::move(sel.fit);
            } else {
              std::size_t k = 0;
              try {
                k = std::stoul(o->k);
              } catch (const std::exception&) {
                throw ConfigError("--k must be a positive integer or 'auto', got '" + o->k + "'");
              }
              if (k == 0) throw ConfigError("--k must be positive");
              em.k = k;
              fit = gmm::fit_em(data, layout, em);
            }
            gmm::ModelFile mf{fit.model, fit.scaler, dt, o->history, o->horizon};
            const fs::path out = o->out.empty() ? ctx.out_path("model.gmm.json") : fs::path(o->out);
            if (out.has_parent_path()) fs::create_directories(out.parent_path());
            gmm::save_model(out, mf);
            ctx.note_output(out);
            report["k"] = fit.model.k();
            report["rows"] = data.rows();
            report["layout"] = layout.describe();
            report["iterations"] = fit.iterations;
            report["converged"] = fit.converged;
            report["total_loglik"] = fit.total_loglik;
            report["bic_selected"] = gmm::bic(fit.total_loglik, fit.model.k(), layout.dim(), data.rows());
            report["regularization"] = fit.regularization;
            report["loglik_trace"] = fit.loglik_trace;
            ctx.write_text(ctx.out_path("fit_report.json"), report.dump(1) + "\n");
            ctx.out << "K=" << fit.model.k() << " on " << data.rows() << " windows, " << fit.iterations << " EM iterations"
                    << (fit.converged ? "" : " (not converged)") << '\n';
          }};
}

Command add_quantify(CLI::App& app) {
  struct Opts {
    std::string model, data, metric = "js", out;
    std::vector<std::string> pairs;
    std::size_t mc_samples = interaction::kDefaultMcSamples;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("quantify", "Interaction intensity per timestep");
  sub->add_option("--model", o->model, "fitted model JSON")->required()->check(CLI::ExistingFile);
  sub->add_option("--data", o->data, "corpus directory")->check(CLI::ExistingDirectory);
  sub->add_option("--pair", o->pairs, "single pair CSV (repeatable)")->check(CLI::ExistingFile);
  sub->add_option("--metric", o->metric, "js | w2")->check(CLI::IsMember({"js", "w2"}));
  sub->add_option("--mc-samples", o->mc_samples, "Monte Carlo samples per JS evaluation")->check(CLI::PositiveNumber);
  sub->add_option("--out", o->out, "CSV path when a single pair is given (default <out-dir>/intensity/<pair_id>.csv)");
  return {sub, [o](Context& ctx) {
            const auto pairs = load_pairs(ctx, o->data, o->pairs);
            const auto mf = gmm::load_model(o->model);
            ctx.note_input(o->model);
            const double dt = common_dt(pairs);
            if (std::abs(dt - mf.dt) > 1e-9 * mf.dt)
              throw ConfigError("pairs sampled at dt=" + format_double(dt) + " but the model was fitted at dt=" +
                                format_double(mf.dt));
            if (!o->out.empty() && pairs.size() != 1) throw ConfigError("--out needs exactly one pair");
            const interaction::IntensityModel model(mf.joint);
            const auto metric = interaction::parse_metric(o->metric);
            std::size_t total = 0;
            for (const auto& p : pairs) {
              const auto s = interaction::intensity_series(model, p, metric, o->mc_samples, pair_seed(ctx.global.seed, p.pair_id));
              const fs::path path = o->out.empty() ? ctx.out_path("intensity") / (p.pair_id + ".csv") : fs::path(o->out);
              write_intensity_csv(path, s);
              ctx.note_output(path);
              total += s.size();
              ctx.log(p.pair_id + ": " + std::to_string(s.size()) + " timesteps");
            }
            ctx.out << total << " intensity values for " << pairs.size() << " pairs (" << o->metric << ")\n";
          }};
}

Command add_calibrate(CLI::App& app) {
  struct Opts {
    std::string data, intensity_dir, split = "all", prior, out;
    std::size_t draws = 1500, burn_in = 5000, thin = 10, rollout_steps = 15;
    double frac_int = 0.03, frac_non = 0.03, frac_rand = 0.06;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("calibrate", "Bayesian IDM calibration on intensity-selected samples");
  sub->add_option("--data", o->data, "corpus directory")->required()->check(CLI::ExistingDirectory);
  sub->add_option("--intensity-dir", o->intensity_dir, "directory of <pair_id>.csv intensity files")
      ->required()
      ->check(CLI::ExistingDirectory);
  sub->add_option("--split", o->split, "int | non | rand | all")->check(CLI::IsMember({"int", "non", "rand", "all"}));
  sub->add_option("--prior", o->prior, "prior box JSON")->check(CLI::ExistingFile);
  sub->add_option("--draws", o->draws, "retained posterior draws")->check(CLI::PositiveNumber);
  sub->add_option("--burn-in", o->burn_in, "burn-in iterations");
  sub->add_option("--thin", o->thin, "keep every n-th iteration after burn-in")->check(CLI::PositiveNumber);
  sub->add_option("--rollout-steps", o->rollout_steps, "open-loop steps per likelihood term")->check(CLI::PositiveNumber);
  sub->add_option("--frac-int", o->frac_int, "interactive fraction")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--frac-non", o->frac_non, "non-interactive fraction")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--frac-rand", o->frac_rand, "random fraction")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--out", o->out, "posterior path for a single split (default <out-dir>/posterior_<split>.json)");
  return {sub, [o](Context& ctx) {
            const auto pairs = load_pairs(ctx, o->data, {});
            ctx.note_input(o->intensity_dir);
            const auto series = read_intensity_dir(o->intensity_dir, pairs);
            idm::PriorBox prior;
            if (!o->prior.empty()) {
              prior = idm::PriorBox::from_json_file(o->prior);
              ctx.note_input(o->prior);
            }
            prior.validate();
            idm::McmcOptions opt;
            opt.burn_in = o->burn_in;
            opt.thin = o->thin;
            opt.iterations = o->burn_in + o->draws * o->thin;
            opt.rollout_steps = o->rollout_steps;
            opt.seed = ctx.global.seed;
            const idm::PolicyFractions fr{o->frac_int, o->frac_non, o->frac_rand};
            std::vector<std::string> splits = {"int", "non", "rand"};
            if (o->split != "all") splits = {o->split};
            if (!o->out.empty() && splits.size() != 1) throw ConfigError("--out needs a single --split");
            for (const auto& name : splits) {
              const auto prov = idm::parse_provenance(name);
              const auto subsets = idm::policy_subsets(pairs, series, fr, prov, ctx.global.seed);
              idm::McmcOptions chain = opt;
              chain.seed = mix_seed(opt.seed, static_cast<std::uint64_t>(prov) + 1);
              const auto post = idm::calibrate(subsets, prior, chain, prov);
              const fs::path path = o->out.empty() ? ctx.out_path("posterior_" + name + ".json") : fs::path(o->out);
              if (path.has_parent_path()) fs::create_directories(path.parent_path());
              idm::save_posterior(path, post);
              ctx.note_output(path);
              const auto m = post.mean();
              char line[256];
              std::snprintf(line, sizeof line,
                            "%-5s n=%zu accept=%.3f  v0=%.2f T=%.3f s0=%.3f a_max=%.3f b=%.3f sigma=%.3f\n", name.c_str(),
                            post.n_observations, post.acceptance_rate, m.v0, m.T, m.s0, m.a_max, m.b, post.sigma_obs);
              ctx.out << line;
              for (const auto& w : post.warnings) ctx.err << "warning (" << name << "): " << w << '\n';
            }
          }};
}

}  // namespace cfs::cli
