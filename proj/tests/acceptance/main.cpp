// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failed criteria.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cfs/calibration.hpp"
#include "cfs/cli.hpp"
#include "cfs/error.hpp"
#include "cfs/gmm.hpp"
#include "cfs/idm.hpp"
#include "cfs/ingest.hpp"
#include "cfs/interaction.hpp"
#include "cfs/rng.hpp"
#include "cfs/sim.hpp"
#include "cfs/switching.hpp"
#include "support.hpp"

using namespace cfs;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// ---------------------------------------------------------------- 1
Outcome divergence_correctness() {
  using interaction::js_divergence;
  using interaction::kl_mc;
  const auto n01 = test::gaussian1d(0.0, 1.0), n11 = test::gaussian1d(1.0, 1.0);
  auto t0 = Clock::now();
  const double kl = kl_mc(n01, n11, 100000, 1).value;
  const double t_kl = seconds_since(t0);
  const auto far_a = test::gaussian1d(0.0, 1.0), far_b = test::gaussian1d(60.0, 1.0);
  t0 = Clock::now();
  const double js = js_divergence(far_a, far_b, interaction::kDefaultMcSamples, 2).value;
  const double t_js = seconds_since(t0);
  const bool ok = std::abs(kl - 0.5) <= 0.02 && std::abs(js - std::numbers::ln2) <= 1e-3 && t_kl < 1.0 && t_js < 1.0;
  return {ok, fmt("kl=%.4f (0.5+-0.02) js=%.6f (ln2+-1e-3) time kl %.3fs js %.3fs", kl, js, t_kl, t_js)};
}

// ---------------------------------------------------------------- 2
Outcome mixture_w2_oracle() {
  Rng rng(2024);
  std::uniform_int_distribution<int> kdist(1, 3), ddist(1, 3);
  double worst_oracle = 0.0, worst_sym = 0.0, worst_tri = 0.0;
  const auto t0 = Clock::now();
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = static_cast<std::size_t>(ddist(rng));
    const auto f = test::random_gmm(static_cast<std::size_t>(kdist(rng)), d, rng);
    const auto g = test::random_gmm(static_cast<std::size_t>(kdist(rng)), d, rng);
    const auto h = test::random_gmm(static_cast<std::size_t>(kdist(rng)), d, rng);
    const double fg = interaction::mixture_w2(f, g);
    const double brute = std::sqrt(test::brute_force_transport(f.weights(), g.weights(), interaction::w2_cost_matrix(f, g)));
    worst_oracle = std::max(worst_oracle, std::abs(fg - brute));
    worst_sym = std::max(worst_sym, std::abs(fg - interaction::mixture_w2(g, f)));
    worst_tri = std::max(worst_tri, fg - interaction::mixture_w2(f, h) - interaction::mixture_w2(h, g));
  }
  const double t = seconds_since(t0);
  const bool ok = worst_oracle <= 1e-8 && worst_sym <= 1e-8 && worst_tri <= 1e-8 && t < 10.0;
  return {ok, fmt("100 pairs: max |mw2-brute| %.2e, asymmetry %.2e, triangle excess %.2e, %.2fs", worst_oracle, worst_sym,
                  std::max(0.0, worst_tri), t)};
}

// ---------------------------------------------------------------- 3
double max_model_diff(const gmm::Gmm& a, const gmm::Gmm& b) {
  if (a.k() != b.k() || a.dim() != b.dim()) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t k = 0; k < a.k(); ++k) {
    m = std::max(m, std::abs(a.weight(k) - b.weight(k)));
    m = std::max(m, (a.mean(k) - b.mean(k)).cwiseAbs().maxCoeff());
    m = std::max(m, (a.cov(k) - b.cov(k)).cwiseAbs().maxCoeff());
  }
  return m;
}

Outcome gmr_consistency() {
  Rng rng(33);
  std::normal_distribution<double> z;
  const FeatureLayout layout({{"a", 2}, {"b", 1}, {"c", 2}});
  double worst_commute = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = test::random_gmm(layout, 1 + trial % 4, rng, 2.0);
    gmm::Vector x(2);
    x << 2.0 * z(rng), 2.0 * z(rng);
    const auto lhs = gmm::marginalize(gmm::condition(g, {"a"}, x), {"b"});
    const auto rhs = gmm::condition(gmm::marginalize(g, {"b"}), {"a"}, x);
    worst_commute = std::max(worst_commute, max_model_diff(lhs, rhs));
  }

  // EM monotonicity on a three-cluster sample
  gmm::Matrix data(900, 3);
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const double c = static_cast<double>(i % 3);
    for (Eigen::Index j = 0; j < 3; ++j) data(i, j) = 4.0 * c * (j == i % 3 ? 1.0 : 0.3) + z(rng);
  }
  double worst_drop = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto fit = gmm::fit_em(data, test::flat_layout(3), gmm::EmOptions{.k = 4, .seed = seed});
    for (std::size_t i = 1; i < fit.loglik_trace.size(); ++i)
      worst_drop = std::max(worst_drop, fit.loglik_trace[i - 1] - fit.loglik_trace[i]);
  }

  // K = 1 against the sample moments of 5000 draws
  gmm::Vector mu(2);
  mu << 3.0, -2.0;
  gmm::Matrix cov(2, 2);
  cov << 2.0, 0.6, 0.6, 1.0;
  const gmm::Matrix draws = gmm::Gmm(test::flat_layout(2), {1.0}, {mu}, {cov}).sample(5000, std::uint64_t{7});
  const gmm::Vector smean = draws.colwise().mean();
  const gmm::Matrix centred = draws.rowwise() - smean.transpose();
  const gmm::Matrix scov = centred.transpose() * centred / static_cast<double>(draws.rows() - 1);
  const auto one = gmm::fit_em(draws, test::flat_layout(2), gmm::EmOptions{.k = 1, .seed = 1});
  const double mean_err = ((one.model.mean(0) - smean).cwiseAbs().array() / smean.cwiseAbs().array()).maxCoeff();
  const double scale = scov.diagonal().cwiseSqrt().maxCoeff();
  const double cov_err = (one.model.cov(0) - scov).cwiseAbs().maxCoeff() / (scale * scale);

  const bool ok = worst_commute <= 1e-8 && worst_drop <= 1e-9 && mean_err <= 0.05 && cov_err <= 0.05;
  return {ok, fmt("commute max diff %.2e over 50 models, largest EM loglik drop %.2e, K=1 mean err %.2e cov err %.2e",
                  worst_commute, worst_drop, mean_err, cov_err)};
}

// ---------------------------------------------------------------- 4
Outcome idm_physics() {
  const idm::IdmParams ref{30.0, 1.5, 2.0, 1.0, 1.5};
  const bool fixed = idm::idm_accel(ref, 0.0, 0.0, ref.s0) == 0.0;

  double worst_eq = 0.0;
  for (double ve : {10.0, 20.0, 25.0}) {
    idm::FollowerState f{0.0, 0.5 * ve};
    double xl = 80.0;
    for (int k = 0; k < 1200; ++k) {
      f = idm::step(ref, f, {xl, ve, 4.5}, 0.1).next;
      xl += ve * 0.1;
    }
    const double expect = idm::equilibrium_gap(ref, ve);
    worst_eq = std::max(worst_eq, std::abs(xl - 4.5 - f.x - expect) / expect);
  }

  double worst_kin = 0.0;
  for (double a : {-1.3, 0.4, 2.5}) {
    idm::FollowerState s{3.0, 20.0};
    for (int k = 0; k < 10; ++k) s = idm::integrate(s, a, 0.2);
    worst_kin = std::max(worst_kin, std::abs(s.x - (3.0 + 20.0 * 2.0 + 0.5 * a * 4.0)));
  }

  ingest::SynthConfig cfg;
  cfg.n_pairs = 20;
  cfg.seed = 77;
  cfg.event_rate = 0.1;
  const auto corpus = ingest::synth_corpus(cfg);
  const idm::PriorBox box;
  Rng rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t collisions = 0;
  for (int d = 0; d < 200; ++d) {
    idm::IdmParams p;
    p.v0 = box.lo.v0 + u(rng) * (box.hi.v0 - box.lo.v0);
    p.T = box.lo.T + u(rng) * (box.hi.T - box.lo.T);
    p.s0 = box.lo.s0 + u(rng) * (box.hi.s0 - box.lo.s0);
    p.a_max = box.lo.a_max + u(rng) * (box.hi.a_max - box.lo.a_max);
    p.b = box.lo.b + u(rng) * (box.hi.b - box.lo.b);
    for (const auto& pair : corpus.pairs) {
      const double len = pair.leader_length;
      idm::FollowerState f{pair.leader[0].x - len - (p.s0 + pair.leader[0].v * p.T), pair.leader[0].v};
      try {
        for (std::size_t i = 0; i + 1 < pair.size(); ++i) {
          f = idm::step(p, f, {pair.leader[i].x, pair.leader[i].v, len}, pair.dt).next;
          if (!(pair.leader[i + 1].x - len - f.x > 0.0)) throw CollisionError("gap closed");
        }
      } catch (const CollisionError&) {
        ++collisions;
      }
    }
  }
  const bool ok = fixed && worst_eq <= 0.02 && worst_kin < 1e-9 && collisions == 0;
  return {ok, fmt("fixed point %s, equilibrium err %.3f%%, kinematics err %.1e, collisions %zu/4000", fixed ? "exact" : "NOT exact",
                  100.0 * worst_eq, worst_kin, collisions)};
}

// ---------------------------------------------------------------- 5
Outcome calibration_recovery() {
  const idm::IdmParams truth{30.0, 1.4, 2.5, 1.2, 1.8};
  const auto pair = test::idm_pair(truth, 25.0, 4.0, 0.2, 60.0, 0.05, 7);
  idm::CalibrationSubset sub{pair, {}};
  for (std::size_t i = 0; i + 15 < pair.size(); ++i) sub.indices.push_back(i);
  idm::McmcOptions o;
  o.seed = 3;
  const auto t0 = Clock::now();
  const auto post = idm::calibrate(std::span(&sub, 1), idm::PriorBox{}, o);
  const double t = seconds_since(t0);
  const auto again = idm::calibrate(std::span(&sub, 1), idm::PriorBox{}, o);
  bool same = post.draws.size() == again.draws.size() && post.sigma_draws == again.sigma_draws;
  for (std::size_t i = 0; same && i < post.draws.size(); ++i) same = post.draws[i] == again.draws[i];
  const auto m = post.mean();
  const auto rel = [](double a, double b) { return std::abs(a - b) / b; };
  const double e_v0 = rel(m.v0, truth.v0), e_T = rel(m.T, truth.T), e_s0 = rel(m.s0, truth.s0);
  const bool ok = e_v0 < 0.15 && e_T < 0.15 && e_s0 < 0.15 && same && t < 120.0;
  return {ok, fmt("v0 %.2f (%.1f%%) T %.3f (%.1f%%) s0 %.3f (%.1f%%), rerun %s, %zu iterations in %.1fs", m.v0, 100 * e_v0, m.T,
                  100 * e_T, m.s0, 100 * e_s0, same ? "identical" : "DIFFERS", o.iterations, t)};
}

// ---------------------------------------------------------------- 6
Outcome switching_laws() {
  using namespace switching;
  const SwitchConfig soft{Mode::Soft, 0.3, 0.01}, hard{Mode::Hard, 0.3, 0.01};
  const bool boundary = soft_switch(0.3, soft).w_int == 0.5 && hard_switch(0.3, hard).w_int == 0.0 &&
                        hard_switch(std::nextafter(0.3, 1.0), hard).w_int == 1.0;
  std::vector<double> dev;
  for (double beta : {1e-1, 1e-2, 1e-3}) {
    double worst = 0.0;
    for (int k = 0; k <= 200; ++k) {
      if (k == 100) continue;
      const double i = 0.3 + 0.005 * (k - 100);
      worst = std::max(worst, std::abs(soft_switch(i, {Mode::Soft, 0.3, beta}).w_int - hard_switch(i, {Mode::Hard, 0.3, beta}).w_int));
    }
    dev.push_back(worst);
  }
  const bool shrinking = dev[1] < dev[0] && dev[2] < dev[1];
  return {boundary && shrinking,
          fmt("psi(I0)=0.5 and hard picks non at I0: %s; max deviation %.3g > %.3g > %.3g", boundary ? "yes" : "NO", dev[0], dev[1],
              dev[2])};
}

// ---------------------------------------------------------------- 7
Outcome population_skew() {
  ingest::SynthConfig cfg;
  cfg.n_pairs = 50;
  cfg.seed = 7;
  cfg.event_rate = 0.02;
  const auto corpus = ingest::synth_corpus(cfg);
  const auto layout = FeatureLayout::car_following(1.0, 0.6, corpus.pairs.front().dt);
  const auto sel = gmm::select_k(gmm::build_dataset(corpus.pairs, layout), layout, 2, 10, cfg.seed);
  const interaction::IntensityModel model(sel.fit.model);
  std::vector<double> pooled;
  for (std::size_t p = 0; p < corpus.pairs.size(); ++p) {
    const auto s = interaction::intensity_series(model, corpus.pairs[p], interaction::Metric::JS, 2000, mix_seed(cfg.seed, p));
    pooled.insert(pooled.end(), s.values.begin(), s.values.end());
  }
  const double mx = *std::max_element(pooled.begin(), pooled.end());
  const auto below = std::count_if(pooled.begin(), pooled.end(), [&](double v) { return v < 0.25 * mx; });
  const double frac = static_cast<double>(below) / static_cast<double>(pooled.size());
  return {frac >= 0.70, fmt("%.1f%% of %zu timesteps below 0.25 x max (max %.3f, K=%zu)", 100.0 * frac, pooled.size(), mx, sel.k)};
}

// ---------------------------------------------------------------- 8
// Desk-scale benchmark: train on one brake-rich synthetic corpus, evaluate
// on 7 held-out pairs from the same generator.
struct Benchmark {
  double event_rate = 0.04;
  std::size_t train_pairs = 20;
  std::uint64_t train_seed = 1;
  std::uint64_t test_seed = 2;
  std::size_t mc_train = interaction::kDefaultMcSamples;
  std::size_t runs = 20;
};

Outcome end_to_end_ordering() {
  const Benchmark b;
  const auto t0 = Clock::now();
  ingest::SynthConfig cfg;
  cfg.event_rate = b.event_rate;
  cfg.n_pairs = b.train_pairs;
  cfg.seed = b.train_seed;
  const auto train = ingest::synth_corpus(cfg);
  cfg.n_pairs = 7;
  cfg.seed = b.test_seed;
  const auto test_set = ingest::synth_corpus(cfg);

  const auto layout = FeatureLayout::car_following(1.0, 0.6, train.pairs.front().dt);
  const auto sel = gmm::select_k(gmm::build_dataset(train.pairs, layout), layout, 2, 10, b.train_seed);
  const interaction::IntensityModel model(sel.fit.model);
  std::vector<interaction::IntensitySeries> series;
  std::vector<double> pooled;
  for (std::size_t p = 0; p < train.pairs.size(); ++p) {
    series.push_back(interaction::intensity_series(model, train.pairs[p], interaction::Metric::JS, b.mc_train, mix_seed(b.train_seed, p)));
    pooled.insert(pooled.end(), series.back().values.begin(), series.back().values.end());
  }
  idm::McmcOptions mc;
  mc.seed = b.train_seed;
  const auto set = idm::make_policies(train.pairs, series, idm::PolicyFractions{}, idm::PriorBox{}, mc);

  const sim::PolicyLibrary lib{&set.interactive, &set.non_interactive, &set.random};
  sim::SimConfig sc;
  sc.n_runs = b.runs;
  sc.seed = b.test_seed;
  sc.switch_config = switching::SwitchSpec{}.resolve(pooled);
  const std::vector<sim::PolicyKind> kinds{sim::PolicyKind::Int, sim::PolicyKind::Non, sim::PolicyKind::Rand,
                                           sim::PolicyKind::SwitchHard, sim::PolicyKind::SwitchSoft};
  const auto results = sim::evaluate(test_set.pairs, kinds, lib, &model, sc);
  const double t = seconds_since(t0);

  std::size_t soft_beats_rand = 0, int_widest = 0;
  std::ostringstream per_pair;
  for (std::size_t p = 0; p < test_set.pairs.size(); ++p) {
    const auto* row = &results[p * kinds.size()];
    const auto& soft = row[4];
    const auto& rand = row[2];
    soft_beats_rand += soft.rmse_dx_mean <= rand.rmse_dx_mean;
    bool widest = true;
    for (std::size_t k = 1; k < kinds.size(); ++k) widest = widest && row[0].mean_spacing > row[k].mean_spacing;
    int_widest += widest;
    per_pair << fmt(" %s[soft %.2f rand %.2f]", soft.pair_id.c_str(), soft.rmse_dx_mean, rand.rmse_dx_mean);
  }
  std::printf("%s", sim::format_table(results).c_str());
  const bool ok = soft_beats_rand >= 5 && int_widest == test_set.pairs.size() && t < 900.0;
  return {ok, fmt("switch_soft <= rand on %zu/7, int widest spacing on %zu/7, K=%zu, i0 %.4f, %.0fs;%s", soft_beats_rand, int_widest,
                  sel.k, sc.switch_config.i0, t, per_pair.str().c_str())};
}

// ---------------------------------------------------------------- 9
int cli(const std::vector<std::string>& args, std::string* err = nullptr) {
  std::ostringstream out, e;
  const int code = cli::run(args, out, e);
  if (err) *err = e.str();
  return code;
}

std::vector<fs::path> regular_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dir));
  std::sort(files.begin(), files.end());
  return files;
}

Outcome replay_determinism(const fs::path& work) {
  const fs::path root = work / "c9";
  fs::remove_all(root);
  fs::create_directories(root);
  const auto at = [&](const std::string& s) { return (root / s).string(); };
  const std::string seed = "11";
  const std::vector<std::pair<std::string, std::vector<std::string>>> steps = {
      {"synth", {"synth", "--pairs", "3", "--duration", "40", "--event-rate", "0.05"}},
      {"fit", {"fit", "--data", at("synth"), "--k", "3"}},
      {"quantify", {"quantify", "--model", at("fit/model.gmm.json"), "--data", at("synth"), "--mc-samples", "300"}},
      {"sample", {"sample", "--data", at("synth"), "--intensity-dir", at("quantify/intensity")}},
      {"calibrate",
       {"calibrate", "--data", at("synth"), "--intensity-dir", at("quantify/intensity"), "--draws", "200", "--burn-in", "600",
        "--thin", "2"}},
      {"simulate",
       {"simulate", "--pair", at("synth/pair_0.csv"), "--policy", "switch_soft", "--model", at("fit/model.gmm.json"),
        "--posteriors", at("calibrate"), "--intensity-dir", at("quantify/intensity"), "--runs", "2", "--mc-samples", "200"}},
      {"evaluate",
       {"evaluate", "--data", at("synth"), "--policies", "non,rand,switch_hard", "--model", at("fit/model.gmm.json"),
        "--posteriors", at("calibrate"), "--intensity-dir", at("quantify/intensity"), "--runs", "2", "--mc-samples", "200"}},
      {"plot_hist", {"plot", "--kind", "histogram", "--input", at("quantify/intensity")}},
      {"plot_profile", {"plot", "--kind", "profile", "--input", at("quantify/intensity/pair_0.csv")}},
      {"plot_samples", {"plot", "--kind", "samples", "--input", at("quantify/intensity/pair_0.csv"), "--pair", at("synth/pair_0.csv")}},
      {"plot_sim",
       {"plot", "--kind", "sim", "--input", at("simulate/runs_pair_0_switch_soft.csv"), "--pair", at("synth/pair_0.csv")}},
  };
  std::size_t files = 0, svgs = 0;
  for (const auto& [name, args] : steps) {
    std::vector<std::string> argv{"--seed", seed, "--out-dir", at(name)};
    argv.insert(argv.end(), args.begin(), args.end());
    std::string err;
    if (const int code = cli(argv, &err); code != 0) return {false, fmt("%s exited %d: %s", name.c_str(), code, err.c_str())};
    const std::string again = at(name + "_replay");
    if (const int code = cli({"replay", "--manifest", at(name + "/manifest.json"), "--out-dir", again}, &err); code != 0)
      return {false, fmt("replay of %s exited %d: %s", name.c_str(), code, err.c_str())};
    const auto original = regular_files(root / name);
    if (original != regular_files(again)) return {false, name + ": replay wrote a different set of files"};
    for (const auto& rel : original) {
      if (rel == "manifest.json") continue;
      if (test::read_file(root / name / rel) != test::read_file(fs::path(again) / rel))
        return {false, fmt("%s differs after replay", (fs::path(name) / rel).string().c_str())};
      ++files;
      svgs += rel.extension() == ".svg";
    }
  }
  return {svgs > 0, fmt("%zu pipeline steps replayed, %zu output files (%zu SVG) bit-identical", steps.size(), files, svgs)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string work = (fs::temp_directory_path() / "cfs_acceptance").string();
  std::vector<int> only;
  app.add_option("--work-dir", work, "scratch directory for the CLI pipeline");
  app.add_option("--only", only, "run just these criteria");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"divergence correctness", divergence_correctness},
      {"mixture W2 oracle", mixture_w2_oracle},
      {"GMR consistency", gmr_consistency},
      {"IDM physics", idm_physics},
      {"calibration recovery", calibration_recovery},
      {"switching laws", switching_laws},
      {"population skew", population_skew},
      {"end-to-end ordering", end_to_end_ordering},
      {"replay determinism", [&] { return replay_determinism(work); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("C%d %s %s: %s\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed;
}
