#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "cfs/error.hpp"
#include "cfs/ingest.hpp"
#include "cfs/interaction.hpp"
#include "cfs/stats.hpp"
#include "support.hpp"

using namespace cfs;
using namespace cfs::test;
using namespace cfs::interaction;

namespace {

const idm::IdmParams kTruth{38.0, 1.2, 2.0, 1.2, 1.8};

struct Fixture {
  ingest::SynthCorpus corpus;
  gmm::Gmm joint;
  std::vector<double> pooled;
};

// Built once: 20 synthetic pairs, 5 Hz, fixed K = 6, JS at 2000 draws.
const Fixture& fixture() {
  static const Fixture fx = [] {
    ingest::SynthConfig cfg;
    cfg.n_pairs = 20;
    cfg.seed = 5;
    cfg.event_rate = 0.05;
    cfg.reaction_time = 0.0;  // match brake_pair, whose follower reacts instantly
    auto corpus = ingest::synth_corpus(cfg);
    const auto layout = FeatureLayout::car_following(std::size_t{5}, std::size_t{3});
    const auto data = gmm::build_dataset(corpus.pairs, layout);
    gmm::EmOptions o;
    o.k = 6;
    o.seed = 1;
    auto fit = gmm::fit_em(data, layout, o);
    const IntensityModel im(fit.model);
    std::vector<double> pooled;
    for (const auto& p : corpus.pairs) {
      const auto s = intensity_series(im, p, Metric::JS, 2000, 1);
      pooled.insert(pooled.end(), s.values.begin(), s.values.end());
    }
    return Fixture{std::move(corpus), std::move(fit.model), std::move(pooled)};
  }();
  return fx;
}

const IntensityModel& model() {
  static const IntensityModel im(fixture().joint);
  return im;
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

TEST_SUITE("intensity") {
  TEST_CASE("model horizons follow the layout") {
    CHECK(model().history() == 5);
    CHECK(model().horizon() == 3);
  }

  TEST_CASE("series length and alignment") {
    const auto pair = constant_pair(40, 0.2, 22.0, idm::equilibrium_gap(kTruth, 22.0));
    const auto s = intensity_series(model(), pair, Metric::JS, 500, 3);
    REQUIRE(s.size() == 40 - (5 + 3) + 1);
    CHECK(s.pair_id == "const");
    CHECK(s.metric == Metric::JS);
    for (std::size_t j = 0; j < s.size(); ++j) {
      CHECK(s.index[j] == j + 4);
      CHECK(s.t[j] == pair.follower[s.index[j]].t);
      CHECK(s.values[j] >= 0.0);
      CHECK(s.values[j] <= std::numbers::ln2);
    }
    CHECK(intensity_series(model(), constant_pair(7, 0.2, 22.0, 30.0), Metric::JS, 100, 1).size() == 0);
  }

  TEST_CASE("series are deterministic and per-step seeded") {
    const auto& pair = fixture().corpus.pairs[0];
    const auto a = intensity_series(model(), pair, Metric::JS, 300, 9);
    const auto b = intensity_series(model(), pair, Metric::JS, 300, 9);
    CHECK(a.values == b.values);
    // One step evaluated alone reproduces the series value.
    const auto w = gmm::window_at(pair, 7, model().history());
    CHECK(model().evaluate(w, Metric::JS, 300, mix_seed(9, 7)) == a.values[7]);
  }

  TEST_CASE("W2 series is nonnegative and seed independent") {
    const auto& pair = fixture().corpus.pairs[1];
    const auto a = intensity_series(model(), pair, Metric::W2, 10, 1);
    const auto b = intensity_series(model(), pair, Metric::W2, 10, 2);
    CHECK(a.values == b.values);
    for (double v : a.values) CHECK(v >= 0.0);
  }

  TEST_CASE("constant-speed pair stays below the corpus 20th percentile") {
    const double p20 = stats::quantile_nearest_rank(fixture().pooled, 0.2);
    // Mid-range cruise speed; near the edges of the training speed range the
    // marginal model extrapolates and the bound is not met.
    const auto pair = constant_pair(150, 0.2, 24.0, idm::equilibrium_gap(kTruth, 24.0));
    const auto s = intensity_series(model(), pair, Metric::JS, 2000, 1);
    CHECK(*std::max_element(s.values.begin(), s.values.end()) < p20);
  }

  TEST_CASE("hard leader brake peaks within one second of onset") {
    for (double decel : {4.5, 6.0}) {
      CAPTURE(decel);
      const auto pair = brake_pair(kTruth, 60.0, 0.2, 25.0, 20.0, decel, 3.0);
      const auto s = intensity_series(model(), pair, Metric::JS, 2000, 1);
      CHECK(std::abs(s.t[argmax(s.values)] - 20.0) <= 1.0 + 1e-9);
      const double p85 = stats::quantile_nearest_rank(fixture().pooled, 0.85);
      CHECK(s.values[argmax(s.values)] > p85);
    }
  }

  TEST_CASE("JS and W2 agree on the trend of a braking pair") {
    const auto pair = brake_pair(kTruth, 60.0, 0.2, 25.0, 20.0, 4.5, 3.0);
    const auto js = intensity_series(model(), pair, Metric::JS, 2000, 1);
    const auto w2 = intensity_series(model(), pair, Metric::W2, 2000, 1);
    const double rho = stats::spearman(js.values, w2.values);
    CAPTURE(rho);
    CHECK(rho > 0.5);
    WARN(rho >= 0.8);
    CHECK(std::abs(js.t[argmax(js.values)] - w2.t[argmax(w2.values)]) <= 1.0 + 1e-9);
  }

  TEST_CASE("split sizes use the ceiling rule") {
    Rng rng(3);
    std::uniform_real_distribution<double> u;
    std::vector<double> v(1234);
    for (auto& x : v) x = u(rng);
    const auto s = split_by_intensity(v, 0.03, 0.03, 0.06, 1);
    CHECK(s.interactive.size() == 38);
    CHECK(s.non_interactive.size() == 38);
    CHECK(s.random.size() == 75);
    CHECK(s.frac_int == 0.03);
    // exact multiples do not round up
    const auto e = split_by_intensity(std::vector<double>(100, 0.0), 0.03, 0.03, 0.06, 1);
    CHECK(e.interactive.size() == 3);
    CHECK(e.random.size() == 6);
  }

  TEST_CASE("split sets pick the extremes") {
    Rng rng(4);
    std::uniform_real_distribution<double> u;
    std::vector<double> v(500);
    for (auto& x : v) x = u(rng);
    const auto s = split_by_intensity(v, 0.1, 0.2, 0.3, 2);
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    const double top_cut = sorted[500 - 50], bottom_cut = sorted[99];
    for (auto i : s.interactive) CHECK(v[i] >= top_cut);
    for (auto i : s.non_interactive) CHECK(v[i] <= bottom_cut);
    CHECK(std::is_sorted(s.interactive.begin(), s.interactive.end()));
    CHECK(std::is_sorted(s.non_interactive.begin(), s.non_interactive.end()));
    CHECK(std::is_sorted(s.random.begin(), s.random.end()));
    CHECK(std::set<std::size_t>(s.random.begin(), s.random.end()).size() == s.random.size());
    CHECK(s.random.back() < 500);
  }

  TEST_CASE("split tie rule and full fraction") {
    const std::vector<double> flat(200, 0.1);
    const auto s = split_by_intensity(flat, 0.03, 0.03, 0.06, 1);
    CHECK(s.interactive == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
    // bottom set skips the interactive positions, then takes the earliest
    CHECK(s.non_interactive == std::vector<std::size_t>{6, 7, 8, 9, 10, 11});
    const auto all = split_by_intensity(flat, 1.0, 1e-13, 0.5, 1);
    CHECK(all.interactive.size() == 200);
    CHECK(all.non_interactive.empty());
  }

  TEST_CASE("split sets are disjoint and random set is seeded") {
    Rng rng(5);
    std::normal_distribution<double> z;
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> v(50 + 13 * trial);
      for (auto& x : v) x = std::round(z(rng) * 4.0) / 4.0;  // many ties
      const auto s = split_by_intensity(v, 0.3, 0.5, 0.2, trial);
      std::vector<std::size_t> both;
      std::set_intersection(s.interactive.begin(), s.interactive.end(), s.non_interactive.begin(), s.non_interactive.end(),
                            std::back_inserter(both));
      CHECK(both.empty());
      CHECK(split_by_intensity(v, 0.3, 0.5, 0.2, trial).random == s.random);
    }
    std::vector<double> v(300, 0.0);
    CHECK(split_by_intensity(v, 0.1, 0.1, 0.2, 1).random != split_by_intensity(v, 0.1, 0.1, 0.2, 2).random);
  }

  TEST_CASE("split rejects invalid fractions") {
    const std::vector<double> v(10, 1.0);
    CHECK_THROWS_AS(split_by_intensity(v, 0.0, 0.1, 0.1, 1), ArgumentError);
    CHECK_THROWS_AS(split_by_intensity(v, 0.1, 1.5, 0.1, 1), ArgumentError);
    CHECK_THROWS_AS(split_by_intensity(v, 0.6, 0.6, 0.1, 1), ArgumentError);
    CHECK(split_by_intensity({}, 0.1, 0.1, 0.1, 1).interactive.empty());
  }

  TEST_CASE("population skew on a corpus with rare braking") {
    const auto& pooled = fixture().pooled;
    const double mx = *std::max_element(pooled.begin(), pooled.end());
    const auto below = std::count_if(pooled.begin(), pooled.end(), [&](double x) { return x < 0.25 * mx; });
    CHECK(static_cast<double>(below) / static_cast<double>(pooled.size()) >= 0.7);
  }
}
