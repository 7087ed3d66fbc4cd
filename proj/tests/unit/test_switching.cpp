#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "cfs/error.hpp"
#include "cfs/rng.hpp"
#include "cfs/switching.hpp"

using namespace cfs;
using namespace cfs::switching;

namespace {

SwitchConfig cfg(Mode m, double i0, double beta) {
  SwitchConfig c;
  c.mode = m;
  c.i0 = i0;
  c.beta = beta;
  return c;
}

}  // namespace

TEST_SUITE("switching") {
  TEST_CASE("hard switch boundary") {
    const auto c = cfg(Mode::Hard, 0.2, 0.02);
    CHECK(hard_switch(0.2, c).w_int == 0.0);
    CHECK(hard_switch(std::nextafter(0.2, 1.0), c).w_int == 1.0);
    CHECK(hard_switch(0.1, c).w_int == 0.0);
    CHECK(hard_switch(0.0, cfg(Mode::Hard, 0.0, 1.0)).w_int == 0.0);
    CHECK(hard_switch(0.5, c).w_non() == 0.0);
  }

  TEST_CASE("soft switch values") {
    const auto c = cfg(Mode::Soft, 0.2, 0.02);
    CHECK(soft_switch(0.2, c).w_int == 0.5);
    CHECK(soft_switch(0.2 + 10 * 0.02, c).w_int > 0.9999);
    CHECK(soft_switch(0.2 - 10 * 0.02, c).w_int < 1e-4);
    CHECK(soft_switch(0.23, c).w_int == doctest::Approx(1.0 / (1.0 + std::exp(-1.5))).epsilon(1e-14));
    // extreme arguments stay finite
    CHECK(soft_switch(1e6, c).w_int == 1.0);
    CHECK(soft_switch(-1e6, c).w_int == 0.0);
    CHECK(soft_switch(0.3, cfg(Mode::Soft, std::numeric_limits<double>::infinity(), 1e-3)).w_int == 0.0);
    CHECK_THROWS_AS(soft_switch(0.2, cfg(Mode::Soft, 0.2, 0.0)), ArgumentError);
  }

  TEST_CASE("blend dispatches on mode") {
    CHECK(blend(0.2, cfg(Mode::Soft, 0.2, 0.1)).w_int == 0.5);
    CHECK(blend(0.2, cfg(Mode::Hard, 0.2, 0.1)).w_int == 0.0);
  }

  TEST_CASE("weights are monotone in intensity") {
    for (auto mode : {Mode::Hard, Mode::Soft}) {
      const auto c = cfg(mode, 0.15, 0.01);
      double prev = -1.0;
      for (int k = 0; k <= 2000; ++k) {
        const double w = blend(0.0005 * k, c).w_int;
        CHECK(w >= prev);
        CHECK(w >= 0.0);
        CHECK(w <= 1.0);
        prev = w;
      }
    }
  }

  TEST_CASE("soft switch Lipschitz bound") {
    Rng rng(1);
    std::uniform_real_distribution<double> u(0.0, 0.7), d(0.0, 0.05);
    for (double beta : {0.1, 0.01, 0.001}) {
      const auto c = cfg(Mode::Soft, 0.3, beta);
      for (int k = 0; k < 2000; ++k) {
        const double i = u(rng), delta = d(rng);
        CHECK(std::abs(soft_switch(i + delta, c).w_int - soft_switch(i, c).w_int) <= delta / (4.0 * beta) + 1e-15);
      }
    }
  }

  TEST_CASE("soft switch converges to hard switch as beta shrinks") {
    std::vector<double> grid;
    for (int k = 0; k <= 200; ++k)
      if (k != 100) grid.push_back(0.3 + 0.005 * (k - 100));
    double prev = 1.0;
    for (double beta : {1e-1, 1e-2, 1e-3}) {
      double worst = 0.0;
      for (double i : grid)
        worst = std::max(worst, std::abs(soft_switch(i, cfg(Mode::Soft, 0.3, beta)).w_int -
                                         hard_switch(i, cfg(Mode::Hard, 0.3, beta)).w_int));
      CAPTURE(beta);
      CHECK(worst < prev);
      prev = worst;
    }
    // away from I0 the limit is reached
    CHECK(std::abs(soft_switch(0.31, cfg(Mode::Soft, 0.3, 1e-4)).w_int - 1.0) < 1e-40);
  }

  TEST_CASE("blended acceleration") {
    CHECK(blended_accel({1.0}, -2.0, 1.0) == -2.0);
    CHECK(blended_accel({0.0}, -2.0, 1.0) == 1.0);
    CHECK(blended_accel({0.5}, -2.0, 1.0) == -0.5);
    Rng rng(2);
    std::uniform_real_distribution<double> a(-9.0, 5.0), w(0.0, 1.0);
    for (int k = 0; k < 1000; ++k) {
      const double ai = a(rng), an = a(rng), out = blended_accel({w(rng)}, ai, an);
      CHECK(out >= std::min(ai, an) - 1e-12);
      CHECK(out <= std::max(ai, an) + 1e-12);
    }
  }

  TEST_CASE("threshold quantile") {
    const std::vector<double> v{3, 1, 4, 10, 5, 9, 2, 6, 8, 7};
    CHECK(calibrate_threshold(v, 0.85) == 9.0);
    CHECK(calibrate_threshold(v) == 9.0);
    CHECK(calibrate_threshold(v, 1.0) == 10.0);
    CHECK(calibrate_threshold(v, 0.9999) == 10.0);
    CHECK(calibrate_threshold(std::vector<double>(17, 0.042), 0.85) == 0.042);
    CHECK_THROWS_AS(calibrate_threshold(std::vector<double>{}, 0.85), ArgumentError);
    CHECK_THROWS_AS(calibrate_threshold(v, 0.0), ArgumentError);
  }

  TEST_CASE("switch spec parsing and resolution") {
    const std::vector<double> pooled{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    const auto def = SwitchSpec{}.resolve(pooled);
    CHECK(def.mode == Mode::Soft);
    CHECK(def.i0 == 9.0);
    CHECK(def.beta == doctest::Approx(0.9));

    const auto fixed = SwitchSpec::parse_json(R"({"mode": "hard", "i0": 0.12, "beta": 0.05})").resolve({});
    CHECK(fixed.mode == Mode::Hard);
    CHECK(fixed.i0 == 0.12);
    CHECK(fixed.beta == 0.05);

    const auto q = SwitchSpec::parse_json(R"({"i0": "auto:q0.5"})");
    CHECK(q.resolve(pooled).i0 == 5.0);
    CHECK_THROWS_AS(q.resolve({}), ConfigError);

    const auto inf = SwitchSpec::parse_json(R"({"i0": "inf"})").resolve({});
    CHECK(std::isinf(inf.i0));
    CHECK(inf.beta == 1e-3);
    CHECK(SwitchSpec::parse_json(R"({"i0": 0})").resolve({}).beta == 1e-3);

    const auto round = SwitchSpec::parse_json(SwitchSpec::parse_json(R"({"mode": "hard", "i0": "auto:q0.9"})").to_json());
    CHECK(round.mode == Mode::Hard);
    CHECK(!round.i0);
    CHECK(*round.auto_quantile == doctest::Approx(0.9));

    CHECK_THROWS_AS(SwitchSpec::parse_json(R"({"mode": "fuzzy"})"), ConfigError);
    CHECK_THROWS_AS(SwitchSpec::parse_json(R"({"i0": "auto:q1.5"})"), ConfigError);
    CHECK_THROWS_AS(SwitchSpec::parse_json(R"({"i0": true})"), ConfigError);
    CHECK_THROWS_AS(SwitchSpec::parse_json(R"({"beta": -1})"), ConfigError);
    CHECK_THROWS_AS(SwitchSpec::parse_json("{not json"), ConfigError);
    CHECK_THROWS_AS(SwitchSpec::parse_json(R"({"i0": -0.5})").resolve({}), ConfigError);
  }
}
