#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "cfs/gmm.hpp"
#include "cfs/interaction.hpp"
#include "cfs/rng.hpp"
#include "cfs/simd/kernels.hpp"
#include "support.hpp"

using namespace cfs;
using namespace cfs::test;

namespace {

// Restores the library's kernel choice when a test pins one.
struct Pin {
  explicit Pin(std::string_view which) : ok(simd::select(which)) {}
  ~Pin() { simd::select("auto"); }
  bool ok;
};

double rel_err(double a, double b) { return a == b ? 0.0 : std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_SUITE("simd") {
  TEST_CASE("dispatch") {
    CHECK(simd::scalar_kernels().name == "scalar");
    CHECK(simd::select("scalar"));
    CHECK(simd::active().name == "scalar");
    CHECK(!simd::select("sse9"));
    CHECK(simd::active().name == "scalar");
    CHECK(simd::select("auto"));
    if (simd::avx2_kernels()) {
      CHECK(simd::active().name == "avx2");
      CHECK(simd::select("avx2"));
    } else {
      CHECK(!simd::select("avx2"));
      MESSAGE("AVX2 kernels unavailable on this machine; equivalence checks skipped");
    }
    simd::select("auto");
  }

  TEST_CASE("kernels agree with the scalar reference") {
    const auto* fast = simd::avx2_kernels();
    if (!fast) return;
    const auto& ref = simd::scalar_kernels();
    Rng rng(1);
    std::normal_distribution<double> z;
    for (std::size_t d : {1u, 2u, 3u, 5u, 8u, 23u})
      for (std::size_t n : {1u, 3u, 4u, 7u, 64u, 1001u}) {
        CAPTURE(d);
        CAPTURE(n);
        const Matrix cov = random_spd(d, rng);
        const Eigen::LLT<Matrix> llt(cov);
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> L = llt.matrixL();
        Vector inv_diag(d), mean(d);
        for (std::size_t r = 0; r < d; ++r) {
          inv_diag(r) = 1.0 / L(r, r);
          mean(r) = z(rng);
        }
        Matrix x(n, d);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = 3.0 * z(rng);
        std::vector<double> a(n), b(n);
        ref.sq_mahalanobis(L.data(), inv_diag.data(), mean.data(), x.data(), n, n, d, a.data());
        fast->sq_mahalanobis(L.data(), inv_diag.data(), mean.data(), x.data(), n, n, d, b.data());
        for (std::size_t i = 0; i < n; ++i) CHECK(rel_err(b[i], a[i]) < 1e-12);

        for (std::size_t k : {1u, 2u, 6u}) {
          std::vector<double> terms(k * n);
          for (auto& t : terms) t = -50.0 * std::abs(z(rng));
          if (n > 2) terms[1] = -std::numeric_limits<double>::infinity();
          std::vector<double> la(n), lb(n);
          ref.log_sum_exp(terms.data(), k, n, la.data());
          fast->log_sum_exp(terms.data(), k, n, lb.data());
          for (std::size_t i = 0; i < n; ++i) CHECK(rel_err(lb[i], la[i]) < 1e-12);
          auto ta = terms, tb = terms;
          ref.softmax_columns(ta.data(), k, n, la.data());
          fast->softmax_columns(tb.data(), k, n, lb.data());
          for (std::size_t i = 0; i < k * n; ++i) CHECK(std::abs(ta[i] - tb[i]) < 1e-12);
          for (std::size_t i = 0; i < n; ++i) CHECK(rel_err(lb[i], la[i]) < 1e-12);
        }
      }
  }

  TEST_CASE("all -inf columns stay -inf") {
    const double ninf = -std::numeric_limits<double>::infinity();
    for (const auto* t : {&simd::scalar_kernels(), simd::avx2_kernels()}) {
      if (!t) continue;
      std::vector<double> terms(2 * 5, ninf), out(5);
      terms[3] = -1.0;
      terms[5 + 3] = -1.0;
      t->log_sum_exp(terms.data(), 2, 5, out.data());
      CHECK(out[0] == ninf);
      CHECK(out[3] == doctest::Approx(-1.0 + std::log(2.0)));
    }
  }

  TEST_CASE("model-level results match across kernel tables") {
    if (!simd::avx2_kernels()) return;
    Rng rng(3);
    const auto layout = FeatureLayout::car_following(std::size_t{3}, std::size_t{2});
    const auto f = random_gmm(layout, 4, rng), g = random_gmm(layout, 3, rng);
    Matrix pts(500, static_cast<Eigen::Index>(layout.dim()));
    std::normal_distribution<double> z;
    for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = 2.0 * z(rng);

    std::vector<double> lp_scalar(500), lp_fast(500);
    double js_scalar = 0.0, js_fast = 0.0;
    gmm::EmResult em_scalar, em_fast;
    {
      Pin pin("scalar");
      f.log_pdf_batch(pts, lp_scalar);
      js_scalar = interaction::js_divergence(f, g, 4000, 5).raw;
      em_scalar = gmm::fit_em(pts, layout, gmm::EmOptions{.k = 3, .seed = 4});
    }
    {
      Pin pin("avx2");
      REQUIRE(pin.ok);
      f.log_pdf_batch(pts, lp_fast);
      js_fast = interaction::js_divergence(f, g, 4000, 5).raw;
      em_fast = gmm::fit_em(pts, layout, gmm::EmOptions{.k = 3, .seed = 4});
    }
    for (std::size_t i = 0; i < lp_scalar.size(); ++i) CHECK(rel_err(lp_fast[i], lp_scalar[i]) < 1e-11);
    CHECK(std::abs(js_fast - js_scalar) < 1e-10);
    CHECK(em_fast.iterations == em_scalar.iterations);
    CHECK(rel_err(em_fast.total_loglik, em_scalar.total_loglik) < 1e-9);
  }
}
