#include <cmath>

#include "cef/stats.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace cef;

TEST_SUITE("stats") {
  TEST_CASE("marginal density integrates to one for n = 2..64") {
    for (int n = 2; n <= 64; ++n) {
      auto g = [n](double th) { return sphere_marginal_pdf(n, std::sin(th)) * std::cos(th); };
      const double total = oracle::gauss_legendre(g, -std::numbers::pi / 2, std::numbers::pi / 2);
      CHECK(std::abs(total - 1.0) < 1e-10);
    }
  }

  TEST_CASE("density and normalizer agree with the closed forms") {
    CHECK(sphere_normalizer(3) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(sphere_normalizer(2) == doctest::Approx(1.0 / std::numbers::pi).epsilon(1e-14));
    for (int n : {2, 4, 9, 40})
      for (double x : {-0.9, -0.3, 0.0, 0.55, 0.99})
        CHECK(sphere_marginal_pdf(n, x) == doctest::Approx(oracle::sphere_coordinate_density(n, x)).epsilon(1e-12));
    CHECK(sphere_marginal_pdf(5, 1.0) == 0.0);
  }

  TEST_CASE("recursion CDF matches quadrature") {
    for (int n : {2, 3, 4, 7, 16, 33, 64}) {
      for (double y : {-0.999, -0.7, -0.2, 0.0, 0.3, 0.8, 0.9999}) {
        CHECK(std::abs(sphere_marginal_cdf(n, y) - oracle::sphere_coordinate_cdf(n, y)) < 1e-11);
      }
      CHECK(sphere_marginal_cdf(n, -1.0) == 0.0);
      CHECK(sphere_marginal_cdf(n, 1.0) == 1.0);
    }
  }

  TEST_CASE("sphere samples: unit norm, KS against the marginal, orthogonal draws") {
    Stream s = derive_stream({1, "sphere"}, {});
    std::vector<double> c;
    for (int i = 0; i < 20000; ++i) {
      const Vec v = sample_uniform_sphere(s, 12);
      if (i < 50) CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-14));
      c.push_back(v[3]);
    }
    const double d = oracle::ks_statistic(c, [](double y) { return sphere_marginal_cdf(12, y); });
    CHECK(oracle::ks_pvalue(d, c.size()) > 0.01);
    const Vec x = sample_uniform_sphere(s, 12);
    for (int i = 0; i < 20; ++i) {
      const Vec w = sample_orthogonal_unit(s, 3.0 * x);
      CHECK(std::abs(w.dot(x)) < 1e-14);
      CHECK(w.norm() == doctest::Approx(1.0).epsilon(1e-14));
    }
  }

  TEST_CASE("histogram and KL distance") {
    HistogramDensity h(4);
    for (double v : {-1.0, -0.6, 0.0, 0.49, 0.5, 1.0}) h.add(v);
    CHECK(h.counts == std::vector<long>{2, 0, 2, 2});
    HistogramDensity g(4);
    g.merge(h);
    CHECK(g.total == 6);

    // Counts equal to the exact masses give (numerically) zero divergence.
    const int n = 9, bins = 20;
    HistogramDensity e(bins);
    const long total = 1000000;
    for (int b = 0; b < bins; ++b) {
      const double p = sphere_marginal_cdf(n, e.edges[b + 1]) - sphere_marginal_cdf(n, e.edges[b]);
      e.counts[b] = std::lround(p * total);
      e.total += e.counts[b];
    }
    CHECK(kl_to_sphere_marginal(e, n) < 1e-8);
    // A point mass is far from the marginal.
    HistogramDensity spike(bins);
    for (int i = 0; i < 1000; ++i) spike.add(0.01);
    CHECK(kl_to_sphere_marginal(spike, n) > 1.0);
  }

  TEST_CASE("mean_std") {
    const MeanStd m = mean_std({1.0, 2.0, 3.0, 4.0});
    CHECK(m.mean == 2.5);
    CHECK(m.std == doctest::Approx(std::sqrt(5.0 / 3.0)));
    CHECK(m.se() == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
    CHECK(mean_std({}).count == 0);
  }

  TEST_CASE("correlation calibration and independence") {
    CorrelationConfig cfg;
    cfg.N = 8;
    cfg.banks = 20;
    cfg.trials = 1000;
    const CorrelationResult r = correlation_rho(cfg);
    CHECK(r.rho_identity_stats.mean > 0.95);
    CHECK(r.rho_identity_stats.mean < 1.2);
    CHECK(r.rho_stats.mean < 0.2);
    CHECK(r.rho_star_stats.mean < 0.2);
    CHECK(r.rho.size() == 20u);
  }

  TEST_CASE("KL distance of SVD-CEF outputs exceeds the sampling floor") {
    KlConfig cfg;
    cfg.N = 8;
    cfg.banks = 3;
    cfg.directions = 2;
    cfg.trials = 5000;
    const KlResult r = kl_distance(cfg);
    CHECK(r.d.size() == 6u);
    CHECK(r.control_stats.mean < r.d_stats.mean);
  }

  TEST_CASE("distance profile: small alpha follows eta, large alpha saturates") {
    DistanceProfileConfig cfg;
    cfg.N = 8;
    cfg.alphas = {1e-8, 1.0};
    cfg.trials = 400;
    const auto rows = global_distance_profile(cfg);
    REQUIRE(rows.size() == 2u);
    // E|T w|^2 = |T|_F^2 / (N - 1) = N eta^2 / (N - 1) for w uniform in x-perp.
    const double local = rows[0].eta_rms * std::sqrt(8.0 / 7.0);
    CHECK(rows[0].ratio_rms == doctest::Approx(local).epsilon(0.10));
    CHECK(rows[1].dx == doctest::Approx(std::sqrt(2.0)));
    CHECK(rows[1].max_du <= std::sqrt(2.0) + 1e-12);
  }
}
