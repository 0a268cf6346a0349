#include <bit>
#include <cmath>

#include "cef/quantizer.hpp"
#include "cef/stats.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace cef;

TEST_SUITE("quantizer") {
  TEST_CASE("N = 3 gives uniform boundaries") {
    const QuantizerTable t = build_table(3, 4, 4);
    REQUIRE(t.boundaries.size() == 16u);
    for (int i = 0; i < 16; ++i) CHECK(t.boundaries[i] == doctest::Approx(-1.0 + 2.0 * i / 16).epsilon(1e-10));
  }

  TEST_CASE("boundaries are equal-probability quantiles") {
    for (int n : {2, 5, 8, 16, 33}) {
      const QuantizerTable t = build_table(n, 8, 4);
      CHECK(std::abs(t.boundaries[16]) < 1e-10);
      for (int i = 1; i < t.M(); ++i) {
        CHECK(t.boundaries[i] > t.boundaries[i - 1]);
        CHECK(std::abs(oracle::sphere_coordinate_cdf(n, t.boundaries[i]) - double(i) / t.M()) < 1e-10);
      }
    }
    CHECK_THROWS_AS(build_table(8, 6, 4), InvalidInput);
  }

  TEST_CASE("bins have equal occupancy for sphere-uniform coordinates") {
    const QuantizerTable t = build_table(8, 8, 4);
    Stream s = derive_stream({1, "occ"}, {});
    std::vector<long> hits(32, 0);
    const long n = 100000;
    for (long i = 0; i < n; ++i) ++hits[fine_index(t, sample_uniform_sphere(s, 8)[0])];
    for (long h : hits) CHECK(oracle::within_binomial(h, n, 1.0 / 32));
  }

  TEST_CASE("boundary search agrees with a linear scan") {
    const QuantizerTable t = build_table(10, 16, 8);
    Stream s = derive_stream({2, "scan"}, {});
    for (int i = 0; i < 2000; ++i) {
      const double y = 2 * s.uniform() - 1;
      int scan = 0;
      for (int b = 0; b < t.M(); ++b)
        if (t.boundaries[b] <= y) scan = b;
      CHECK(fine_index(t, y) == scan);
      const HelperData h = quantize_alice(t, y);
      CHECK(h.m * t.L_y + h.j == scan);
      CHECK(h.code == gray(h.m, t.coarse_bits()));
    }
    CHECK(quantize_alice(t, -1.0 + 1e-15).m == 0);
    CHECK(fine_index(t, 1e-15) == t.M() / 2);
    CHECK_THROWS_AS(quantize_alice(t, 1.5), InvalidInput);
  }

  TEST_CASE("gray code properties") {
    CHECK(gray(0, 4) == 0u);
    for (std::uint32_t v = 0; v < 256; ++v) {
      CHECK(gray_inverse(gray(v, 8), 8) == v);
      if (v + 1 < 256) CHECK(std::popcount(gray(v, 8) ^ gray(v + 1, 8)) == 1);
    }
    CHECK_THROWS_AS(gray(16, 4), InvalidInput);
  }

  TEST_CASE("decoding: exact without noise, absorbs fine errors inside a level") {
    const QuantizerTable t = build_table(16, 16, 8);
    Stream s = derive_stream({3, "dec"}, {});
    for (int i = 0; i < 2000; ++i) {
      const double y = 2 * s.uniform() - 1;
      const HelperData h = quantize_alice(t, y);
      CHECK(decode_bob(t, y, h.j) == h.m);
      const int fine = h.m * t.L_y + h.j;
      // Any point of an adjacent fine bin in the same level decodes to m.
      for (int nb : {fine - 1, fine + 1}) {
        if (nb < 0 || nb >= t.M() || nb / t.L_y != h.m) continue;
        const double lo = t.boundaries[nb];
        const double hi = nb + 1 < t.M() ? t.boundaries[nb + 1] : 1.0;
        CHECK(decode_bob(t, 0.5 * (lo + hi), h.j) == h.m);
      }
    }
  }

  TEST_CASE("helper bits reduce disagreement and leak nothing about m") {
    const QuantizerTable t = build_table(16, 16, 8);
    Stream s = derive_stream({4, "helper"}, {});
    long with = 0, without = 0;
    std::vector<std::vector<long>> joint(8, std::vector<long>(16, 0));
    const long n = 100000;
    for (long i = 0; i < n; ++i) {
      const double y = sample_uniform_sphere(s, 16)[0];
      const double yp = std::clamp(y + 0.02 * s.gaussian(), -1.0, 1.0);
      const HelperData h = quantize_alice(t, y);
      ++joint[h.j][h.m];
      const int mb = decode_bob(t, yp, h.j);
      with += mb != h.m;
      without += quantize_alice(t, yp).m != h.m;
    }
    CHECK(with < without);
    // 128 cells: per-cell bound chosen so the family-wise false alarm rate stays at the 3 sigma level
    const double k = oracle::bonferroni_sigma(3.0, 8 * 16);
    for (int j = 0; j < 8; ++j) {
      long row = 0;
      for (long c : joint[j]) row += c;
      for (long c : joint[j]) CHECK(oracle::within_binomial(c, row, 1.0 / 16, k));
    }
  }

  TEST_CASE("SVD-CEF decoding errors without a sign flip are mostly off by one level at N = 16, sigma = 0.05") {
    const int n = 16;
    const QuantizerTable t = build_table(n, n, 8);
    long errors = 0, unit_errors = 0, flip_errors = 0, kept_errors = 0, kept_unit = 0;
    for (int trial = 0; trial < 300; ++trial) {
      Stream s = derive_stream({5, "off-by-one"}, {static_cast<std::uint64_t>(trial)});
      const auto block = make_rotation_block({5, "off-by-one-Q"}, n, trial);
      const Vec x = gaussian_vector(s, n);
      const BlockResponse a = block_response(block, x.normalized());
      if (!(a.eta < 2.5)) continue;
      const HelperData h = quantize_alice(t, a.u[0]);
      for (int d = 0; d < 10; ++d) {
        const Vec xb = x + 0.05 * gaussian_vector(s, n);
        const Vec ub = block_response(block, xb.normalized()).u;
        const int mb = decode_bob(t, ub[0], h.j);
        if (mb != h.m) {
          ++errors;
          unit_errors += std::abs(mb - h.m) == 1;
          if (ub.dot(a.u) < 0) ++flip_errors;
          else { ++kept_errors; kept_unit += std::abs(mb - h.m) == 1; }
        }
      }
    }
    MESSAGE("errors " << errors << ", unit " << unit_errors << ", sign flips " << flip_errors);
    REQUIRE(kept_errors > 20);
    // a flipped principal vector mirrors y, so those errors jump far; the rest are almost all adjacent
    CHECK(kept_unit >= 0.9 * kept_errors);
    CHECK(flip_errors + kept_errors == errors);
  }

  TEST_CASE("table JSON round trip keeps every boundary bit") {
    const QuantizerTable t = build_table(12, 8, 8);
    const QuantizerTable c = quantizer_table_from_json(nlohmann::json::parse(to_json(t).dump()));
    CHECK(c.boundaries == t.boundaries);
    CHECK(c.levels == 8);
  }

  TEST_CASE("BER: zero at sigma = 0, SVD-CEF below IoM-2 and non-decreasing in sigma") {
    BerConfig cfg;
    cfg.N = 16;
    cfg.sigmas = {0.0, 0.02, 0.1};
    cfg.trials = 60;
    cfg.noise_draws = 2;
    const auto rows = ber_experiment(cfg);
    CHECK(rows[0].ber_svd == 0.0);
    CHECK(rows[0].ber_iom2 == 0.0);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      CHECK(rows[i].ber_svd < rows[i].ber_iom2);
      CHECK(rows[i].ber_svd >= rows[i - 1].ber_svd);
      CHECK(rows[i].ber_iom2 >= rows[i - 1].ber_iom2);
    }
    CHECK(rows[0].retention > 0.8);
  }
}
