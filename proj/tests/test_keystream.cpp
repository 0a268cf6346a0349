#include <cmath>
#include <set>

#include "cef/keystream.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace cef;

TEST_SUITE("keystream") {
  TEST_CASE("streams are a pure function of their address") {
    const KeyMaterial key{42, "bank"};
    Stream a = derive_stream(key, {1, 2});
    Stream b = derive_stream(key, {1, 2});
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    std::set<std::uint64_t> firsts;
    firsts.insert(derive_stream(key, {1, 2}).next_u64());
    firsts.insert(derive_stream(key, {2, 1}).next_u64());
    firsts.insert(derive_stream(key, {1}).next_u64());
    firsts.insert(derive_stream(key, {1, 2, 0}).next_u64());
    firsts.insert(derive_stream({43, "bank"}, {1, 2}).next_u64());
    firsts.insert(derive_stream({42, "bank2"}, {1, 2}).next_u64());
    CHECK(firsts.size() == 6);
  }

  TEST_CASE("uniform and gaussian moments") {
    Stream s = derive_stream({1, "moments"}, {});
    const int n = 200000;
    double su = 0, sg = 0, sg2 = 0, sg4 = 0;
    for (int i = 0; i < n; ++i) {
      const double u = s.uniform();
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
      su += u;
      const double g = s.gaussian();
      sg += g;
      sg2 += g * g;
      sg4 += g * g * g * g;
    }
    CHECK(std::abs(su / n - 0.5) < 4 * std::sqrt(1.0 / 12 / n));
    CHECK(std::abs(sg / n) < 4 / std::sqrt(double(n)));
    CHECK(std::abs(sg2 / n - 1.0) < 4 * std::sqrt(2.0 / n));
    CHECK(std::abs(sg4 / n - 3.0) < 4 * std::sqrt(96.0 / n));
  }

  TEST_CASE("gaussian draws pass a KS test") {
    Stream s = derive_stream({2, "ks"}, {});
    std::vector<double> xs(20000);
    for (auto& x : xs) x = s.gaussian();
    const double d = oracle::ks_statistic(xs, oracle::normal_cdf);
    CHECK(oracle::ks_pvalue(d, xs.size()) > 0.01);
  }

  TEST_CASE("below stays in range and covers it") {
    Stream s = derive_stream({3, "below"}, {});
    std::vector<int> hits(7, 0);
    for (int i = 0; i < 70000; ++i) {
      const auto v = s.below(7);
      REQUIRE(v < 7);
      ++hits[v];
    }
    for (int h : hits) CHECK(oracle::within_binomial(h, 70000, 1.0 / 7, 4.0));
  }

  TEST_CASE("haar matrices are orthogonal with Haar-distributed entries") {
    Stream s = derive_stream({4, "haar"}, {});
    const int n = 6;
    std::vector<double> entries;
    for (int t = 0; t < 3000; ++t) {
      const Mat q = haar_orthogonal(s, n);
      if (t < 20) CHECK((q.transpose() * q - Mat::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-12);
      entries.push_back(q(0, 0));
    }
    // A single entry of a Haar column is a coordinate of a uniform unit vector.
    const double d = oracle::ks_statistic(entries, [](double y) { return oracle::sphere_coordinate_cdf(6, y); });
    CHECK(oracle::ks_pvalue(d, entries.size()) > 0.01);
  }

  TEST_CASE("permutation apply matches its matrix") {
    Stream s = derive_stream({5, "perm"}, {});
    const Permutation p = random_permutation(s, 9);
    std::set<int> seen(p.map.begin(), p.map.end());
    CHECK(seen.size() == 9);
    const Vec x = gaussian_vector(s, 9);
    CHECK((p.apply(x) - p.matrix() * x).cwiseAbs().maxCoeff() == 0.0);
    for (int i = 0; i < 9; ++i) CHECK(p.apply(x)[i] == x[p.map[i]]);
  }
}
