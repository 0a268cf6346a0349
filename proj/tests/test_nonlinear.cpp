#include <cmath>

#include "cef/cef_nonlinear.hpp"
#include "doctest.h"

using namespace cef;

namespace {

double brute_hop(const HopSpec& spec, const Vec& x, int m) {
  double y = 0.0;
  for (int j = 0; j <= spec.J; ++j) {
    double mono = 1.0;
    for (int n = 0; n < spec.N; ++n) {
      for (int e = 0; e < spec.exponents(j, n); ++e) mono *= x[n];
    }
    y += spec.coeffs(m, j) * mono;
  }
  return y;
}

IomBank iom(IomVariant v, int N, int K, int p = 0, int L = 0) {
  IomBankSpec s;
  s.variant = v;
  s.N = N;
  s.K = K;
  s.p = p;
  s.L = L;
  s.key = {5, "iom-test"};
  return IomBank(s);
}

}  // namespace

TEST_SUITE("cef_nonlinear") {
  TEST_CASE("HOP forward matches a brute-force polynomial evaluation") {
    const HopSpec spec = make_hop_spec({1, "hop"}, 4, 12);
    CHECK(spec.J == 8);
    CHECK(spec.exponents.row(0).sum() == 0);
    Stream s = derive_stream({1, "hop-x"}, {});
    for (int t = 0; t < 10; ++t) {
      Vec x(4);
      for (int i = 0; i < 4; ++i) x[i] = 2.0 * s.uniform() - 1.0;
      const Vec y = hop_forward(spec, x);
      for (int m = 0; m < spec.M; ++m) CHECK(y[m] == doctest::Approx(brute_hop(spec, x, m)).epsilon(1e-13));
      CHECK(hop_monomials(spec, x)[0] == 1.0);
    }
  }

  TEST_CASE("HOP Jacobian matches central differences") {
    const HopSpec spec = make_hop_spec({2, "hop"}, 3, 5, 6, 4);
    const Vec x = (Vec(3) << 0.3, -0.7, 0.45).finished();
    const Mat jac = hop_jacobian(spec, x);
    const double h = 1e-6;
    for (int n = 0; n < 3; ++n) {
      Vec xp = x, xm = x;
      xp[n] += h;
      xm[n] -= h;
      const Vec fd = (hop_forward(spec, xp) - hop_forward(spec, xm)) / (2 * h);
      for (int m = 0; m < 5; ++m) CHECK(jac(m, n) == doctest::Approx(fd[m]).epsilon(1e-6));
    }
  }

  TEST_CASE("HOP guards its input range") {
    const HopSpec spec = make_hop_spec({3, "hop"}, 2, 3);
    CHECK_THROWS_AS(hop_forward(spec, Vec::Constant(2, 2.5)), InvalidInput);
    CHECK_THROWS_AS(make_hop_spec({3, "hop"}, 2, 3, -1, 7), InvalidInput);
  }

  TEST_CASE("IoM-1 output is the argmax of the projection") {
    const IomBank bank = iom(IomVariant::IoM1, 6, 10, 0, 4);
    Stream s = derive_stream({4, "iom1-x"}, {});
    for (int t = 0; t < 20; ++t) {
      const Vec x = gaussian_vector(s, 6);
      const auto y = iom_outputs(bank, x);
      for (int k = 0; k < 10; ++k) {
        const Vec v = bank.projection(k) * x;
        Eigen::Index best;
        v.maxCoeff(&best);
        CHECK(y[k] == best);
      }
    }
  }

  TEST_CASE("IoM-2 product, argmax and log-linear group sum") {
    const IomBank bank = iom(IomVariant::IoM2, 5, 6, 3);
    Stream s = derive_stream({5, "iom2-x"}, {});
    for (int t = 0; t < 20; ++t) {
      const Vec x = gaussian_vector(s, 5);
      for (int k = 0; k < 6; ++k) {
        Vec w = Vec::Ones(5);
        for (int j = 0; j < 3; ++j) w = w.cwiseProduct(bank.permutation(k, j).matrix() * x);
        CHECK((iom2_product(bank, x, k) - w).cwiseAbs().maxCoeff() < 1e-14);
        Eigen::Index best;
        w.maxCoeff(&best);
        CHECK(iom2_forward(bank, x, k) == best);
        const Vec lw = w.cwiseAbs().array().log().matrix();
        const Vec lx = x.cwiseAbs().array().log().matrix();
        CHECK((lw - bank.group_sum(k) * lx).cwiseAbs().maxCoeff() < 1e-12);
      }
    }
  }

  TEST_CASE("IoM bank spec JSON round trip") {
    const IomBank bank = iom(IomVariant::IoM2, 4, 3, 2);
    const IomBank copy(iom_bank_spec_from_json(to_json(bank.spec())));
    CHECK(copy.p() == 2);
    for (int k = 0; k < 3; ++k)
      for (int j = 0; j < 2; ++j) CHECK(copy.permutation(k, j).map == bank.permutation(k, j).map);
  }
}
