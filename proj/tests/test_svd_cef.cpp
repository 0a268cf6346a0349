#include <cmath>

#include "cef/stats.hpp"
#include "cef/svd_cef.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace cef;

namespace {

// Finite-difference eta: Jacobian of x -> u(x / |x|) by central differences.
double eta_fd(const std::vector<Mat>& block, const Vec& x, double h = 1e-6) {
  const auto n = x.size();
  double acc = 0.0;
  const Vec u0 = oracle::svd_cef_u(block, x);
  for (Eigen::Index j = 0; j < n; ++j) {
    Vec xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    Vec up = oracle::svd_cef_u(block, xp.normalized());
    Vec um = oracle::svd_cef_u(block, xm.normalized());
    if (up.dot(u0) < 0) up = -up;
    if (um.dot(u0) < 0) um = -um;
    acc += ((up - um) / (2 * h)).squaredNorm();
  }
  return std::sqrt(acc / n);
}

}  // namespace

TEST_SUITE("svd_cef") {
  TEST_CASE("modulated matrix columns and gram") {
    const auto block = make_rotation_block({1, "svd"}, 5, 0);
    Stream s = derive_stream({1, "svd-x"}, {});
    const Vec x = sample_uniform_sphere(s, 5);
    const Mat m = build_modulated_matrix(block, x);
    for (int l = 0; l < 5; ++l) CHECK((m.col(l) - block[l] * x).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((gram(m) - m * m.transpose()).cwiseAbs().maxCoeff() < 1e-13);
    for (const Mat& q : block) CHECK((q.transpose() * q - Mat::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("power method agrees with the Jacobi oracle") {
    Stream s = derive_stream({2, "power"}, {});
    for (int n : {2, 4, 8, 16}) {
      for (int t = 0; t < 5; ++t) {
        const Mat a = gaussian_matrix(s, n, n);
        const Mat g = a * a.transpose();
        const PrincipalVector pv = principal_eigenvector(g);
        auto [w, v] = oracle::jacobi_eigen(g);
        CHECK(pv.lambda == doctest::Approx(w[n - 1]).epsilon(1e-10));
        CHECK(pv.gap == doctest::Approx(w[n - 1] - w[n - 2]).epsilon(1e-8));
        CHECK(std::abs(pv.u.dot(v.col(n - 1))) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(pv.residual <= 1e-9 * std::max(1.0, pv.lambda));
      }
    }
  }

  TEST_CASE("sign convention: largest-magnitude entry positive") {
    Vec u(4);
    u << 0.1, -0.8, 0.3, 0.5;
    sign_normalize(u);
    CHECK(u[1] == 0.8);
    Vec tie(3);
    tie << -0.5, 0.5, 0.1;
    sign_normalize(tie);
    CHECK(tie[0] == 0.5);
  }

  TEST_CASE("forward outputs match the oracle with small eigen-residuals") {
    const RotationBank bank = make_rotation_bank({3, "svd"}, 8, 12);
    Stream s = derive_stream({3, "svd-x"}, {});
    for (int t = 0; t < 10; ++t) {
      const Vec x = gaussian_vector(s, 8);
      const SvdCefOutput out = svdcef_forward(bank, x, 3);
      CHECK(out.samples.size() + out.degenerate_blocks.size() == 12u);
      for (const auto& smp : out.samples) {
        CHECK(smp.residual <= 1e-9);
        const Vec ref = oracle::svd_cef_u(bank.Q[smp.k], x.normalized());
        CHECK((smp.u - ref).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((smp.y - smp.u.head(3)).norm() == 0.0);
      }
      // Scale invariance.
      CHECK((svdcef_forward(bank, 4.0 * x, 3).y - out.y).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  TEST_CASE("eta matches a finite-difference oracle within 2%") {
    Stream s = derive_stream({4, "eta"}, {});
    for (int n : {4, 8, 16}) {
      for (int t = 0; t < 5; ++t) {
        const auto block = make_rotation_block({4, "eta-bank"}, n, t);
        const Vec x = sample_uniform_sphere(s, n);
        const BlockResponse r = block_response(block, x);
        if (r.gap < 1e-3) continue;
        const double fd = eta_fd(block, x);
        CHECK(sensitivity_eta(block, x) == doctest::Approx(fd).epsilon(0.02));
        CHECK(r.eta == doctest::Approx(sensitivity_eta(block, x)).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("sensitivity matrix annihilates x and predicts small moves") {
    const auto block = make_rotation_block({5, "T"}, 6, 0);
    Stream s = derive_stream({5, "T-x"}, {});
    const Vec x = sample_uniform_sphere(s, 6);
    const Mat T = sensitivity_matrix(block, x);
    CHECK((T * x).norm() < 1e-10 * std::max(1.0, T.norm()));
    const Vec dx = 1e-7 * gaussian_vector(s, 6);
    const Vec u0 = block_response(block, x).u;
    Vec u1 = block_response(block, (x + dx).normalized()).u;
    if (u1.dot(u0) < 0) u1 = -u1;
    CHECK((u1 - u0 - T * dx).norm() < 1e-3 * (T * dx).norm() + 1e-13);
  }

  TEST_CASE("degenerate spectrum is reported") {
    std::vector<Mat> block{Mat::Identity(2, 2), (Mat(2, 2) << 0, -1, 1, 0).finished()};
    const Vec x = (Vec(2) << 0.6, 0.8).finished();
    CHECK_THROWS_AS(sensitivity_eta(block, x), DegenerateSpectrum);
    CHECK(std::isinf(block_response(block, x).eta));
  }

  TEST_CASE("pruning keeps exactly the low-eta blocks") {
    const RotationBank bank = make_rotation_bank({6, "prune"}, 8, 40);
    Stream s = derive_stream({6, "prune-x"}, {});
    const Vec x = sample_uniform_sphere(s, 8);
    const RotationBank pruned = prune_bank(bank, x, 2.5);
    for (int k = 0; k < bank.K(); ++k) {
      const double eta = block_response(bank.Q[k], x).eta;
      CHECK(pruned.pruned[k] == !(eta < 2.5));
    }
    CHECK(pruned.retention() == doctest::Approx(pruned.active_blocks().size() / 40.0));
    CHECK(prune_bank(bank, x, std::numeric_limits<double>::infinity()).retention() == 1.0);
    CHECK_THROWS_AS(prune_bank(bank, x, 1e-9), AllBlocksPruned);
  }

  TEST_CASE("bank JSON regenerates the same rotations") {
    RotationBank bank = make_rotation_bank({7, "json"}, 4, 3, 5);
    bank.pruned[1] = true;
    const RotationBank copy = rotation_bank_from_json(to_json(bank));
    CHECK(copy.ids == bank.ids);
    CHECK(copy.pruned == bank.pruned);
    for (int k = 0; k < 3; ++k)
      for (int l = 0; l < 4; ++l) CHECK((copy.Q[k][l] - bank.Q[k][l]).norm() == 0.0);
  }
}
