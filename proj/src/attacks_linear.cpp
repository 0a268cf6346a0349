#include <chrono>
#include <cmath>

#include "cef/attacks.hpp"
#include "cef/kernels.hpp"

namespace cef {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

void AttackReport::score_against(const Vec& x) {
  if (x_hat.size() == x.size()) score = normalized_projection(x_hat, x);
  if (x_init.size() == x.size()) score_init = normalized_projection(x_init, x);
}

AttackReport invert_rp(const LinearBank& bank, std::span<const int> blocks, std::span<const Vec> outputs) {
  const auto t0 = Clock::now();
  require(bank.kind() == LinearKind::RP, "invert_rp: bank is not RP");
  require(blocks.size() == outputs.size(), "invert_rp: blocks/outputs size mismatch");
  const int rows = bank.spec().rows;
  const auto total = static_cast<Eigen::Index>(blocks.size()) * rows;
  Mat r(total, bank.N());
  Vec y(total);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    require(outputs[b].size() == rows, "invert_rp: output length mismatch");
    r.middleRows(static_cast<Eigen::Index>(b) * rows, rows) = bank.rp_block(blocks[b]);
    y.segment(static_cast<Eigen::Index>(b) * rows, rows) = outputs[b];
  }
  Eigen::ColPivHouseholderQR<Mat> qr(r);
  if (qr.rank() < bank.N()) {
    throw RankDeficient("invert_rp: stacked blocks have rank " + std::to_string(qr.rank()) + " < N = " +
                        std::to_string(bank.N()) + "; supply more outputs");
  }
  AttackReport rep;
  rep.x_hat = qr.solve(y);
  rep.x_init = rep.x_hat;
  rep.residual = (r * rep.x_hat - y).norm();
  rep.iterations = 1;
  rep.converged = true;
  rep.elapsed = seconds_since(t0);
  return rep;
}

AttackReport attack_drp1(const LinearBank& bank, int slot, const Vec& v, double rel_tol) {
  const auto t0 = Clock::now();
  require(bank.kind() == LinearKind::DRP1, "attack_drp1: bank is not DRP1");
  const int K = bank.spec().realizations;
  require(v.size() == K, "attack_drp1: need one observation per realization");
  require(K >= bank.N(), "attack_drp1: need K >= N realizations");
  double best = std::numeric_limits<double>::infinity();
  double runner_up = std::numeric_limits<double>::infinity();
  Vec best_x;
  int best_l = -1;
  Mat r(K, bank.N());
  for (int l = 0; l < bank.L(); ++l) {
    for (int k = 0; k < K; ++k) r.row(k) = bank.drp1_candidates(slot, k).row(l);
    Eigen::ColPivHouseholderQR<Mat> qr(r);
    const Vec x = qr.solve(v);
    const double res = (v - r * x).squaredNorm();
    if (res < best) {
      runner_up = best;
      best = res;
      best_x = x;
      best_l = l;
    } else if (res < runner_up) {
      runner_up = res;
    }
  }
  AttackReport rep;
  rep.x_hat = best_x;
  rep.x_init = best_x;
  rep.residual = best;
  rep.iterations = bank.L();
  rep.converged = best <= rel_tol * std::max(v.squaredNorm(), 1e-300);
  rep.note = "l*=" + std::to_string(best_l) + " runner_up_residual=" + std::to_string(runner_up);
  rep.elapsed = seconds_since(t0);
  return rep;
}

AttackReport attack_drp2(const LinearBank& bank, const Vec& v, const Drp2Options& opt) {
  const auto t0 = Clock::now();
  require(bank.kind() == LinearKind::DRP2, "attack_drp2: bank is not DRP2");
  const int K = bank.count();
  const int L = bank.L();
  const int n = bank.N();
  require(v.size() == K, "attack_drp2: need one observation per output");
  require(K >= n + 1, "attack_drp2: need K >= N + 1 observations");
  const auto& kt = kernels::active();
  const double vmax = v.cwiseAbs().maxCoeff();
  const double slack = opt.tol * std::max(vmax, 1e-300) + (bank.spec().quantize ? 0.5 * bank.spec().q : 0.0);

  // x ~ C^-1 y with C = (1/KL) sum_k s_k s_k^T, y = (1/K) sum_k v_k s_k,
  // s_k = sum_l r_{k,l}.
  Mat c = Mat::Zero(n, n);
  Vec y = Vec::Zero(n);
  {
    Mat s(n, K);
    for (int k = 0; k < K; ++k) {
      s.col(k) = bank.drp2_candidates(k).colwise().sum().transpose();
      y += v[k] * s.col(k);
    }
    kt.gram(s.data(), n, K, c.data());
    c /= static_cast<double>(K) * L;
    y /= static_cast<double>(K);
  }
  AttackReport rep;
  rep.x_init = c.ldlt().solve(y);
  Vec x = rep.x_init;

  Mat res(L, K);  // res(l, k) = v_k - r_{k,l}^T x
  auto residuals = [&](const Vec& xc) {
    for (int k = 0; k < K; ++k) {
      const Mat& ck = bank.drp2_candidates(k);
      kt.gemv(ck.data(), L, n, xc.data(), res.col(k).data());
      res.col(k) = v[k] - res.col(k).array();
    }
  };

  Mat hard(K, n);
  Mat scaled(n, static_cast<Eigen::Index>(K) * L);
  double sig2 = -1.0;
  for (int round = 0; round < opt.max_rounds; ++round) {
    rep.iterations = round + 1;
    residuals(x);
    // Hard selection and exactness check.
    for (int k = 0; k < K; ++k) {
      Eigen::Index l;
      res.col(k).cwiseAbs().minCoeff(&l);
      hard.row(k) = bank.drp2_candidates(k).row(l);
    }
    const Vec xh = hard.colPivHouseholderQr().solve(v);
    const double err = (hard * xh - v).cwiseAbs().maxCoeff();
    if (err <= slack) {
      rep.x_hat = xh;
      rep.residual = err;
      rep.converged = true;
      break;
    }
    rep.x_hat = xh;
    rep.residual = err;

    // Soft selection: weights proportional to exp(-res^2 / 2 sigma^2).
    if (sig2 < 0.0) sig2 = res.squaredNorm() / (static_cast<double>(K) * L);
    Vec b = Vec::Zero(n);
    Eigen::Index cols = 0;
    Mat p(L, K);
    for (int k = 0; k < K; ++k) {
      const auto e = (-res.col(k).array().square() / (2.0 * sig2));
      const double top = e.maxCoeff();
      p.col(k) = (e - top).exp();
      p.col(k) /= p.col(k).sum();
      const Mat& ck = bank.drp2_candidates(k);
      for (int l = 0; l < L; ++l) {
        const double w = p(l, k);
        if (w < 1e-14) continue;
        scaled.col(cols++) = std::sqrt(w) * ck.row(l).transpose();
        b += (w * v[k]) * ck.row(l).transpose();
      }
    }
    Mat a = Mat::Zero(n, n);
    kt.gram(scaled.data(), n, static_cast<std::size_t>(cols), a.data());
    x = a.ldlt().solve(b);
    residuals(x);
    sig2 = std::max((p.array() * res.array().square()).sum() / K, 1e-300);
  }
  rep.elapsed = seconds_since(t0);
  return rep;
}

double HopSubstitute::predict(const HopSpec& spec, int m) const {
  require(m >= 0 && m < spec.M, "HopSubstitute::predict: output index out of range");
  return spec.coeffs.row(m).dot(s);
}

HopSubstitute hop_substitute(const HopSpec& spec, std::span<const int> observed, const Vec& y) {
  require(static_cast<Eigen::Index>(observed.size()) == y.size(), "hop_substitute: observed/y size mismatch");
  const int cols = spec.J + 1;
  if (static_cast<int>(observed.size()) < cols) {
    throw RankDeficient("hop_substitute: need at least J + 1 = " + std::to_string(cols) + " outputs");
  }
  Mat c(static_cast<Eigen::Index>(observed.size()), cols);
  for (std::size_t i = 0; i < observed.size(); ++i) {
    require(observed[i] >= 0 && observed[i] < spec.M, "hop_substitute: output index out of range");
    c.row(static_cast<Eigen::Index>(i)) = spec.coeffs.row(observed[i]);
  }
  Eigen::ColPivHouseholderQR<Mat> qr(c);
  if (qr.rank() < cols) {
    throw RankDeficient("hop_substitute: coefficient rank " + std::to_string(qr.rank()) + " < J + 1 = " +
                        std::to_string(cols) + "; supply more outputs");
  }
  HopSubstitute sub;
  sub.s = qr.solve(y);
  sub.v = sub.s.tail(spec.J);
  sub.fit_residual = (c * sub.s - y).norm();
  return sub;
}

}  // namespace cef
