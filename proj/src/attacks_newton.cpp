#include <chrono>
#include <cmath>

#include "cef/attacks.hpp"
#include "cef/kernels.hpp"
#include "cef/parallel.hpp"
#include "cef/stats.hpp"

namespace cef {

namespace {

using Clock = std::chrono::steady_clock;

// Lower-triangular coordinates (i >= n), column by column.
struct TriIndex {
  std::vector<std::pair<int, int>> ij;
  explicit TriIndex(int N) {
    for (int n = 0; n < N; ++n) {
      for (int i = n; i < N; ++i) ij.emplace_back(i, n);
    }
  }
  int size() const { return static_cast<int>(ij.size()); }
};

Vec pack(const Mat& X, const TriIndex& t) {
  Vec p(t.size());
  for (int c = 0; c < t.size(); ++c) p[c] = X(t.ij[c].first, t.ij[c].second);
  return p;
}

Mat unpack(const Vec& p, const TriIndex& t, int N) {
  Mat X(N, N);
  for (int c = 0; c < t.size(); ++c) {
    const auto [i, n] = t.ij[c];
    X(i, n) = p[c];
    X(n, i) = p[c];
  }
  return X;
}

struct BlockState {
  Mat G;  // sum_l Q_l X Q_l^T
  Vec u;
  double c = 0.0;
};

struct Forward {
  std::vector<BlockState> blocks;
  Vec r;  // u_a^(i) - y
};

Forward forward_x(const RotationBank& bank, std::span<const int> blocks, const Mat& X, bool top, const Vec& y,
                  int Ny) {
  const auto N = X.rows();
  Forward f;
  f.blocks.resize(blocks.size());
  f.r.resize(static_cast<Eigen::Index>(blocks.size()) * Ny);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    BlockState& s = f.blocks[b];
    s.G = Mat::Zero(N, N);
    for (const Mat& q : bank.Q[blocks[b]]) s.G.noalias() += q * X * q.transpose();
    s.G = 0.5 * (s.G + s.G.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(s.G);
    const Eigen::Index j = top ? N - 1 : 0;
    s.u = es.eigenvectors().col(j);
    s.c = es.eigenvalues()[j];
    sign_normalize(s.u);
    f.r.segment(static_cast<Eigen::Index>(b) * Ny, Ny) = s.u.head(Ny) - y.segment(static_cast<Eigen::Index>(b) * Ny, Ny);
  }
  return f;
}

// Which end of the spectrum of X carries x: 1 - alpha = b = X_12 / (x_1 x_2).
Vec extract_x(const Mat& X, bool top) {
  Eigen::SelfAdjointEigenSolver<Mat> es(X);
  return top ? es.eigenvectors().col(X.rows() - 1) : es.eigenvectors().col(0);
}

}  // namespace

Mat structured_x(const Vec& x) {
  const auto N = x.size();
  require(N >= 2, "structured_x: N must be >= 2");
  const Vec xu = x / x.norm();
  const double x12 = xu[0] * xu[1];
  require(x12 != 0.0, "structured_x: needs x_1 x_2 != 0");
  const double b = 1.0 / x12;
  const double a = (1.0 - b) / static_cast<double>(N);
  return a * Mat::Identity(N, N) + b * xu * xu.transpose();
}

AttackReport newton_attack_svdcef(const RotationBank& bank, std::span<const int> blocks, const Vec& y, int Ny,
                                  const Vec& x_init, const NewtonOptions& opt, NewtonTrace* trace) {
  const auto t0 = Clock::now();
  const int N = bank.N;
  const int K = static_cast<int>(blocks.size());
  require(x_init.size() == N, "newton_attack_svdcef: dimension mismatch");
  require(Ny >= 1 && Ny < N, "newton_attack_svdcef: need 1 <= N_y < N");
  require(y.size() == static_cast<Eigen::Index>(K) * Ny, "newton_attack_svdcef: y must hold N_y entries per block");
  const int bound = N * (N + 1) / 2 - 1;
  if (Ny * K < bound) {
    throw InvalidInput("newton_attack_svdcef: N_y*K = " + std::to_string(Ny * K) + " < N(N+1)/2 - 1 = " +
                       std::to_string(bound));
  }
  for (int k : blocks) require(k >= 0 && k < bank.K(), "newton_attack_svdcef: block index out of range");

  const TriIndex tri(N);
  const int P = tri.size();
  const int nb = N - Ny;
  // b = [x_hat_0 (P - 1), u_b (nb K), z (K)]; rows = [trace, N per block, K norms].
  const int rows = 1 + N * K + K;
  const int cols = (P - 1) + nb * K + K;

  AttackReport rep;
  Mat X = structured_x(x_init);
  auto branch_for = [&](const Vec& x) {
    if (opt.branch == EigenBranch::Principal) return true;
    return x[0] * x[1] > 0.0;  // sign of 1 - alpha = 1/(x_1 x_2)
  };
  bool top = branch_for(x_init);
  rep.x_init = x_init / x_init.norm();

  Forward f = forward_x(bank, blocks, X, top, y, Ny);
  double rnorm = f.r.norm();
  std::vector<double> history{rnorm};
  int since_reproject = 0;

  Mat B(rows, cols);
  Mat A(rows, Ny * K);
  Mat Zn(N, N * N);  // Z_n = sum_l (Q_l^T u)_n Q_l, stored side by side
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    if (f.r.cwiseAbs().maxCoeff() < opt.tol) {
      rep.converged = true;
      break;
    }
    B.setZero();
    A.setZero();
    // Trace row: d Tr X = sum of diagonal coordinates. Column 1 (X_21) is fixed.
    for (int c = 0, col = 0; c < P; ++c) {
      if (c == 1) continue;
      if (tri.ij[c].first == tri.ij[c].second) B(0, col) = 1.0;
      ++col;
    }
    for (int k = 0; k < K; ++k) {
      const BlockState& s = f.blocks[k];
      Zn.setZero();
      for (const Mat& q : bank.Q[blocks[k]]) {
        const Vec w = q.transpose() * s.u;
        for (int n = 0; n < N; ++n) Zn.middleCols(n * N, N).noalias() += w[n] * q;
      }
      const int r0 = 1 + k * N;
      // Q_hat column for X(i, n): Z_n e_i (+ Z_i e_n off the diagonal).
      for (int c = 0, col = 0; c < P; ++c) {
        const auto [i, n] = tri.ij[c];
        Vec qc = Zn.col(n * N + i);
        if (i != n) qc += Zn.col(i * N + n);
        if (c == 1) continue;
        B.block(r0, col, N, 1) = qc;
        ++col;
      }
      const Mat g = s.G - s.c * Mat::Identity(N, N);
      // Known part of u (first Ny entries) goes to A, the rest to B.
      A.block(r0, k * Ny, N, Ny) = g.leftCols(Ny);
      B.block(r0, (P - 1) + k * nb, N, nb) = g.rightCols(nb);
      A.block(1 + N * K + k, k * Ny, 1, Ny) = s.u.head(Ny).transpose();
      B.block(1 + N * K + k, (P - 1) + k * nb, 1, nb) = s.u.tail(nb).transpose();
      B.block(r0, (P - 1) + nb * K + k, N, 1) = -s.u;
    }
    const Vec rhs = A * f.r;  // -A (u_a - u_a^(i)) with u_a - u_a^(i) = -r
    Eigen::ColPivHouseholderQR<Mat> qr(B);
    Vec d;
    if (qr.rank() < cols) {
      rep.regularized = true;
      const double mu = 1e-10 * std::max(1.0, B.squaredNorm());
      d = (B.transpose() * B + mu * Mat::Identity(cols, cols)).ldlt().solve(B.transpose() * rhs);
    } else {
      d = qr.solve(rhs);
    }
    // d solves B d = A r, i.e. d = B^+ A r = -B^+ A (u_a - u_a^(i)).
    Vec step(P);
    step[1] = 0.0;
    for (int c = 0, col = 0; c < P; ++c) {
      if (c == 1) continue;
      step[c] = d[col++];
    }
    const Vec p = pack(X, tri);
    double eta = opt.step;
    Mat Xn;
    Forward fn;
    for (;;) {
      Xn = unpack(p + eta * step, tri, N);
      Xn.diagonal().array() += (1.0 - Xn.trace()) / N;
      fn = forward_x(bank, blocks, Xn, top, y, Ny);
      if (!opt.backtracking || fn.r.norm() <= rnorm || eta <= opt.step_floor) break;
      eta *= 0.5;
    }
    if (!std::isfinite(fn.r.norm()) || !Xn.allFinite()) {
      rep.note = "diverged";
      break;
    }
    X = std::move(Xn);
    f = std::move(fn);
    rnorm = f.r.norm();
    history.push_back(rnorm);
    ++since_reproject;
    if (trace) {
      trace->max_trace_error = std::max(trace->max_trace_error, std::abs(X.trace() - 1.0));
      trace->max_x12_error = std::max(trace->max_x12_error, std::abs(X(1, 0) - 1.0));
      trace->max_asymmetry = std::max(trace->max_asymmetry, (X - X.transpose()).cwiseAbs().maxCoeff());
    }

    if (opt.reproject && f.r.cwiseAbs().maxCoeff() >= opt.tol) {
      bool plateau = false;
      const auto h = history.size();
      if (since_reproject >= opt.plateau_window && h > static_cast<std::size_t>(opt.plateau_window)) {
        const double old = history[h - 1 - opt.plateau_window];
        plateau = old > 0.0 && std::abs(old - rnorm) < opt.plateau_rel * old;
      }
      if (since_reproject >= opt.reproject_every || plateau) {
        const Vec xe = extract_x(X, top);
        if (xe[0] * xe[1] != 0.0) {
          X = structured_x(xe);
          top = branch_for(xe);
          f = forward_x(bank, blocks, X, top, y, Ny);
          rnorm = f.r.norm();
          history.push_back(rnorm);
        }
        since_reproject = 0;
      }
    }
  }
  if (!rep.converged && f.r.cwiseAbs().maxCoeff() < opt.tol) rep.converged = true;
  if (trace) trace->residual_norm = history;
  Vec xe = extract_x(X, top);
  rep.x_hat = xe;
  rep.iterations = it;
  rep.residual = f.r.cwiseAbs().maxCoeff();
  rep.elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
  return rep;
}

namespace {

double max_output_error(const RotationBank& bank, std::span<const int> blocks, const Vec& a, const Vec& b, int Ny) {
  const Vec ya = svdcef_forward(bank, a, blocks, Ny).y;
  const Vec yb = svdcef_forward(bank, b, blocks, Ny).y;
  if (ya.size() != yb.size()) return std::numeric_limits<double>::infinity();
  return (ya - yb).cwiseAbs().maxCoeff();
}

}  // namespace

std::vector<ConvergenceRow> convergence_probability_experiment(const ConvergenceConfig& cfg) {
  const int N = cfg.N;
  const int K = cfg.K > 0 ? cfg.K : N * (N + 1) / 2;
  require(N >= 2 && cfg.Ny >= 1 && cfg.Ny < N, "convergence experiment: need 1 <= N_y < N");
  require(cfg.trials >= 1 && cfg.holdout_factor >= 1 && !cfg.radii.empty(), "convergence experiment: bad config");
  for (double r : cfg.radii) require(r > 0.0 && r < 1.0, "convergence experiment: r must be in (0, 1)");
  const int bound = N * (N + 1) / 2 - 1;
  if (cfg.Ny * K < bound) {
    throw InvalidInput("convergence experiment: N_y*K = " + std::to_string(cfg.Ny * K) + " < N(N+1)/2 - 1 = " +
                       std::to_string(bound));
  }
  const auto nr = cfg.radii.size();
  struct Trial {
    std::vector<char> ok, ok_star;
    std::vector<int> iterations;
  };
  std::vector<int> known(K), held(static_cast<std::size_t>(cfg.holdout_factor) * K);
  for (int k = 0; k < K; ++k) known[k] = k;
  for (std::size_t k = 0; k < held.size(); ++k) held[k] = K + static_cast<int>(k);

  auto trials = parallel_map<Trial>(cfg.trials, cfg.workers, [&](int t) {
    const auto tu = static_cast<std::uint64_t>(t);
    Stream sx = derive_stream({cfg.seed, "newton.x"}, {tu});
    const Vec x = sample_uniform_sphere(sx, N);
    const RotationBank bank =
        make_rotation_bank({cfg.seed, "newton.Q." + std::to_string(t)}, N, K * (1 + cfg.holdout_factor));
    const Vec y = svdcef_forward(bank, x, known, cfg.Ny).y;
    Trial out;
    for (std::size_t ri = 0; ri < nr; ++ri) {
      const double r = cfg.radii[ri];
      Stream sw = derive_stream({cfg.seed, "newton.w"}, {tu, ri});
      const Vec w = sample_orthogonal_unit(sw, x);
      const Vec x0 = std::sqrt(1.0 - r * r) * x + r * w;
      bool ok = false, ok_star = false;
      int iters = 0;
      try {
        const AttackReport rep = newton_attack_svdcef(bank, known, y, cfg.Ny, x0, cfg.newton);
        iters = rep.iterations;
        if (rep.x_hat.allFinite() && rep.x_hat.norm() > 0.0) {
          const Vec yh = svdcef_forward(bank, rep.x_hat, known, cfg.Ny).y;
          ok = yh.size() == y.size() && (yh - y).cwiseAbs().maxCoeff() <= cfg.match_tol;
          ok_star = ok && max_output_error(bank, held, rep.x_hat, x, cfg.Ny) <= cfg.match_tol;
        }
      } catch (const DegenerateSpectrum&) {
      } catch (const InvalidInput&) {
        // x0 with x_1 x_2 = 0 cannot seed the structured start.
      }
      out.ok.push_back(ok);
      out.ok_star.push_back(ok_star);
      out.iterations.push_back(iters);
    }
    return out;
  });

  std::vector<ConvergenceRow> rows(nr);
  for (std::size_t ri = 0; ri < nr; ++ri) {
    auto& row = rows[ri];
    row.r = cfg.radii[ri];
    row.bound = std::pow(row.r, N - 1);
    row.trials = cfg.trials;
    int star = 0;
    double iters = 0.0;
    for (const auto& t : trials) {
      row.successes += t.ok[ri];
      star += t.ok_star[ri];
      iters += t.iterations[ri];
    }
    row.p = static_cast<double>(row.successes) / cfg.trials;
    row.p_star = static_cast<double>(star) / cfg.trials;
    row.mean_iterations = iters / cfg.trials;
  }
  return rows;
}

}  // namespace cef
