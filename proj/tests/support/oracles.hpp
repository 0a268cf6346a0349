#pragma once
// Independent reference implementations used only by the tests. Nothing here
// calls into the library's numerical code paths.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Cyclic Jacobi rotations. Eigenvalues ascending, eigenvectors as columns.
inline std::pair<Vec, Mat> jacobi_eigen(Mat a, int sweeps = 100) {
  const auto n = a.rows();
  Mat v = Mat::Identity(n, n);
  for (int s = 0; s < sweeps; ++s) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30 * std::max(1.0, a.squaredNorm())) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s2 = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s2 * akq;
          a(k, q) = s2 * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s2 * aqk;
          a(q, k) = s2 * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s2 * vkq;
          v(k, q) = s2 * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Eigen::Index> idx(n);
  for (Eigen::Index i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](auto i, auto j) { return a(i, i) < a(j, j); });
  Vec w(n);
  Mat vs(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w[i] = a(idx[i], idx[i]);
    vs.col(i) = v.col(idx[i]);
  }
  return {w, vs};
}

// Largest-magnitude entry positive, first index on ties.
inline Vec sign_fix(Vec u) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < u.size(); ++i)
    if (std::abs(u[i]) > std::abs(u[best])) best = i;
  return u[best] < 0 ? Vec(-u) : u;
}

// Principal eigenvector of sum_l (Q_l x)(Q_l x)^T via Jacobi.
inline Vec svd_cef_u(const std::vector<Mat>& block, const Vec& x) {
  const auto n = x.size();
  Mat g = Mat::Zero(n, n);
  for (const Mat& q : block) {
    const Vec c = q * x;
    g += c * c.transpose();
  }
  auto [w, v] = jacobi_eigen(g);
  return sign_fix(v.col(n - 1));
}

// Composite 8-point Gauss-Legendre on [a, b].
inline double gauss_legendre(const std::function<double(double)>& f, double a, double b, int panels = 64) {
  static const double x[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363};
  static const double w[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
  const double h = (b - a) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h, half = 0.5 * h;
    double acc = 0.0;
    for (int i = 0; i < 4; ++i) acc += w[i] * (f(mid - half * x[i]) + f(mid + half * x[i]));
    total += half * acc;
  }
  return total;
}

// Density of one coordinate of a uniform unit vector in R^n, written out
// directly from the surface-area ratio.
inline double sphere_coordinate_density(int n, double x) {
  if (std::abs(x) >= 1.0) return 0.0;
  const double c = std::tgamma(0.5 * n) / (std::sqrt(std::numbers::pi) * std::tgamma(0.5 * (n - 1)));
  return c * std::pow(1.0 - x * x, 0.5 * (n - 3));
}

// P(X <= y) by quadrature in theta = asin(x); the density times dx/dtheta is
// c cos^(n-2)(theta), smooth on the whole interval.
inline double sphere_coordinate_cdf(int n, double y) {
  if (y <= -1.0) return 0.0;
  if (y >= 1.0) return 1.0;
  const double c = std::tgamma(0.5 * n) / (std::sqrt(std::numbers::pi) * std::tgamma(0.5 * (n - 1)));
  auto g = [n, c](double th) { return c * std::pow(std::cos(th), n - 2); };
  return gauss_legendre(g, -std::numbers::pi / 2, std::asin(y));
}

// One-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

// Asymptotic Kolmogorov tail probability P(D_n > d).
inline double ks_pvalue(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lam = (sn + 0.12 + 0.11 / sn) * d;
  if (lam < 1e-3) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lam * lam);
    sum += term;
    if (std::abs(term) < 1e-12) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// |p_hat - p| <= k sigma for a binomial proportion.
// Two-sided z such that `tests` checks at this z share the false alarm rate of one check at `k`.
inline double bonferroni_sigma(double k, int tests) {
  const double target = std::erfc(k / std::sqrt(2.0)) / tests;
  double lo = k, hi = k + 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (std::erfc(mid / std::sqrt(2.0)) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline bool within_binomial(long hits, long n, double p, double k = 3.0) {
  const double ph = static_cast<double>(hits) / n;
  return std::abs(ph - p) <= k * std::sqrt(p * (1.0 - p) / n);
}

}  // namespace oracle
