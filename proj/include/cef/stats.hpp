#pragma once
// Distributional analyses of SVD-CEF outputs: the marginal law of one
// coordinate of a uniform unit vector, input/output correlation, KL distance
// to that marginal, and the global |du|/|dx| profile.

#include <vector>

#include "cef/keystream.hpp"
#include "cef/svd_cef.hpp"
#include "cef/types.hpp"

namespace cef {

// Gaussian vector normalized to unit length; n >= 2.
Vec sample_uniform_sphere(Stream& s, int n);
// Uniform unit vector orthogonal to x.
Vec sample_orthogonal_unit(Stream& s, const Vec& x);

// C_n = Gamma(n/2) / (sqrt(pi) Gamma((n-1)/2)).
double sphere_normalizer(int n);
// C_n (1 - x^2)^((n-3)/2) on [-1, 1].
double sphere_marginal_pdf(int n, double x);
// Integral of the density from -1 to y, through the cos-power recursion
// with y = sin(theta).
double sphere_marginal_cdf(int n, double y);

struct HistogramDensity {
  std::vector<double> edges;  // bins + 1 edges spanning [-1, 1]
  std::vector<long> counts;
  long total = 0;

  explicit HistogramDensity(int bins);
  void add(double v);
  void merge(const HistogramDensity& other);
  int bins() const { return static_cast<int>(counts.size()); }
};

// sum_b P_b ln(P_b / Phat_b), where P_b is the exact marginal mass of bin b and
// Phat_b the empirical frequency floored at 1/(10 * total).
double kl_to_sphere_marginal(const HistogramDensity& h, int n);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  long count = 0;
  double se() const;
};
MeanStd mean_std(const std::vector<double>& v);

struct CorrelationConfig {
  int N = 8;
  int banks = 50;     // blocks k, one Haar block each
  int trials = 2000;  // accepted x per block
  double eta_max = 2.5;
  std::uint64_t seed = 1;
  int workers = 0;
};

struct CorrelationResult {
  std::vector<double> rho;       // per block
  std::vector<double> rho_star;  // per block
  MeanStd rho_stats, rho_star_stats;
  // rho with u forced to x (calibration; should be near 1).
  MeanStd rho_identity_stats;
};

// rho_k = N max_ij |mean_x (x u_k^T)_ij| over sphere-uniform x with
// eta_{k,x} < eta_max; rho*_k uses an independent uniform u.
CorrelationResult correlation_rho(const CorrelationConfig& cfg);

struct KlConfig {
  int N = 8;
  int banks = 10;
  int directions = 5;  // v per block
  int trials = 20000;  // accepted x per block
  int bins = 64;
  double eta_max = 2.5;
  std::uint64_t seed = 1;
  int workers = 0;
};

struct KlResult {
  std::vector<double> d;        // per (block, v)
  std::vector<double> control;  // same-size samples drawn from the marginal itself
  MeanStd d_stats, control_stats;
};

KlResult kl_distance(const KlConfig& cfg);

struct DistanceProfileConfig {
  int N = 8;
  std::vector<double> alphas{1e-8, 1e-4, 1e-2, 0.1, 0.5, 1.0};
  int trials = 2000;
  double eta_max = 2.5;
  std::uint64_t seed = 1;
  int workers = 0;
};

struct DistanceProfileRow {
  double alpha = 0.0;
  double dx = 0.0;  // sqrt(2 - 2 sqrt(1 - alpha))
  MeanStd ratio;    // |du| / |dx|
  double ratio_rms = 0.0;
  double eta_rms = 0.0;  // sqrt(mean eta^2) over the same (x, k)
  double max_du = 0.0;
};

// x' = sqrt(1 - alpha) x + sqrt(alpha) w with w uniform in x-perp;
// |du| = min(|u' - u|, |u' + u|).
std::vector<DistanceProfileRow> global_distance_profile(const DistanceProfileConfig& cfg);

}  // namespace cef
