#include "cef/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cef/parallel.hpp"

namespace cef {

Vec sample_uniform_sphere(Stream& s, int n) {
  require(n >= 2, "sample_uniform_sphere: n must be >= 2");
  for (;;) {
    Vec v = gaussian_vector(s, n);
    const double norm = v.norm();
    if (norm > 1e-300) return v / norm;
  }
}

Vec sample_orthogonal_unit(Stream& s, const Vec& x) {
  const double xn = x.norm();
  require(xn > 0.0 && x.size() >= 2, "sample_orthogonal_unit: need a nonzero x with n >= 2");
  const Vec xu = x / xn;
  for (;;) {
    Vec w = gaussian_vector(s, static_cast<int>(x.size()));
    w -= xu.dot(w) * xu;
    const double norm = w.norm();
    if (norm > 1e-12) return w / norm;
  }
}

double sphere_normalizer(int n) {
  require(n >= 2, "sphere_normalizer: n must be >= 2");
  return std::exp(std::lgamma(0.5 * n) - std::lgamma(0.5 * (n - 1))) / std::sqrt(std::numbers::pi);
}

double sphere_marginal_pdf(int n, double x) {
  if (x <= -1.0 || x >= 1.0) return 0.0;
  return sphere_normalizer(n) * std::pow(1.0 - x * x, 0.5 * (n - 3));
}

double sphere_marginal_cdf(int n, double y) {
  require(n >= 2, "sphere_marginal_cdf: n must be >= 2");
  if (y <= -1.0) return 0.0;
  if (y >= 1.0) return 1.0;
  const double th = std::asin(y);
  const double c = std::cos(th);
  const double s = std::sin(th);
  const int m = n - 2;
  // I_j = int_{-pi/2}^{th} cos^j
  double prev = th + std::numbers::pi / 2;  // I_0
  double cur = s + 1.0;                     // I_1
  if (m == 0) return sphere_normalizer(n) * prev;
  double cpow = 1.0;  // cos^{j-1} for j = 2 starts at cos^1
  double even = prev, odd = cur;
  // Run the two parities separately: I_j depends on I_{j-2}.
  for (int j = 2; j <= m; ++j) {
    cpow *= c;
    double& slot = (j % 2 == 0) ? even : odd;
    slot = cpow * s / j + static_cast<double>(j - 1) / j * slot;
  }
  const double v = (m % 2 == 0) ? even : odd;
  return std::clamp(sphere_normalizer(n) * v, 0.0, 1.0);
}

HistogramDensity::HistogramDensity(int bins) {
  require(bins >= 1, "HistogramDensity: bins must be >= 1");
  edges.resize(bins + 1);
  for (int b = 0; b <= bins; ++b) edges[b] = -1.0 + 2.0 * b / bins;
  counts.assign(bins, 0);
}

void HistogramDensity::add(double v) {
  const int nb = bins();
  int b = static_cast<int>(std::floor((v + 1.0) * 0.5 * nb));
  b = std::clamp(b, 0, nb - 1);
  ++counts[b];
  ++total;
}

void HistogramDensity::merge(const HistogramDensity& other) {
  require(other.bins() == bins(), "HistogramDensity::merge: bin mismatch");
  for (int b = 0; b < bins(); ++b) counts[b] += other.counts[b];
  total += other.total;
}

double kl_to_sphere_marginal(const HistogramDensity& h, int n) {
  require(h.total > 0, "kl_to_sphere_marginal: empty histogram");
  const double floor = 1.0 / (10.0 * static_cast<double>(h.total));
  double d = 0.0;
  double lo = sphere_marginal_cdf(n, h.edges[0]);
  for (int b = 0; b < h.bins(); ++b) {
    const double hi = sphere_marginal_cdf(n, h.edges[b + 1]);
    const double p = hi - lo;
    lo = hi;
    if (p <= 0.0) continue;
    const double q = std::max(static_cast<double>(h.counts[b]) / h.total, floor);
    d += p * std::log(p / q);
  }
  return d;
}

double MeanStd::se() const { return count > 0 ? std / std::sqrt(static_cast<double>(count)) : 0.0; }

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd out;
  out.count = static_cast<long>(v.size());
  if (v.empty()) return out;
  double s = 0.0;
  for (double x : v) s += x;
  out.mean = s / v.size();
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / (v.size() - 1));
  }
  return out;
}

namespace {

struct RhoTriple {
  double rho = 0.0, rho_star = 0.0, rho_id = 0.0;
};

double scaled_max_abs(const Mat& s, double count, int n) {
  return n * s.cwiseAbs().maxCoeff() / count;
}

// Draw sphere-uniform x for block k until eta < eta_max; gives up after cap draws.
bool draw_accepted(Stream& sx, std::span<const Mat> block, int n, double eta_max, int cap, Vec& x,
                   BlockResponse& r) {
  for (int a = 0; a < cap; ++a) {
    x = sample_uniform_sphere(sx, n);
    r = block_response(block, x);
    if (r.eta < eta_max) return true;
  }
  return false;
}

}  // namespace

CorrelationResult correlation_rho(const CorrelationConfig& cfg) {
  require(cfg.N >= 2 && cfg.banks >= 1 && cfg.trials >= 1, "correlation_rho: bad config");
  const int n = cfg.N;
  const KeyMaterial qkey{cfg.seed, "stats.corr.Q"};
  const KeyMaterial xkey{cfg.seed, "stats.corr.x"};
  const KeyMaterial ukey{cfg.seed, "stats.corr.ustar"};
  auto per_bank = parallel_map<RhoTriple>(cfg.banks, cfg.workers, [&](int k) {
    const auto block = make_rotation_block(qkey, n, k);
    Stream sx = derive_stream(xkey, {static_cast<std::uint64_t>(k)});
    Stream su = derive_stream(ukey, {static_cast<std::uint64_t>(k)});
    Mat s = Mat::Zero(n, n), s_star = Mat::Zero(n, n), s_id = Mat::Zero(n, n);
    long accepted = 0;
    Vec x;
    BlockResponse r;
    for (int t = 0; t < cfg.trials; ++t) {
      if (!draw_accepted(sx, block, n, cfg.eta_max, 1000, x, r)) break;
      const Vec us = sample_uniform_sphere(su, n);
      s.noalias() += x * r.u.transpose();
      s_star.noalias() += x * us.transpose();
      s_id.noalias() += x * x.transpose();
      ++accepted;
    }
    require(accepted > 0, "correlation_rho: no accepted inputs for a block");
    const double c = static_cast<double>(accepted);
    return RhoTriple{scaled_max_abs(s, c, n), scaled_max_abs(s_star, c, n), scaled_max_abs(s_id, c, n)};
  });
  CorrelationResult out;
  std::vector<double> id;
  for (const auto& t : per_bank) {
    out.rho.push_back(t.rho);
    out.rho_star.push_back(t.rho_star);
    id.push_back(t.rho_id);
  }
  out.rho_stats = mean_std(out.rho);
  out.rho_star_stats = mean_std(out.rho_star);
  out.rho_identity_stats = mean_std(id);
  return out;
}

KlResult kl_distance(const KlConfig& cfg) {
  require(cfg.N >= 2 && cfg.banks >= 1 && cfg.directions >= 1 && cfg.trials >= 1 && cfg.bins >= 2,
          "kl_distance: bad config");
  const int n = cfg.N;
  const KeyMaterial qkey{cfg.seed, "stats.kl.Q"};
  const KeyMaterial xkey{cfg.seed, "stats.kl.x"};
  const KeyMaterial vkey{cfg.seed, "stats.kl.v"};
  const KeyMaterial ckey{cfg.seed, "stats.kl.control"};
  struct PerBank {
    std::vector<double> d, control;
  };
  auto per_bank = parallel_map<PerBank>(cfg.banks, cfg.workers, [&](int k) {
    const auto block = make_rotation_block(qkey, n, k);
    const auto ku = static_cast<std::uint64_t>(k);
    Stream sv = derive_stream(vkey, {ku});
    std::vector<Vec> dirs;
    for (int j = 0; j < cfg.directions; ++j) dirs.push_back(sample_uniform_sphere(sv, n));
    std::vector<HistogramDensity> hist(cfg.directions, HistogramDensity(cfg.bins));
    Stream sx = derive_stream(xkey, {ku});
    Vec x;
    BlockResponse r;
    for (int t = 0; t < cfg.trials; ++t) {
      if (!draw_accepted(sx, block, n, cfg.eta_max, 1000, x, r)) break;
      for (int j = 0; j < cfg.directions; ++j) hist[j].add(dirs[j].dot(r.u));
    }
    PerBank out;
    for (int j = 0; j < cfg.directions; ++j) {
      out.d.push_back(kl_to_sphere_marginal(hist[j], n));
      // Control: the same number of draws from the target law itself.
      Stream sc = derive_stream(ckey, {ku, static_cast<std::uint64_t>(j)});
      HistogramDensity hc(cfg.bins);
      for (long t = 0; t < hist[j].total; ++t) hc.add(sample_uniform_sphere(sc, n)[0]);
      out.control.push_back(kl_to_sphere_marginal(hc, n));
    }
    return out;
  });
  KlResult out;
  for (const auto& b : per_bank) {
    out.d.insert(out.d.end(), b.d.begin(), b.d.end());
    out.control.insert(out.control.end(), b.control.begin(), b.control.end());
  }
  out.d_stats = mean_std(out.d);
  out.control_stats = mean_std(out.control);
  return out;
}

std::vector<DistanceProfileRow> global_distance_profile(const DistanceProfileConfig& cfg) {
  require(cfg.N >= 2 && cfg.trials >= 1 && !cfg.alphas.empty(), "global_distance_profile: bad config");
  for (double a : cfg.alphas) require(a > 0.0 && a <= 1.0, "global_distance_profile: alpha must be in (0, 1]");
  const int n = cfg.N;
  const auto na = cfg.alphas.size();
  const KeyMaterial qkey{cfg.seed, "stats.profile.Q"};
  const KeyMaterial xkey{cfg.seed, "stats.profile.x"};
  const KeyMaterial wkey{cfg.seed, "stats.profile.w"};
  struct PerTrial {
    bool ok = false;
    double eta = 0.0;
    std::vector<double> du;
  };
  auto trials = parallel_map<PerTrial>(cfg.trials, cfg.workers, [&](int t) {
    const auto tu = static_cast<std::uint64_t>(t);
    const auto block = make_rotation_block(qkey, n, t);
    Stream sx = derive_stream(xkey, {tu});
    Stream sw = derive_stream(wkey, {tu});
    PerTrial out;
    Vec x;
    BlockResponse r;
    if (!draw_accepted(sx, block, n, cfg.eta_max, 1000, x, r)) return out;
    out.ok = true;
    out.eta = r.eta;
    for (double a : cfg.alphas) {
      const Vec w = sample_orthogonal_unit(sw, x);
      const Vec xp = std::sqrt(1.0 - a) * x + std::sqrt(a) * w;
      const Vec up = block_response(block, xp).u;
      out.du.push_back(std::min((up - r.u).norm(), (up + r.u).norm()));
    }
    return out;
  });
  std::vector<DistanceProfileRow> rows(na);
  double eta_sq = 0.0;
  long used = 0;
  std::vector<std::vector<double>> ratios(na);
  for (const auto& t : trials) {
    if (!t.ok) continue;
    ++used;
    eta_sq += t.eta * t.eta;
    for (std::size_t i = 0; i < na; ++i) {
      const double a = cfg.alphas[i];
      const double dx = std::sqrt(2.0 - 2.0 * std::sqrt(1.0 - a));
      ratios[i].push_back(t.du[i] / dx);
      rows[i].max_du = std::max(rows[i].max_du, t.du[i]);
    }
  }
  require(used > 0, "global_distance_profile: no accepted trials");
  for (std::size_t i = 0; i < na; ++i) {
    auto& row = rows[i];
    row.alpha = cfg.alphas[i];
    row.dx = std::sqrt(2.0 - 2.0 * std::sqrt(1.0 - row.alpha));
    row.ratio = mean_std(ratios[i]);
    double sq = 0.0;
    for (double v : ratios[i]) sq += v * v;
    row.ratio_rms = std::sqrt(sq / ratios[i].size());
    row.eta_rms = std::sqrt(eta_sq / used);
  }
  return rows;
}

}  // namespace cef
