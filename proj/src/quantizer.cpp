#include "cef/quantizer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "cef/cef_nonlinear.hpp"
#include "cef/keystream.hpp"
#include "cef/parallel.hpp"
#include "cef/stats.hpp"
#include "cef/svd_cef.hpp"

namespace cef {

namespace {

bool power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

int log2i(int v) { return std::countr_zero(static_cast<unsigned>(v)); }

double bisect_quantile(int n, double p) {
  double lo = -1.0, hi = 1.0;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (sphere_marginal_cdf(n, mid) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

int QuantizerTable::coarse_bits() const { return log2i(levels); }

QuantizerTable build_table(int N, int levels, int L_y) {
  require(N >= 2, "build_table: N must be >= 2");
  require(power_of_two(levels) && power_of_two(L_y), "build_table: level counts must be powers of 2");
  QuantizerTable t;
  t.N = N;
  t.levels = levels;
  t.L_y = L_y;
  const int m = t.M();
  t.boundaries.resize(m);
  t.boundaries[0] = -1.0;
  for (int i = 1; i < m; ++i) t.boundaries[i] = bisect_quantile(N, static_cast<double>(i) / m);
  return t;
}

nlohmann::json to_json(const QuantizerTable& t) {
  return {{"N", t.N}, {"levels", t.levels}, {"L_y", t.L_y}, {"boundaries", t.boundaries}};
}

QuantizerTable quantizer_table_from_json(const nlohmann::json& j) {
  QuantizerTable t;
  t.N = j.at("N").get<int>();
  t.levels = j.at("levels").get<int>();
  t.L_y = j.at("L_y").get<int>();
  t.boundaries = j.at("boundaries").get<std::vector<double>>();
  require(static_cast<int>(t.boundaries.size()) == t.M(), "quantizer table: boundary count mismatch");
  require(std::is_sorted(t.boundaries.begin(), t.boundaries.end()), "quantizer table: boundaries not sorted");
  return t;
}

std::uint32_t gray(std::uint32_t value, int bits) {
  require(bits >= 0 && bits <= 31 && value < (1u << bits), "gray: value out of range");
  return value ^ (value >> 1);
}

std::uint32_t gray_inverse(std::uint32_t code, int bits) {
  require(bits >= 0 && bits <= 31 && code < (1u << bits), "gray_inverse: code out of range");
  std::uint32_t v = code;
  for (std::uint32_t s = code >> 1; s != 0; s >>= 1) v ^= s;
  return v;
}

int fine_index(const QuantizerTable& t, double y) {
  require(y >= -1.0 && y <= 1.0, "quantize: y outside [-1, 1]");
  const auto it = std::upper_bound(t.boundaries.begin(), t.boundaries.end(), y);
  return std::max(0, static_cast<int>(it - t.boundaries.begin()) - 1);
}

HelperData quantize_alice(const QuantizerTable& t, double y) {
  const int i = fine_index(t, y);
  HelperData h;
  h.m = i / t.L_y;
  h.j = i % t.L_y;
  h.code = gray(static_cast<std::uint32_t>(h.m), t.coarse_bits());
  return h;
}

int decode_bob(const QuantizerTable& t, double y_prime, int j) {
  require(j >= 0 && j < t.L_y, "decode_bob: helper out of range");
  const double yc = std::clamp(y_prime, -1.0, 1.0);
  const double u = t.M() * sphere_marginal_cdf(t.N, yc);
  // |u - (m L + j + 1/2)| is minimized at the nearest integer to (u - j - 1/2) / L.
  const double m = std::round((u - j - 0.5) / t.L_y);
  return static_cast<int>(std::clamp(m, 0.0, static_cast<double>(t.levels - 1)));
}

std::uint32_t decode_bob_code(const QuantizerTable& t, double y_prime, int j) {
  return gray(static_cast<std::uint32_t>(decode_bob(t, y_prime, j)), t.coarse_bits());
}

namespace {

struct BerTrial {
  std::vector<long> err_svd, err_iom, flips;
  long bits_svd = 0, bits_iom = 0;
  long blocks_svd = 0;
  double retention = 0.0;
};

}  // namespace

std::vector<BerRow> ber_experiment(const BerConfig& cfg) {
  require(power_of_two(cfg.N), "ber_experiment: N must be a power of 2");
  require(cfg.trials >= 1 && cfg.noise_draws >= 1 && !cfg.sigmas.empty(), "ber_experiment: bad config");
  for (double s : cfg.sigmas) require(s >= 0.0, "ber_experiment: sigma must be >= 0");
  const int n = cfg.N;
  const int K = cfg.blocks > 0 ? cfg.blocks : n;
  const int bits = log2i(n);
  const auto ns = cfg.sigmas.size();
  const QuantizerTable table = build_table(n, n, cfg.L_y);

  auto trials = parallel_map<BerTrial>(cfg.trials, cfg.workers, [&](int t) {
    const auto tu = static_cast<std::uint64_t>(t);
    BerTrial out;
    out.err_svd.assign(ns, 0);
    out.err_iom.assign(ns, 0);
    out.flips.assign(ns, 0);

    Stream sx = derive_stream({cfg.seed, "ber.x"}, {tu});
    const Vec x = gaussian_vector(sx, n);

    // SVD-CEF enrollment: prune by eta at Alice's x, Bob reuses the list.
    const RotationBank bank = make_rotation_bank({cfg.seed, "ber.Q." + std::to_string(t)}, n, K);
    const Vec xu = x.normalized();
    std::vector<int> kept;
    std::vector<Vec> u_alice;
    std::vector<HelperData> h_svd;
    for (int k = 0; k < K; ++k) {
      const BlockResponse r = block_response(bank.Q[k], xu);
      if (!(r.eta < cfg.eta_max)) continue;
      kept.push_back(k);
      u_alice.push_back(r.u);
      h_svd.push_back(quantize_alice(table, r.u[0]));
    }
    out.retention = static_cast<double>(kept.size()) / K;

    IomBankSpec ispec;
    ispec.variant = IomVariant::IoM2;
    ispec.N = n;
    ispec.K = K;
    ispec.p = n;
    ispec.key = {cfg.seed, "ber.iom2." + std::to_string(t)};
    const IomBank ibank(ispec);
    const std::vector<int> c_alice = iom_outputs(ibank, x);

    for (std::size_t si = 0; si < ns; ++si) {
      const double sigma = cfg.sigmas[si];
      for (int d = 0; d < cfg.noise_draws; ++d) {
        Stream sw = derive_stream({cfg.seed, "ber.w"}, {tu, si, static_cast<std::uint64_t>(d)});
        const Vec xb = x + sigma * gaussian_vector(sw, n);
        const Vec xbu = xb.normalized();
        for (std::size_t b = 0; b < kept.size(); ++b) {
          const BlockResponse r = block_response(bank.Q[kept[b]], xbu);
          if (r.u.dot(u_alice[b]) < 0.0) ++out.flips[si];
          const std::uint32_t code = decode_bob_code(table, r.u[0], h_svd[b].j);
          out.err_svd[si] += std::popcount(code ^ h_svd[b].code);
        }
        const std::vector<int> c_bob = iom_outputs(ibank, xb);
        for (int k = 0; k < K; ++k) {
          const auto a = gray(static_cast<std::uint32_t>(c_alice[k]), bits);
          const auto bb = gray(static_cast<std::uint32_t>(c_bob[k]), bits);
          out.err_iom[si] += std::popcount(a ^ bb);
        }
      }
    }
    out.blocks_svd = static_cast<long>(kept.size()) * cfg.noise_draws;
    out.bits_svd = out.blocks_svd * bits;
    out.bits_iom = static_cast<long>(K) * cfg.noise_draws * bits;
    return out;
  });

  std::vector<BerRow> rows(ns);
  long bits_svd = 0, bits_iom = 0, blocks_svd = 0;
  double retention = 0.0;
  for (const auto& t : trials) {
    bits_svd += t.bits_svd;
    bits_iom += t.bits_iom;
    blocks_svd += t.blocks_svd;
    retention += t.retention;
  }
  for (std::size_t si = 0; si < ns; ++si) {
    long es = 0, ei = 0, fl = 0;
    for (const auto& t : trials) {
      es += t.err_svd[si];
      ei += t.err_iom[si];
      fl += t.flips[si];
    }
    auto& row = rows[si];
    row.sigma = cfg.sigmas[si];
    row.bits_svd = bits_svd;
    row.bits_iom2 = bits_iom;
    row.ber_svd = bits_svd > 0 ? static_cast<double>(es) / bits_svd : 0.0;
    row.ber_iom2 = bits_iom > 0 ? static_cast<double>(ei) / bits_iom : 0.0;
    row.sign_flip_rate = blocks_svd > 0 ? static_cast<double>(fl) / blocks_svd : 0.0;
    row.retention = retention / cfg.trials;
  }
  return rows;
}

}  // namespace cef
