#include "cef/cef_nonlinear.hpp"

#include <cmath>

#include "cef/kernels.hpp"

namespace cef {

namespace {

constexpr std::uint64_t kTagExponents = 1;
constexpr std::uint64_t kTagCoeffs = 2;
constexpr std::uint64_t kTagProjection = 3;
constexpr std::uint64_t kTagPermutation = 4;

void check_hop_input(const HopSpec& spec, const Vec& x) {
  require(x.size() == spec.N, "hop: dimension mismatch");
  require(spec.d_max <= 6, "hop: d_max must be <= 6");
  require(x.cwiseAbs().maxCoeff() <= 2.0, "hop: |x|_inf must be <= 2");
}

}  // namespace

HopSpec make_hop_spec(const KeyMaterial& key, int N, int M, int J, int d_max) {
  require(N >= 1 && M >= 1, "make_hop_spec: N and M must be >= 1");
  require(d_max >= 0 && d_max <= 6, "make_hop_spec: d_max must be in 0..6");
  if (J < 0) J = 2 * N;
  HopSpec spec;
  spec.N = N;
  spec.M = M;
  spec.J = J;
  spec.d_max = d_max;
  spec.exponents = Eigen::MatrixXi::Zero(J + 1, N);
  Stream se = derive_stream(key, {kTagExponents});
  for (int j = 1; j <= J; ++j) {
    for (int n = 0; n < N; ++n) spec.exponents(j, n) = static_cast<int>(se.below(d_max + 1));
  }
  Stream sc = derive_stream(key, {kTagCoeffs});
  spec.coeffs = gaussian_matrix(sc, M, J + 1);
  return spec;
}

Vec hop_monomials(const HopSpec& spec, const Vec& x) {
  check_hop_input(spec, x);
  Vec v(spec.J + 1);
  for (int j = 0; j <= spec.J; ++j) {
    double t = 1.0;
    for (int n = 0; n < spec.N; ++n) {
      for (int e = 0; e < spec.exponents(j, n); ++e) t *= x[n];
    }
    v[j] = t;
  }
  return v;
}

Vec hop_forward(const HopSpec& spec, const Vec& x) { return spec.coeffs * hop_monomials(spec, x); }

Mat hop_jacobian(const HopSpec& spec, const Vec& x) {
  check_hop_input(spec, x);
  // dv_j/dx_n = p(j,n) x_n^{p(j,n)-1} prod_{m != n} x_m^{p(j,m)}
  Mat dv = Mat::Zero(spec.J + 1, spec.N);
  for (int j = 1; j <= spec.J; ++j) {
    for (int n = 0; n < spec.N; ++n) {
      const int pn = spec.exponents(j, n);
      if (pn == 0) continue;
      double t = pn * std::pow(x[n], pn - 1);
      for (int m = 0; m < spec.N; ++m) {
        if (m != n) t *= std::pow(x[m], spec.exponents(j, m));
      }
      dv(j, n) = t;
    }
  }
  return spec.coeffs * dv;
}

nlohmann::json to_json(const IomBankSpec& spec) {
  return {{"variant", spec.variant == IomVariant::IoM1 ? "IoM1" : "IoM2"},
          {"N", spec.N},
          {"L", spec.L},
          {"K", spec.K},
          {"p", spec.p},
          {"label", spec.key.label},
          {"seed", spec.key.master_seed}};
}

IomBankSpec iom_bank_spec_from_json(const nlohmann::json& j) {
  IomBankSpec s;
  const auto v = j.at("variant").get<std::string>();
  if (v == "IoM1") {
    s.variant = IomVariant::IoM1;
  } else if (v == "IoM2") {
    s.variant = IomVariant::IoM2;
  } else {
    throw InvalidInput("unknown IoM variant: " + v);
  }
  s.N = j.at("N").get<int>();
  s.L = j.value("L", 0);
  s.K = j.value("K", 1);
  s.p = j.value("p", 0);
  s.key.label = j.at("label").get<std::string>();
  s.key.master_seed = j.at("seed").get<std::uint64_t>();
  return s;
}

IomBank::IomBank(IomBankSpec spec) : spec_(std::move(spec)) {
  require(spec_.N >= 1 && spec_.K >= 1, "IomBank: N and K must be >= 1");
  if (spec_.variant == IomVariant::IoM1) {
    if (spec_.L == 0) spec_.L = spec_.N;
    require(spec_.L >= 1, "IomBank: L must be >= 1");
    projections_.reserve(spec_.K);
    for (int k = 0; k < spec_.K; ++k) {
      Stream s = derive_stream(spec_.key, {kTagProjection, static_cast<std::uint64_t>(k)});
      projections_.push_back(gaussian_matrix(s, spec_.L, spec_.N));
    }
  } else {
    if (spec_.p == 0) spec_.p = spec_.N;
    require(spec_.p >= 1, "IomBank: p must be >= 1");
    const int k1 = spec_.K * spec_.p;
    perms_.reserve(k1);
    for (int i = 0; i < k1; ++i) {
      Stream s = derive_stream(spec_.key, {kTagPermutation, static_cast<std::uint64_t>(i)});
      perms_.push_back(random_permutation(s, spec_.N));
    }
  }
}

const Mat& IomBank::projection(int k) const {
  require(variant() == IomVariant::IoM1, "projection: bank is not IoM1");
  require(k >= 0 && k < K(), "projection: index out of range");
  return projections_[k];
}

const Permutation& IomBank::permutation(int k, int j) const {
  require(variant() == IomVariant::IoM2, "permutation: bank is not IoM2");
  require(k >= 0 && k < K() && j >= 0 && j < p(), "permutation: index out of range");
  return perms_[static_cast<std::size_t>(k) * p() + j];
}

Mat IomBank::group_sum(int k) const {
  Mat t = Mat::Zero(N(), N());
  for (int j = 0; j < p(); ++j) {
    const Permutation& pj = permutation(k, j);
    for (int i = 0; i < N(); ++i) t(i, pj.map[i]) += 1.0;
  }
  return t;
}

int iom1_forward(const IomBank& bank, const Vec& x, int k) {
  require(x.size() == bank.N(), "iom1_forward: dimension mismatch");
  const Mat& r = bank.projection(k);
  Vec v(r.rows());
  kernels::active().gemv(r.data(), r.rows(), r.cols(), x.data(), v.data());
  return static_cast<int>(kernels::argmax(std::span<const double>(v.data(), v.size())));
}

Vec iom2_product(const IomBank& bank, const Vec& x, int k) {
  require(x.size() == bank.N(), "iom2_product: dimension mismatch");
  Vec w = Vec::Ones(bank.N());
  const auto& kt = kernels::active();
  for (int j = 0; j < bank.p(); ++j) {
    const Vec v = bank.permutation(k, j).apply(x);
    kt.hadamard(v.data(), w.data(), w.size());
  }
  return w;
}

int iom2_forward(const IomBank& bank, const Vec& x, int k) {
  const Vec w = iom2_product(bank, x, k);
  return static_cast<int>(kernels::argmax(std::span<const double>(w.data(), w.size())));
}

std::vector<int> iom_outputs(const IomBank& bank, const Vec& x) {
  std::vector<int> y(bank.K());
  for (int k = 0; k < bank.K(); ++k) {
    y[k] = bank.variant() == IomVariant::IoM1 ? iom1_forward(bank, x, k) : iom2_forward(bank, x, k);
  }
  return y;
}

}  // namespace cef
