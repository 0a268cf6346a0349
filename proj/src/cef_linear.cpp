#include "cef/cef_linear.hpp"

#include <bit>
#include <cmath>
#include <numbers>

#include "cef/kernels.hpp"

namespace cef {

namespace {

// Sub-stream tags inside a bank's key.
constexpr std::uint64_t kTagBlock = 1;
constexpr std::uint64_t kTagSketch = 2;
constexpr std::uint64_t kTagPerm1 = 3;
constexpr std::uint64_t kTagPerm2 = 4;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

const char* to_string(LinearKind k) {
  switch (k) {
    case LinearKind::RP: return "RP";
    case LinearKind::DRP1: return "DRP1";
    case LinearKind::DRP2: return "DRP2";
    case LinearKind::URP: return "URP";
  }
  return "?";
}

LinearKind linear_kind_from_string(const std::string& s) {
  if (s == "RP") return LinearKind::RP;
  if (s == "DRP1") return LinearKind::DRP1;
  if (s == "DRP2") return LinearKind::DRP2;
  if (s == "URP") return LinearKind::URP;
  throw InvalidInput("unknown linear bank kind: " + s);
}

nlohmann::json to_json(const LinearBankSpec& spec) {
  return {{"kind", to_string(spec.kind)},
          {"N", spec.N},
          {"L", spec.L},
          {"rows", spec.rows},
          {"count", spec.count},
          {"realizations", spec.realizations},
          {"quantize", spec.quantize},
          {"q", spec.q},
          {"label", spec.key.label},
          {"seed", spec.key.master_seed}};
}

LinearBankSpec linear_bank_spec_from_json(const nlohmann::json& j) {
  LinearBankSpec s;
  s.kind = linear_kind_from_string(j.at("kind").get<std::string>());
  s.N = j.at("N").get<int>();
  s.L = j.value("L", 1);
  s.rows = j.value("rows", 0);
  s.count = j.value("count", 1);
  s.realizations = j.value("realizations", 1);
  s.quantize = j.value("quantize", false);
  s.q = j.value("q", 0.5);
  s.key.label = j.at("label").get<std::string>();
  s.key.master_seed = j.at("seed").get<std::uint64_t>();
  return s;
}

Mat fixed_orthogonal_transform(int n) {
  require(n >= 1, "fixed_orthogonal_transform: n must be >= 1");
  if (is_pow2(n)) {
    Mat h = Mat::Ones(1, 1);
    while (h.rows() < n) {
      const auto m = h.rows();
      Mat next(2 * m, 2 * m);
      next << h, h, h, -h;
      h = std::move(next);
    }
    return h / std::sqrt(static_cast<double>(n));
  }
  Mat c(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      c(i, j) = std::cos(std::numbers::pi * (j + 0.5) * i / n);
    }
  }
  // Rows of c are mutually orthogonal; QR of c^T normalizes them and clears
  // rounding.
  Eigen::HouseholderQR<Mat> qr(c.transpose());
  Mat q = qr.householderQ() * Mat::Identity(n, n);
  const Mat& r = qr.matrixQR();
  for (int j = 0; j < n; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q.transpose();
}

LinearBank::LinearBank(LinearBankSpec spec) : spec_(std::move(spec)) {
  const int n = spec_.N;
  require(n >= 1, "LinearBank: N must be >= 1");
  require(spec_.count >= 1, "LinearBank: count must be >= 1");
  switch (spec_.kind) {
    case LinearKind::RP: {
      if (spec_.rows == 0) spec_.rows = n;
      require(spec_.rows >= 1, "LinearBank: rows must be >= 1");
      blocks_.reserve(spec_.count);
      for (int i = 0; i < spec_.count; ++i) {
        Stream s = derive_stream(spec_.key, {kTagBlock, static_cast<std::uint64_t>(i)});
        blocks_.push_back(gaussian_matrix(s, spec_.rows, n));
      }
      break;
    }
    case LinearKind::DRP1:
    case LinearKind::DRP2: {
      require(spec_.L >= 1, "LinearBank: L must be >= 1");
      require(!spec_.quantize || spec_.q > 0.0, "LinearBank: quantization step must be > 0");
      sketch_width_ = 2 * std::max(spec_.L, 4);
      const int per = spec_.kind == LinearKind::DRP1 ? spec_.realizations : 1;
      require(per >= 1, "LinearBank: realizations must be >= 1");
      candidates_.reserve(static_cast<std::size_t>(spec_.count) * per);
      for (int i = 0; i < spec_.count; ++i) {
        for (int k = 0; k < per; ++k) {
          Stream s = derive_stream(spec_.key, {kTagBlock, static_cast<std::uint64_t>(i),
                                               static_cast<std::uint64_t>(k)});
          candidates_.push_back(gaussian_matrix(s, spec_.L, n));
        }
        Stream s = derive_stream(spec_.key, {kTagSketch, static_cast<std::uint64_t>(i)});
        sketches_.push_back(gaussian_matrix(s, sketch_width_, n));
      }
      break;
    }
    case LinearKind::URP: {
      urp_q_ = fixed_orthogonal_transform(n);
      for (int k = 0; k < spec_.count; ++k) {
        Stream s1 = derive_stream(spec_.key, {kTagPerm1, static_cast<std::uint64_t>(k)});
        Stream s2 = derive_stream(spec_.key, {kTagPerm2, static_cast<std::uint64_t>(k)});
        p1_.push_back(random_permutation(s1, n));
        p2_.push_back(random_permutation(s2, n));
        urp_r_.push_back(p2_.back().matrix() * urp_q_ * p1_.back().matrix());
      }
      break;
    }
  }
}

void LinearBank::check_index(int i, int bound, const char* what) const {
  if (i < 0 || i >= bound) throw InvalidInput(std::string(what) + ": index out of range");
}

const Mat& LinearBank::rp_block(int i) const {
  require(kind() == LinearKind::RP, "rp_block: bank is not RP");
  check_index(i, count(), "rp_block");
  return blocks_[i];
}

const Mat& LinearBank::drp1_candidates(int i, int k) const {
  require(kind() == LinearKind::DRP1, "drp1_candidates: bank is not DRP1");
  check_index(i, count(), "drp1_candidates");
  check_index(k, spec_.realizations, "drp1_candidates");
  return candidates_[static_cast<std::size_t>(i) * spec_.realizations + k];
}

const Mat& LinearBank::drp2_candidates(int k) const {
  require(kind() == LinearKind::DRP2, "drp2_candidates: bank is not DRP2");
  check_index(k, count(), "drp2_candidates");
  return candidates_[k];
}

const Mat& LinearBank::sketch(int i) const {
  require(kind() == LinearKind::DRP1 || kind() == LinearKind::DRP2, "sketch: bank is not DRP");
  check_index(i, count(), "sketch");
  return sketches_[i];
}

const Permutation& LinearBank::urp_p1(int k) const {
  require(kind() == LinearKind::URP, "urp_p1: bank is not URP");
  check_index(k, count(), "urp_p1");
  return p1_[k];
}

const Permutation& LinearBank::urp_p2(int k) const {
  require(kind() == LinearKind::URP, "urp_p2: bank is not URP");
  check_index(k, count(), "urp_p2");
  return p2_[k];
}

const Mat& LinearBank::urp_matrix(int k) const {
  require(kind() == LinearKind::URP, "urp_matrix: bank is not URP");
  check_index(k, count(), "urp_matrix");
  return urp_r_[k];
}

namespace {

Vec apply(const Mat& a, const Vec& x) {
  Vec y(a.rows());
  kernels::active().gemv(a.data(), a.rows(), a.cols(), x.data(), y.data());
  return y;
}

void check_dim(const LinearBank& bank, const Vec& x, const char* what) {
  if (x.size() != bank.N()) throw InvalidInput(std::string(what) + ": dimension mismatch");
}

}  // namespace

Vec rp_forward(const LinearBank& bank, const Vec& x, int i) {
  check_dim(bank, x, "rp_forward");
  return apply(bank.rp_block(i), x);
}

int drp_selection(const LinearBank& bank, const Vec& x, int i) {
  check_dim(bank, x, "drp_selection");
  const Vec s = apply(bank.sketch(i), x);
  int bits = 0;
  for (Eigen::Index r = 0; r < s.size(); ++r) bits += s[r] > 0.0 ? 1 : 0;
  return bits % bank.L();
}

double drp1_forward(const LinearBank& bank, const Vec& x, int i, int k) {
  const Mat& c = bank.drp1_candidates(i, k);
  const int l = drp_selection(bank, x, i);
  return c.row(l).dot(x);
}

Vec drp1_slot(const LinearBank& bank, const Vec& x, int i) {
  const int l = drp_selection(bank, x, i);
  Vec v(bank.spec().realizations);
  for (int k = 0; k < v.size(); ++k) v[k] = bank.drp1_candidates(i, k).row(l).dot(x);
  return v;
}

double midrise(double v, double q) { return q * (std::floor(v / q) + 0.5); }

double drp2_forward(const LinearBank& bank, const Vec& x, int k) {
  const Mat& c = bank.drp2_candidates(k);
  const int l = drp_selection(bank, x, k);
  const double v = c.row(l).dot(x);
  return bank.spec().quantize ? midrise(v, bank.spec().q) : v;
}

Vec drp2_outputs(const LinearBank& bank, const Vec& x) {
  Vec v(bank.count());
  for (int k = 0; k < bank.count(); ++k) v[k] = drp2_forward(bank, x, k);
  return v;
}

Vec urp_forward(const LinearBank& bank, const Vec& x, int k) {
  check_dim(bank, x, "urp_forward");
  // Permute, transform, permute; the materialized R_k is kept for attacks.
  const Vec a = bank.urp_p1(k).apply(x);
  return bank.urp_p2(k).apply(apply(bank.urp_base(), a));
}

Vec sphere_lift(const Vec& x) {
  const double r = x.norm();
  if (!(r > 0.0)) throw InvalidInput("sphere_lift: zero input vector");
  const double s = std::sqrt(1.0 + r * r);
  Vec v(x.size() + 1);
  v.head(x.size()) = x / (r * s);
  v[x.size()] = r / s;
  return v;
}

}  // namespace cef
