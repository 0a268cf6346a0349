#include <chrono>
#include <cmath>

#include "cef/attacks.hpp"
#include "cef/kernels.hpp"

namespace cef {

namespace {

using Clock = std::chrono::steady_clock;

// Rows whose entries are all zero carry no information (t_a == t_b).
Mat drop_zero_rows(const std::vector<Vec>& rows, Eigen::Index n) {
  std::vector<const Vec*> kept;
  for (const Vec& r : rows) {
    if (r.cwiseAbs().maxCoeff() > 0.0) kept.push_back(&r);
  }
  Mat d(static_cast<Eigen::Index>(kept.size()), n);
  for (std::size_t i = 0; i < kept.size(); ++i) d.row(static_cast<Eigen::Index>(i)) = kept[i]->transpose();
  return d;
}

int violations(const Vec& s, double bound) {
  int v = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k) v += s[k] < bound ? 1 : 0;
  return v;
}

}  // namespace

AttackReport solve_halfspaces(const Mat& D, const HalfspaceOptions& opt) {
  const auto t0 = Clock::now();
  AttackReport rep;
  const auto K = D.rows();
  const auto n = D.cols();
  if (K == 0) {
    rep.x_hat = Vec::Zero(n);
    rep.x_init = rep.x_hat;
    rep.note = "no constraints";
    return rep;
  }
  rep.x_init = D.colwise().mean().transpose();

  Mat dn = D;
  for (Eigen::Index k = 0; k < K; ++k) dn.row(k) /= D.row(k).norm();
  // Row-major copy so each constraint is contiguous for the dot kernel.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = dn;
  const auto& kt = kernels::active();

  Vec x = rep.x_init;
  Vec s(K);
  auto scores = [&] {
    // s = Dn x; Dn^T is n x K column-major in the row-major buffer.
    kt.gemv_t(rows.data(), n, K, x.data(), s.data());
  };
  scores();
  Vec accepted = x;
  int accepted_violations = violations(s, -opt.tol * x.norm());
  const long cap = static_cast<long>(opt.cap_factor) * K;
  long it = 0;
  for (; it < cap; ++it) {
    Eigen::Index worst;
    const double smin = s.minCoeff(&worst);
    if (smin >= -opt.tol * x.norm()) break;
    kt.axpy(-smin, rows.data() + worst * n, x.data(), n);
    scores();
    const int viol = violations(s, -opt.tol * x.norm());
    if (viol <= accepted_violations) {
      accepted = x;
      accepted_violations = viol;
    }
  }
  rep.x_hat = accepted;
  rep.iterations = static_cast<int>(it);
  rep.converged = accepted_violations == 0;
  rep.residual = accepted_violations;
  rep.elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
  return rep;
}

Mat iom1_constraints(const IomBank& bank, std::span<const int> outputs) {
  require(bank.variant() == IomVariant::IoM1, "iom1_constraints: bank is not IoM1");
  require(static_cast<int>(outputs.size()) <= bank.K(), "iom1_constraints: more outputs than projections");
  require(bank.L() >= 2, "iom1_constraints: need L >= 2");
  std::vector<Vec> rows;
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    const Mat& r = bank.projection(static_cast<int>(k));
    const int a = outputs[k];
    require(a >= 0 && a < bank.L(), "iom1_constraints: output index out of range");
    for (int b = 0; b < bank.L(); ++b) {
      if (b != a) rows.emplace_back((r.row(a) - r.row(b)).transpose());
    }
  }
  return drop_zero_rows(rows, bank.N());
}

AttackReport attack_iom1(const IomBank& bank, std::span<const int> outputs, const HalfspaceOptions& opt) {
  return solve_halfspaces(iom1_constraints(bank, outputs), opt);
}

Mat iom2_constraints(const IomBank& bank, std::span<const int> outputs, const Vec& signs) {
  require(bank.variant() == IomVariant::IoM2, "iom2_constraints: bank is not IoM2");
  require(signs.size() == bank.N(), "iom2_constraints: sign vector length mismatch");
  for (Eigen::Index i = 0; i < signs.size(); ++i) {
    require(signs[i] == 1.0 || signs[i] == -1.0, "iom2_constraints: signs must be +1 or -1 (x has no zero entry)");
  }
  const int n = bank.N();
  std::vector<Vec> rows;
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    const int kk = static_cast<int>(k);
    const int a = outputs[k];
    require(a >= 0 && a < n, "iom2_constraints: output index out of range");
    const Mat t = bank.group_sum(kk);
    // Sign of each element of w_k follows from the signs of x.
    const Vec ws = iom2_product(bank, signs, kk);
    if (ws[a] > 0.0) {
      int positives = 0;
      for (int i = 0; i < n; ++i) positives += ws[i] > 0.0 ? 1 : 0;
      if (positives < 2) continue;
      for (int b = 0; b < n; ++b) {
        if (b != a && ws[b] > 0.0) rows.emplace_back((t.row(a) - t.row(b)).transpose());
      }
    } else {
      // All elements negative: the largest one has the smallest magnitude.
      for (int b = 0; b < n; ++b) {
        if (b != a) rows.emplace_back((t.row(b) - t.row(a)).transpose());
      }
    }
  }
  return drop_zero_rows(rows, n);
}

AttackReport attack_iom2(const IomBank& bank, std::span<const int> outputs, const Vec& signs,
                         const HalfspaceOptions& opt) {
  AttackReport rep = solve_halfspaces(iom2_constraints(bank, outputs, signs), opt);
  rep.x_hat = signs.cwiseProduct(rep.x_hat.array().exp().matrix());
  rep.x_init = signs.cwiseProduct(rep.x_init.array().exp().matrix());
  return rep;
}

}  // namespace cef
