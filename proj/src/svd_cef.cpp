#include "cef/svd_cef.hpp"

#include <cmath>
#include <limits>

#include "cef/kernels.hpp"

namespace cef {

namespace {

constexpr double kDegenerateGap = 1e-12;

Vec unit(const Vec& x, const char* what) {
  const double n = x.norm();
  if (!(n > 0.0)) throw InvalidInput(std::string(what) + ": zero input vector");
  return x / n;
}

struct Eigensystem {
  Vec values;  // ascending
  Mat vectors;
};

Eigensystem eigensystem(const Mat& g) {
  Eigen::SelfAdjointEigenSolver<Mat> es(g);
  if (es.info() != Eigen::Success) throw std::runtime_error("symmetric eigensolver failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

// S = sum_l [(x^T w_l) Q_l + m_l w_l^T] with w_l = Q_l^T u, m_l = Q_l x.
Mat differential_core(std::span<const Mat> block, const Vec& x, const Mat& m, const Vec& u) {
  const auto n = x.size();
  const auto& kt = kernels::active();
  Mat s = Mat::Zero(n, n);
  Vec w(n);
  for (std::size_t l = 0; l < block.size(); ++l) {
    const Mat& q = block[l];
    kt.gemv_t(q.data(), n, n, u.data(), w.data());
    const double c = x.dot(w);
    kt.axpy(c, q.data(), s.data(), static_cast<std::size_t>(n * n));
    s.noalias() += m.col(static_cast<Eigen::Index>(l)) * w.transpose();
  }
  return s;
}

}  // namespace

std::vector<int> RotationBank::active_blocks() const {
  std::vector<int> out;
  for (int b = 0; b < K(); ++b) {
    if (pruned.empty() || !pruned[b]) out.push_back(b);
  }
  return out;
}

double RotationBank::retention() const {
  if (K() == 0) return 0.0;
  return static_cast<double>(active_blocks().size()) / K();
}

std::vector<Mat> make_rotation_block(const KeyMaterial& key, int N, int k) {
  std::vector<Mat> block;
  block.reserve(N);
  for (int l = 0; l < N; ++l) {
    Stream s = derive_stream(key, {static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(l)});
    block.push_back(haar_orthogonal(s, N));
  }
  return block;
}

RotationBank make_rotation_bank(const KeyMaterial& key, int N, int K, int first) {
  require(N >= 2, "make_rotation_bank: N must be >= 2");
  require(K >= 1, "make_rotation_bank: K must be >= 1");
  RotationBank bank;
  bank.key = key;
  bank.N = N;
  bank.pruned.assign(K, false);
  for (int k = 0; k < K; ++k) {
    bank.ids.push_back(first + k);
    bank.Q.push_back(make_rotation_block(key, N, first + k));
  }
  return bank;
}

nlohmann::json to_json(const RotationBank& bank) {
  return {{"label", bank.key.label},
          {"seed", bank.key.master_seed},
          {"N", bank.N},
          {"ids", bank.ids},
          {"pruned", bank.pruned}};
}

RotationBank rotation_bank_from_json(const nlohmann::json& j) {
  RotationBank bank;
  bank.key.label = j.at("label").get<std::string>();
  bank.key.master_seed = j.at("seed").get<std::uint64_t>();
  bank.N = j.at("N").get<int>();
  bank.ids = j.at("ids").get<std::vector<int>>();
  bank.pruned = j.value("pruned", std::vector<bool>(bank.ids.size(), false));
  require(bank.pruned.size() == bank.ids.size(), "rotation bank: pruned/ids size mismatch");
  for (int id : bank.ids) bank.Q.push_back(make_rotation_block(bank.key, bank.N, id));
  return bank;
}

Mat build_modulated_matrix(std::span<const Mat> block, const Vec& x) {
  const auto n = x.size();
  require(static_cast<Eigen::Index>(block.size()) == n, "build_modulated_matrix: block size != N");
  const auto& kt = kernels::active();
  Mat m(n, n);
  for (Eigen::Index l = 0; l < n; ++l) {
    const Mat& q = block[l];
    require(q.rows() == n && q.cols() == n, "build_modulated_matrix: dimension mismatch");
    kt.gemv(q.data(), n, n, x.data(), m.col(l).data());
  }
  return m;
}

Mat build_modulated_matrix(const RotationBank& bank, const Vec& x, int k) {
  require(k >= 0 && k < bank.K(), "build_modulated_matrix: block index out of range");
  require(x.size() == bank.N, "build_modulated_matrix: dimension mismatch");
  return build_modulated_matrix(bank.Q[k], x);
}

Mat gram(const Mat& m) {
  Mat g = Mat::Zero(m.rows(), m.rows());
  kernels::active().gram(m.data(), m.rows(), m.cols(), g.data());
  // The kernel accumulates both triangles; symmetrize the rounding.
  return 0.5 * (g + g.transpose());
}

void sign_normalize(Vec& u) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < u.size(); ++i) {
    if (std::abs(u[i]) > std::abs(u[best])) best = i;
  }
  if (u.size() > 0 && u[best] < 0.0) u = -u;
}

PrincipalVector principal_eigenvector(const Mat& G, const PowerOptions& opt) {
  const auto n = G.rows();
  require(n >= 1 && G.cols() == n, "principal_eigenvector: G must be square");
  const auto& kt = kernels::active();
  PrincipalVector out;

  Vec v = Vec::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  Vec w(n);
  for (int it = 1; it <= opt.max_iterations; ++it) {
    kt.gemv(G.data(), n, n, v.data(), w.data());
    const double nw = w.norm();
    out.iterations = it;
    if (!(nw > 0.0)) break;
    w /= nw;
    const double diff = std::min((w - v).norm(), (w + v).norm());
    v.swap(w);
    if (diff < opt.tol) {
      out.converged = true;
      break;
    }
  }

  // The spectrum (values only) certifies the gap and that the power method
  // landed on the top eigenvalue.
  Eigen::SelfAdjointEigenSolver<Mat> values(G, Eigen::EigenvaluesOnly);
  const Vec& ev = values.eigenvalues();
  const double lam1 = ev[n - 1];
  const double lam2 = n > 1 ? ev[n - 2] : -std::numeric_limits<double>::infinity();
  const double rq = v.dot(G * v);
  const double scale = std::max(1.0, std::abs(lam1));
  if (!out.converged || std::abs(rq - lam1) > 1e-9 * scale) {
    const Eigensystem es = eigensystem(G);
    v = es.vectors.col(n - 1);
    out.used_fallback = true;
  }
  sign_normalize(v);
  out.u = v;
  out.lambda = v.dot(G * v);
  out.gap = lam1 - lam2;
  out.degenerate = out.gap < opt.degenerate_gap;
  out.residual = (G * v - out.lambda * v).norm();
  return out;
}

PrincipalVector principal_left_singular_vector(const Mat& M, const PowerOptions& opt) {
  require(M.rows() >= 1, "principal_left_singular_vector: empty matrix");
  return principal_eigenvector(gram(M), opt);
}

SvdCefOutput svdcef_forward(const RotationBank& bank, const Vec& x, std::span<const int> blocks, int Ny) {
  require(x.size() == bank.N, "svdcef_forward: dimension mismatch");
  require(Ny >= 1 && Ny < bank.N, "svdcef_forward: need 1 <= N_y < N");
  const Vec xu = unit(x, "svdcef_forward");
  SvdCefOutput out;
  std::vector<double> ys;
  for (int k : blocks) {
    require(k >= 0 && k < bank.K(), "svdcef_forward: block index out of range");
    const PrincipalVector pv = principal_left_singular_vector(build_modulated_matrix(bank, xu, k));
    if (pv.degenerate) {
      out.degenerate_blocks.push_back(k);
      continue;
    }
    SvdCefSample s;
    s.k = k;
    s.u = pv.u;
    s.lambda = pv.lambda;
    s.residual = pv.residual;
    s.y = pv.u.head(Ny);
    for (int i = 0; i < Ny; ++i) {
      s.selected.push_back(i);
      ys.push_back(s.y[i]);
    }
    out.samples.push_back(std::move(s));
  }
  out.y = Eigen::Map<const Vec>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  return out;
}

SvdCefOutput svdcef_forward(const RotationBank& bank, const Vec& x, int Ny) {
  const std::vector<int> blocks = bank.active_blocks();
  return svdcef_forward(bank, x, blocks, Ny);
}

Mat sensitivity_matrix(std::span<const Mat> block, const Vec& x) {
  const Vec xu = unit(x, "sensitivity_matrix");
  const auto n = xu.size();
  const Mat m = build_modulated_matrix(block, xu);
  const Eigensystem es = eigensystem(gram(m));
  const double lam1 = es.values[n - 1];
  if (lam1 - es.values[n - 2] < kDegenerateGap) throw DegenerateSpectrum("sensitivity: degenerate spectrum");
  const Vec u = es.vectors.col(n - 1);
  const Mat s = differential_core(block, xu, m, u);
  Mat t = Mat::Zero(n, n);
  for (Eigen::Index j = 0; j + 1 < n; ++j) {
    const Vec e = es.vectors.col(j);
    t.noalias() += e * (e.transpose() * s) / (lam1 - es.values[j]);
  }
  return t;
}

Mat sensitivity_matrix(const RotationBank& bank, const Vec& x, int k) {
  require(k >= 0 && k < bank.K(), "sensitivity_matrix: block index out of range");
  require(x.size() == bank.N, "sensitivity_matrix: dimension mismatch");
  return sensitivity_matrix(bank.Q[k], x);
}

BlockResponse block_response(std::span<const Mat> block, const Vec& x) {
  const Vec xu = unit(x, "block_response");
  const auto n = xu.size();
  const Mat m = build_modulated_matrix(block, xu);
  const Eigensystem es = eigensystem(gram(m));
  BlockResponse out;
  const double lam1 = es.values[n - 1];
  out.lambda = lam1;
  out.gap = lam1 - es.values[n - 2];
  out.u = es.vectors.col(n - 1);
  if (out.gap < kDegenerateGap) {
    out.eta = std::numeric_limits<double>::infinity();
    sign_normalize(out.u);
    return out;
  }
  const Mat s = differential_core(block, xu, m, out.u);
  // |T|_F^2 = sum_j |e_j^T S|^2 / (lambda_1 - lambda_j)^2 over j >= 2.
  const Mat proj = es.vectors.leftCols(n - 1).transpose() * s;
  double acc = 0.0;
  for (Eigen::Index j = 0; j + 1 < n; ++j) {
    const double g = lam1 - es.values[j];
    acc += proj.row(j).squaredNorm() / (g * g);
  }
  out.eta = std::sqrt(acc / static_cast<double>(n));
  sign_normalize(out.u);
  return out;
}

double sensitivity_eta(std::span<const Mat> block, const Vec& x) {
  const BlockResponse r = block_response(block, x);
  if (std::isinf(r.eta)) throw DegenerateSpectrum("sensitivity_eta: degenerate spectrum");
  return r.eta;
}

double sensitivity_eta(const RotationBank& bank, const Vec& x, int k) {
  require(k >= 0 && k < bank.K(), "sensitivity_eta: block index out of range");
  require(x.size() == bank.N, "sensitivity_eta: dimension mismatch");
  return sensitivity_eta(bank.Q[k], x);
}

RotationBank prune_bank(const RotationBank& bank, const Vec& x, double eta_max) {
  require(eta_max > 0.0, "prune_bank: eta_max must be > 0");
  RotationBank out = bank;
  out.pruned.assign(bank.K(), false);
  int kept = 0;
  for (int k = 0; k < bank.K(); ++k) {
    if (std::isinf(eta_max)) {
      ++kept;
      continue;
    }
    bool keep = false;
    try {
      keep = sensitivity_eta(bank, x, k) < eta_max;
    } catch (const DegenerateSpectrum&) {
      keep = false;
    }
    out.pruned[k] = !keep;
    kept += keep ? 1 : 0;
  }
  if (kept == 0) throw AllBlocksPruned("prune_bank: every block pruned; increase K");
  return out;
}

}  // namespace cef
