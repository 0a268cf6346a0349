#pragma once
// SVD-CEF: for block k, M = [Q_{k,1} x, ..., Q_{k,N} x] with Haar rotations
// Q_{k,l}; the output is the first N_y entries of the principal left singular
// vector u of M, i.e. the principal eigenvector of G = M M^T.
//
// Sign convention: the entry of u with the largest magnitude is positive
// (lowest index on ties).

#include <span>
#include <vector>

#include "cef/keystream.hpp"
#include "cef/types.hpp"
#include "json.hpp"

namespace cef {

struct RotationBank {
  KeyMaterial key;
  int N = 0;
  // Derivation index of each stored block (Q for block b comes from ids[b]).
  std::vector<int> ids;
  // Q[b][l], N x N orthogonal.
  std::vector<std::vector<Mat>> Q;
  std::vector<bool> pruned;

  int K() const { return static_cast<int>(Q.size()); }
  std::vector<int> active_blocks() const;
  double retention() const;
};

// Blocks first .. first + K - 1; Q[k][l] is Haar from stream (key, k, l).
RotationBank make_rotation_bank(const KeyMaterial& key, int N, int K, int first = 0);
std::vector<Mat> make_rotation_block(const KeyMaterial& key, int N, int k);

nlohmann::json to_json(const RotationBank& bank);
RotationBank rotation_bank_from_json(const nlohmann::json& j);

// Column l is Q[k][l] x. x must be unit norm.
Mat build_modulated_matrix(const RotationBank& bank, const Vec& x, int k);
Mat build_modulated_matrix(std::span<const Mat> block, const Vec& x);
// M M^T through the gram kernel.
Mat gram(const Mat& m);

void sign_normalize(Vec& u);

struct PrincipalVector {
  Vec u;
  double lambda = 0.0;
  // lambda_1 - lambda_2
  double gap = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;      // power method met its tolerance
  bool used_fallback = false;  // full eigendecomposition supplied u
  bool degenerate = false;     // gap < degenerate_gap
};

struct PowerOptions {
  double tol = 1e-13;
  int max_iterations = 10000;
  double degenerate_gap = 1e-12;
};

// Power method on G = M M^T from the normalized all-ones vector, with a full
// symmetric eigendecomposition as fallback.
PrincipalVector principal_left_singular_vector(const Mat& M, const PowerOptions& opt = {});
PrincipalVector principal_eigenvector(const Mat& G, const PowerOptions& opt = {});

struct SvdCefSample {
  int k = 0;
  Vec u;
  std::vector<int> selected;
  Vec y;
  double lambda = 0.0;
  double residual = 0.0;
};

struct SvdCefOutput {
  std::vector<SvdCefSample> samples;
  std::vector<int> degenerate_blocks;
  Vec y;
};

// x is normalized on entry. Pruned blocks are skipped when blocks is empty.
SvdCefOutput svdcef_forward(const RotationBank& bank, const Vec& x, std::span<const int> blocks, int Ny);
SvdCefOutput svdcef_forward(const RotationBank& bank, const Vec& x, int Ny);

// Principal eigenpair and eta from one full eigendecomposition; the path used
// by the Monte Carlo statistics. eta is +inf on a degenerate spectrum.
struct BlockResponse {
  Vec u;
  double lambda = 0.0;
  double gap = 0.0;
  double eta = 0.0;
};
BlockResponse block_response(std::span<const Mat> block, const Vec& x);

// d u = T d x. T has rank N - 1 (T x = 0).
Mat sensitivity_matrix(const RotationBank& bank, const Vec& x, int k);
Mat sensitivity_matrix(std::span<const Mat> block, const Vec& x);
// |T|_F / sqrt(N). Throws DegenerateSpectrum when lambda_1 - lambda_2 < 1e-12.
double sensitivity_eta(const RotationBank& bank, const Vec& x, int k);
double sensitivity_eta(std::span<const Mat> block, const Vec& x);

// Marks blocks with eta >= eta_max as pruned (degenerate blocks too).
// Throws AllBlocksPruned if nothing survives.
RotationBank prune_bank(const RotationBank& bank, const Vec& x, double eta_max = 2.5);

}  // namespace cef
