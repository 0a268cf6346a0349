#pragma once
// Nonlinear CEFs: higher-order polynomials (HOP) and index-of-max hashing
// (IoM-1, IoM-2). Output indices are 0-based.

#include <vector>

#include "cef/keystream.hpp"
#include "cef/types.hpp"
#include "json.hpp"

namespace cef {

// y_m = sum_{j=0..J} c(m, j) prod_n x_n^{p(j, n)}. Row j = 0 of the exponent
// table is all zeros, so c(m, 0) is a constant term and the monomial vector
// v(x) has J entries.
struct HopSpec {
  int N = 0;
  int M = 0;
  int J = 0;
  int d_max = 3;
  Eigen::MatrixXi exponents;  // (J + 1) x N
  Mat coeffs;                 // M x (J + 1)
};

// Exponents uniform on {0..d_max}, coefficients standard normal.
// J defaults to 2N when negative.
HopSpec make_hop_spec(const KeyMaterial& key, int N, int M, int J = -1, int d_max = 3);

// [1, v_1(x), ..., v_J(x)].
Vec hop_monomials(const HopSpec& spec, const Vec& x);
Vec hop_forward(const HopSpec& spec, const Vec& x);
// d y_m / d x_n, M x N.
Mat hop_jacobian(const HopSpec& spec, const Vec& x);

enum class IomVariant { IoM1, IoM2 };

struct IomBankSpec {
  IomVariant variant = IomVariant::IoM1;
  int N = 2;
  // IoM-1 rows per projection (defaults to N when 0).
  int L = 0;
  // Outputs: K1 projections for IoM-1, K2 groups for IoM-2.
  int K = 1;
  // IoM-2 group size (defaults to N when 0).
  int p = 0;
  KeyMaterial key;
};

nlohmann::json to_json(const IomBankSpec& spec);
IomBankSpec iom_bank_spec_from_json(const nlohmann::json& j);

class IomBank {
 public:
  explicit IomBank(IomBankSpec spec);

  const IomBankSpec& spec() const { return spec_; }
  IomVariant variant() const { return spec_.variant; }
  int N() const { return spec_.N; }
  int L() const { return spec_.L; }
  int K() const { return spec_.K; }
  int p() const { return spec_.p; }

  // IoM-1 projection k, L x N.
  const Mat& projection(int k) const;
  // IoM-2 group k: permutations k*p .. k*p + p - 1 (disjoint by construction).
  const Permutation& permutation(int k, int j) const;
  // Sum of the permutation matrices in group k; log|w_k| = T_k log|x|.
  Mat group_sum(int k) const;

 private:
  IomBankSpec spec_;
  std::vector<Mat> projections_;
  std::vector<Permutation> perms_;
};

int iom1_forward(const IomBank& bank, const Vec& x, int k);
// Element-wise product of the permuted copies in group k.
Vec iom2_product(const IomBank& bank, const Vec& x, int k);
int iom2_forward(const IomBank& bank, const Vec& x, int k);
std::vector<int> iom_outputs(const IomBank& bank, const Vec& x);

}  // namespace cef
