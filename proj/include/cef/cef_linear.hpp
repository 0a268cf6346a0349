#pragma once
// Linear CEFs: random projection (RP), dynamic random projection with the
// two selection models (DRP1, DRP2), unitary random projection (URP), and the
// norm-hiding lift onto the unit sphere of dimension N+1.
//
// Candidate indices l are 0-based throughout (0..L-1).

#include "json.hpp"
#include <optional>
#include <vector>

#include "cef/keystream.hpp"
#include "cef/types.hpp"

namespace cef {

enum class LinearKind { RP, DRP1, DRP2, URP };

const char* to_string(LinearKind k);
LinearKind linear_kind_from_string(const std::string& s);

struct LinearBankSpec {
  LinearKind kind = LinearKind::RP;
  int N = 2;
  // DRP: candidates per slot. Ignored for RP/URP.
  int L = 1;
  // RP: rows per block (defaults to N when 0).
  int rows = 0;
  // RP blocks, DRP1 slots, DRP2 outputs, or URP transforms.
  int count = 1;
  // DRP1: stolen realizations per slot.
  int realizations = 1;
  // DRP2 output quantization (mid-rise, step q).
  bool quantize = false;
  double q = 0.5;
  KeyMaterial key;
};

nlohmann::json to_json(const LinearBankSpec& spec);
LinearBankSpec linear_bank_spec_from_json(const nlohmann::json& j);

// Immutable after construction. Every matrix is a pure function of the
// LinearBankSpec, so the JSON form carries only that struct.
class LinearBank {
 public:
  explicit LinearBank(LinearBankSpec spec);

  const LinearBankSpec& spec() const { return spec_; }
  LinearKind kind() const { return spec_.kind; }
  int N() const { return spec_.N; }
  int L() const { return spec_.L; }
  int count() const { return spec_.count; }
  int sketch_width() const { return sketch_width_; }

  // RP block i (rows x N).
  const Mat& rp_block(int i) const;
  // DRP candidate rows, L x N; row l is r_{.,l}.
  //   DRP1: slot i, realization k. DRP2: output k (pass k as the first index).
  const Mat& drp1_candidates(int i, int k) const;
  const Mat& drp2_candidates(int k) const;
  // Key-derived sign sketch driving the selection for DRP1 slot i / DRP2 output k.
  const Mat& sketch(int i) const;

  // Fixed orthogonal transform used by every URP index.
  const Mat& urp_base() const { return urp_q_; }
  const Permutation& urp_p1(int k) const;
  const Permutation& urp_p2(int k) const;
  // R_k = P_{k,2} Q P_{k,1}, materialized.
  const Mat& urp_matrix(int k) const;

 private:
  void check_index(int i, int bound, const char* what) const;

  LinearBankSpec spec_;
  int sketch_width_ = 0;
  std::vector<Mat> blocks_;      // RP
  std::vector<Mat> candidates_;  // DRP1 (slot-major) or DRP2
  std::vector<Mat> sketches_;    // DRP1 per slot, DRP2 per output
  Mat urp_q_;
  std::vector<Permutation> p1_, p2_;
  std::vector<Mat> urp_r_;
};

// Orthonormal Sylvester-Hadamard matrix for powers of two, else the
// orthogonalized DCT-II cosine matrix.
Mat fixed_orthogonal_transform(int n);

Vec rp_forward(const LinearBank& bank, const Vec& x, int i);

// Index of the candidate chosen for x at sketch index i:
// popcount of the sign bits of sketch(i) x, modulo L.
int drp_selection(const LinearBank& bank, const Vec& x, int i);

// Realization k of slot i.
double drp1_forward(const LinearBank& bank, const Vec& x, int i, int k = 0);
// All realizations of slot i.
Vec drp1_slot(const LinearBank& bank, const Vec& x, int i);

// Unquantized v_k unless the bank spec enables quantization.
double drp2_forward(const LinearBank& bank, const Vec& x, int k);
Vec drp2_outputs(const LinearBank& bank, const Vec& x);
// Mid-rise quantizer: q * (floor(v / q) + 1/2).
double midrise(double v, double q);

Vec urp_forward(const LinearBank& bank, const Vec& x, int k);

// v = [x / (r sqrt(1 + r^2)); r / sqrt(1 + r^2)], r = |x|.
Vec sphere_lift(const Vec& x);

}  // namespace cef
