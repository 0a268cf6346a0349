#pragma once
// Inversion and substitution attacks. Every attack sees only attacker-visible
// data: the bank (key assumed known) and the outputs. Scoring against the true
// input is the caller's job (AttackReport::score_against).

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cef/cef_linear.hpp"
#include "cef/cef_nonlinear.hpp"
#include "cef/svd_cef.hpp"
#include "cef/types.hpp"

namespace cef {

struct AttackReport {
  Vec x_hat;
  // Estimate before any refinement (IoM averaging, DRP2 C^-1 y).
  Vec x_init;
  double score = std::numeric_limits<double>::quiet_NaN();
  double score_init = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  bool converged = false;
  double elapsed = 0.0;
  // Attack-specific diagnostics (final residual, regularization flag, ...).
  double residual = 0.0;
  bool regularized = false;
  std::string note;

  // Fills score / score_init with the normalized projection onto x.
  void score_against(const Vec& x);
};

// Stack the listed RP blocks and apply the pseudo-inverse.
// Throws RankDeficient if the stack has column rank < N.
AttackReport invert_rp(const LinearBank& bank, std::span<const int> blocks, std::span<const Vec> outputs);

// Candidate search for DRP1 slot i: argmin_l |v - R_l R_l^+ v|.
// converged = false when even the best candidate leaves a residual above
// rel_tol * |v|^2 (model mismatch).
AttackReport attack_drp1(const LinearBank& bank, int slot, const Vec& v, double rel_tol = 1e-12);

struct Drp2Options {
  int max_rounds = 300;
  // Exact-reproduction test: max_k |r_{k,l_k}^T x - v_k| <= tol * max|v|
  // (plus q/2 when the bank quantizes).
  double tol = 1e-9;
};

// C^-1 y initialization followed by alternating selection / least squares.
// Selection is soft (posterior weights under a Gaussian residual model with a
// re-estimated variance); each round also tries the hard selection and stops
// once it reproduces every v_k.
AttackReport attack_drp2(const LinearBank& bank, const Vec& v, const Drp2Options& opt = {});

struct HalfspaceOptions {
  // Constraint d^T x >= -tol |x| counts as satisfied (rows normalized).
  double tol = 1e-9;
  // Iteration cap = cap_factor * (number of constraints).
  int cap_factor = 1000;
};

// Find x with D.row(k) x > 0 for all k: mean of the rows, then projection of
// the iterate onto the most violated constraint. x_hat is the last accepted
// iterate; an iterate is accepted only if it does not raise the violation
// count, so reported iterates are monotone.
AttackReport solve_halfspaces(const Mat& D, const HalfspaceOptions& opt = {});

// Difference rows d = r_a - r_b for every non-selected row b.
Mat iom1_constraints(const IomBank& bank, std::span<const int> outputs);
AttackReport attack_iom1(const IomBank& bank, std::span<const int> outputs, const HalfspaceOptions& opt = {});

// Rows c with c^T log|x| > 0, given the sign of every entry of x.
Mat iom2_constraints(const IomBank& bank, std::span<const int> outputs, const Vec& signs);
// x_hat = signs .* exp(z_hat); x_init likewise from the averaging estimate.
AttackReport attack_iom2(const IomBank& bank, std::span<const int> outputs, const Vec& signs,
                         const HalfspaceOptions& opt = {});

struct HopSubstitute {
  // s = [1, v(x)] estimated from the observed outputs.
  Vec s;
  Vec v;
  double fit_residual = 0.0;
  double predict(const HopSpec& spec, int m) const;
};

// Linear least squares for s from observed outputs y_m, m in observed.
// Throws RankDeficient if the observed coefficient rows have rank < J + 1.
HopSubstitute hop_substitute(const HopSpec& spec, std::span<const int> observed, const Vec& y);

enum class EigenBranch {
  // Largest eigenvalue when 1 - alpha > 0, smallest otherwise.
  BySign,
  // Always the principal eigenvector, i.e. the plain forward function.
  Principal,
};

struct NewtonOptions {
  int max_iterations = 500;
  double step = 1.0;
  bool backtracking = true;
  double step_floor = 1.0 / 64.0;
  bool reproject = true;
  int reproject_every = 50;
  int plateau_window = 10;
  double plateau_rel = 0.01;
  EigenBranch branch = EigenBranch::BySign;
  // Stop once max |u_a - u_a^(i)| falls below this.
  double tol = 1e-11;

  // Unit step, no re-projection, principal eigenvector in the forward
  // evaluation: the iteration exactly as the update rule reads.
  static NewtonOptions literal() {
    NewtonOptions o;
    o.backtracking = false;
    o.reproject = false;
    o.branch = EigenBranch::Principal;
    return o;
  }
};

// X = a I + b x x^T with b = 1/(x_1 x_2), a = (1 - b)/N, so Tr X = 1 and
// X_{1,2} = 1. Requires x_1 x_2 != 0.
Mat structured_x(const Vec& x);

struct NewtonTrace {
  std::vector<double> residual_norm;
  // max |Tr X - 1|, |X_12 - 1|, |X - X^T| over all iterates.
  double max_trace_error = 0.0;
  double max_x12_error = 0.0;
  double max_asymmetry = 0.0;
};

// Newton iteration on the EVD equilibrium in X using blocks blocks[0..K-1] of
// the bank and the first Ny entries y of each block's output. Requires
// Ny*K >= N(N+1)/2 - 1.
AttackReport newton_attack_svdcef(const RotationBank& bank, std::span<const int> blocks, const Vec& y, int Ny,
                                  const Vec& x_init, const NewtonOptions& opt = {}, NewtonTrace* trace = nullptr);

struct ConvergenceConfig {
  int N = 4;
  int K = 0;  // known blocks; 0 -> N(N+1)/2
  int Ny = 1;
  int holdout_factor = 2;  // held-out blocks = holdout_factor * K
  std::vector<double> radii{0.001, 0.01, 0.1, 0.3};
  int trials = 100;
  double match_tol = 0.02;
  NewtonOptions newton = NewtonOptions::literal();
  std::uint64_t seed = 1;
  int workers = 0;
};

struct ConvergenceRow {
  double r = 0.0;
  double p = 0.0;       // outputs on the known blocks reproduced
  double p_star = 0.0;  // also on the held-out blocks
  double bound = 0.0;   // r^(N-1), volume fraction of the r-cap
  double mean_iterations = 0.0;
  int successes = 0;
  int trials = 0;
};

// Per trial: uniform x, a fresh bank of (1 + holdout_factor) K blocks, and a
// start x' = sqrt(1 - r^2) x + r w with w uniform in x-perp.
std::vector<ConvergenceRow> convergence_probability_experiment(const ConvergenceConfig& cfg);

}  // namespace cef
