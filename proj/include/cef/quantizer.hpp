#pragma once
// Equal-probability quantization of SVD-CEF outputs with public helper bits,
// Gray coding, and the bit-error-rate comparison against IoM-2.

#include <cstdint>
#include <vector>

#include "cef/types.hpp"
#include "json.hpp"

namespace cef {

struct QuantizerTable {
  int N = 0;
  int levels = 0;  // coarse levels N_y (power of 2)
  int L_y = 0;     // fine bins per coarse level (power of 2)
  // t_0 = -1, t_1 .. t_{M-1} interior; bin i is [t_i, t_{i+1}) with t_M = 1.
  std::vector<double> boundaries;

  int M() const { return levels * L_y; }
  int coarse_bits() const;
};

QuantizerTable build_table(int N, int levels, int L_y);

nlohmann::json to_json(const QuantizerTable& t);
QuantizerTable quantizer_table_from_json(const nlohmann::json& j);

std::uint32_t gray(std::uint32_t value, int bits);
std::uint32_t gray_inverse(std::uint32_t code, int bits);

struct HelperData {
  int m = 0;  // coarse level (plain index)
  int j = 0;  // public fine residue
  std::uint32_t code = 0;  // gray(m)
};

int fine_index(const QuantizerTable& t, double y);
HelperData quantize_alice(const QuantizerTable& t, double y);
// Nearest coarse level to the continuous fine coordinate M F(y'), given j.
int decode_bob(const QuantizerTable& t, double y_prime, int j);
std::uint32_t decode_bob_code(const QuantizerTable& t, double y_prime, int j);

struct BerConfig {
  int N = 16;
  std::vector<double> sigmas{0.0, 0.01, 0.02, 0.05, 0.1};
  int trials = 500;       // enrolled x
  int noise_draws = 5;    // w per x and sigma
  int blocks = 0;         // outputs per x for either CEF; 0 -> N
  int L_y = 8;
  double eta_max = 2.5;
  std::uint64_t seed = 1;
  int workers = 0;
};

struct BerRow {
  double sigma = 0.0;
  double ber_svd = 0.0;
  double ber_iom2 = 0.0;
  long bits_svd = 0;
  long bits_iom2 = 0;
  // Fraction of SVD-CEF outputs whose principal vector flipped sign class.
  double sign_flip_rate = 0.0;
  double retention = 0.0;  // mean fraction of blocks kept by pruning
};

std::vector<BerRow> ber_experiment(const BerConfig& cfg);

}  // namespace cef
