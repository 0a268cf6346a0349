// cefctl: key generation, forward evaluation, experiments and benchmarks.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cef/attacks.hpp"
#include "cef/harness.hpp"
#include "cef/kernels.hpp"
#include "cef/quantizer.hpp"
#include "cef/svd_cef.hpp"
#include "json.hpp"

using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::string experiment;
  std::string out;
  std::string format = "csv";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int trials = 0;
  int workers = 0;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return json::parse(in);
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

cef::Vec parse_vector(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) v.push_back(std::stod(item));
  return Eigen::Map<cef::Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json vec_json(const cef::Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

int run_experiment(const Common& c, const std::vector<std::string>& allowed) {
  json j = c.config.empty() ? json{{"experiment", c.experiment}} : read_json_file(c.config);
  if (!c.experiment.empty()) j["experiment"] = c.experiment;
  cef::ExperimentConfig cfg = cef::config_from_json(j);
  if (std::find(allowed.begin(), allowed.end(), cfg.experiment) == allowed.end()) {
    std::cerr << "experiment '" << cfg.experiment << "' does not belong to this subcommand\n";
    return 2;
  }
  if (c.seed_set) cfg.seed = c.seed;
  if (c.trials > 0) cfg.trials = c.trials;
  if (c.workers > 0) cfg.workers = c.workers;
  const std::string out = c.out.empty() ? cfg.output : c.out;
  const cef::ResultTable t = cef::run(cfg);
  write_output(out, c.format == "json" ? cef::emit_json(t).dump(2) + "\n" : cef::emit_csv(t));
  std::cerr << t.name << ": " << t.rows.size() << " rows, " << t.meta["elapsed_seconds"].get<double>() << " s\n";
  return 0;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON experiment config");
  app->add_option("--experiment", c.experiment, "experiment id (overrides the config)");
  app->add_option("--out", c.out, "output path (default stdout)");
  app->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  app->add_option("--seed", c.seed, "master seed override")->each([&](const std::string&) { c.seed_set = true; });
  app->add_option("--trials", c.trials, "trial count override");
  app->add_option("--workers", c.workers, "worker threads (default: CEF_THREADS or all cores)");
}

json keygen(const std::string& family, const std::string& kind, int N, int L, int K, int p, std::uint64_t seed,
            const std::string& label) {
  if (family == "linear") {
    cef::LinearBankSpec s;
    s.kind = cef::linear_kind_from_string(kind);
    s.N = N;
    s.L = L;
    s.count = K;
    s.key = {seed, label};
    cef::LinearBank bank(s);  // validates the bank parameters
    return {{"family", family}, {"spec", cef::to_json(bank.spec())}};
  }
  if (family == "iom") {
    cef::IomBankSpec s;
    s.variant = kind == "iom2" ? cef::IomVariant::IoM2 : cef::IomVariant::IoM1;
    s.N = N;
    s.K = K;
    s.p = p;
    s.key = {seed, label};
    cef::IomBank bank(s);
    return {{"family", family}, {"spec", cef::to_json(bank.spec())}};
  }
  if (family == "svdcef") {
    return {{"family", family}, {"spec", cef::to_json(cef::make_rotation_bank({seed, label}, N, K))}};
  }
  throw cef::InvalidInput("keygen: unknown family '" + family + "'");
}

json forward(const json& key, const cef::Vec& x, int Ny) {
  const std::string family = key.at("family");
  const json& spec = key.at("spec");
  if (family == "linear") {
    const cef::LinearBank bank(cef::linear_bank_spec_from_json(spec));
    json out = json::array();
    for (int i = 0; i < bank.count(); ++i) {
      switch (bank.kind()) {
        case cef::LinearKind::RP: out.push_back(vec_json(cef::rp_forward(bank, x, i))); break;
        case cef::LinearKind::DRP1: out.push_back(cef::drp1_forward(bank, x, i)); break;
        case cef::LinearKind::DRP2: out.push_back(cef::drp2_forward(bank, x, i)); break;
        case cef::LinearKind::URP: out.push_back(vec_json(cef::urp_forward(bank, x, i))); break;
      }
    }
    return {{"outputs", out}};
  }
  if (family == "iom") {
    const cef::IomBank bank(cef::iom_bank_spec_from_json(spec));
    return {{"outputs", cef::iom_outputs(bank, x)}};
  }
  if (family == "svdcef") {
    const cef::RotationBank bank = cef::rotation_bank_from_json(spec);
    const cef::SvdCefOutput o = cef::svdcef_forward(bank, x, Ny);
    return {{"outputs", vec_json(o.y)}, {"degenerate_blocks", o.degenerate_blocks}};
  }
  throw cef::InvalidInput("forward: unknown family '" + family + "'");
}

template <class Fn>
double time_per_call(Fn&& fn, int reps) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / reps;
}

void bench(int N, int reps) {
  cef::Stream s = cef::derive_stream({7, "bench"}, {});
  const cef::Mat m = cef::gaussian_matrix(s, N, N);
  const cef::Vec x = cef::gaussian_vector(s, N);
  cef::Vec y(N);
  cef::Mat g(N, N);
  std::vector<const cef::kernels::KernelTable*> tables{&cef::kernels::scalar_table()};
  if (const auto* a = cef::kernels::avx2_table()) tables.push_back(a);
  std::printf("kernel,N,dot_ns,gemv_ns,gram_ns\n");
  for (const auto* t : tables) {
    volatile double sink = 0.0;
    const double d = time_per_call([&] { sink = sink + t->dot(x.data(), x.data(), N); }, reps * 10);
    const double mv = time_per_call([&] { t->gemv(m.data(), N, N, x.data(), y.data()); }, reps);
    const double gr = time_per_call(
        [&] {
          g.setZero();
          t->gram(m.data(), N, N, g.data());
        },
        reps);
    std::printf("%s,%d,%.1f,%.1f,%.1f\n", t->name, N, d * 1e9, mv * 1e9, gr * 1e9);
  }
  const auto block = cef::make_rotation_block({7, "bench"}, N, 0);
  const cef::Vec xu = x.normalized();
  const double fwd = time_per_call([&] { (void)cef::block_response(block, xu); }, std::max(1, reps / 100));
  std::printf("block_response_us,%d,%.2f\n", N, fwd * 1e6);
  std::printf("active,%s\n", cef::kernels::active().name);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cefctl: continuous encryption functions, attacks and statistics"};
  app.require_subcommand(1);

  Common attack_opts, stats_opts;
  auto* attack = app.add_subcommand("attack", "run an attack experiment (iom1_table, iom2_table, drp2, rp, hop, svdcef_newton)");
  add_common(attack, attack_opts);
  auto* stats = app.add_subcommand("stats", "run a statistics experiment (eta_stats, ber, correlation, kl_distance, distance_profile)");
  add_common(stats, stats_opts);

  std::string family = "svdcef", kind = "rp", label = "user", key_out, key_in, xs;
  int N = 8, L = 1, K = 8, p = 0, Ny = 1;
  std::uint64_t seed = 1;
  auto* kg = app.add_subcommand("keygen", "write a bank key as JSON");
  kg->add_option("--family", family, "linear, iom or svdcef")->check(CLI::IsMember({"linear", "iom", "svdcef"}));
  kg->add_option("--kind", kind, "rp/drp1/drp2/urp for linear, iom1/iom2 for iom");
  kg->add_option("--N", N);
  kg->add_option("--L", L);
  kg->add_option("--K", K, "blocks / outputs");
  kg->add_option("--p", p, "IoM-2 group size");
  kg->add_option("--seed", seed);
  kg->add_option("--label", label);
  kg->add_option("--out", key_out);

  auto* fw = app.add_subcommand("forward", "evaluate a CEF on one input");
  fw->add_option("--key", key_in, "key JSON from keygen")->required();
  fw->add_option("--x", xs, "comma-separated input vector")->required();
  fw->add_option("--Ny", Ny, "SVD-CEF outputs per block");
  std::string fw_out;
  fw->add_option("--out", fw_out);

  int levels = 16, Ly = 8;
  std::string qout;
  std::vector<double> ys;
  auto* qz = app.add_subcommand("quantize", "build an equal-probability table and quantize values");
  qz->add_option("--N", N);
  qz->add_option("--levels", levels, "coarse levels (power of 2)");
  qz->add_option("--Ly", Ly, "fine bins per level (power of 2)");
  qz->add_option("--y", ys, "values to quantize");
  qz->add_option("--out", qout);

  int reps = 20000;
  auto* bn = app.add_subcommand("bench", "time the scalar and AVX2 kernels");
  bn->add_option("--N", N);
  bn->add_option("--reps", reps);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*attack) {
      return run_experiment(attack_opts, {"iom1_table", "iom2_table", "drp2", "rp", "hop", "svdcef_newton"});
    }
    if (*stats) {
      return run_experiment(stats_opts, {"eta_stats", "ber", "correlation", "kl_distance", "distance_profile"});
    }
    if (*kg) {
      write_output(key_out, keygen(family, kind, N, L, K, p, seed, label).dump(2) + "\n");
    } else if (*fw) {
      write_output(fw_out, forward(read_json_file(key_in), parse_vector(xs), Ny).dump(2) + "\n");
    } else if (*qz) {
      const cef::QuantizerTable t = cef::build_table(N, levels, Ly);
      json j = {{"table", cef::to_json(t)}};
      for (double y : ys) {
        const cef::HelperData h = cef::quantize_alice(t, y);
        j["samples"].push_back({{"y", y}, {"m", h.m}, {"j", h.j}, {"code", h.code}});
      }
      std::string text = j.dump(2, ' ', false, json::error_handler_t::strict);
      write_output(qout, text + "\n");
    } else if (*bn) {
      bench(N, reps);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
