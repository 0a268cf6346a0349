#include "cef/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>

#include "cef/attacks.hpp"
#include "cef/parallel.hpp"
#include "cef/quantizer.hpp"
#include "cef/stats.hpp"

namespace cef {

namespace {

using Clock = std::chrono::steady_clock;

const std::vector<std::string> kIds{"iom1_table", "iom2_table",    "drp2",           "rp",
                                    "hop",        "svdcef_newton", "eta_stats",      "ber",
                                    "correlation", "kl_distance",  "distance_profile"};

std::string key_label(const std::string& base, std::initializer_list<long> parts) {
  std::string s = base;
  for (long v : parts) s += "." + std::to_string(v);
  return s;
}

std::uint64_t u64(long v) { return static_cast<std::uint64_t>(v); }

MeanStd stats_of(const std::vector<double>& v) { return mean_std(v); }

// ---- attack tables -------------------------------------------------------

struct IomScore {
  double avg = 0.0, ref = 0.0;
  int iterations = 0;
};

ResultTable run_iom_table(const ExperimentConfig& c, bool second) {
  ResultTable t;
  t.columns = {"N", second ? "K2" : "K1", "averaging", "averaging_se", "refined", "refined_se", "iterations"};
  const std::string tag = second ? "iom2" : "iom1";
  for (int N : c.Ns) {
    for (int K : c.Ks) {
      auto scores = parallel_map<IomScore>(c.trials, c.workers, [&](int tr) {
        Stream sx = derive_stream({c.seed, tag + ".x"}, {u64(N), u64(K), u64(tr)});
        Vec x = gaussian_vector(sx, N);
        IomBankSpec spec;
        spec.variant = second ? IomVariant::IoM2 : IomVariant::IoM1;
        spec.N = N;
        spec.K = K;
        spec.p = c.p;
        spec.key = {c.seed, key_label(tag + ".bank", {N, K, tr})};
        const IomBank bank(spec);
        AttackReport rep;
        if (second) {
          x = x.cwiseAbs();
          const std::vector<int> out = iom_outputs(bank, x);
          rep = attack_iom2(bank, out, Vec::Ones(N));
        } else {
          const std::vector<int> out = iom_outputs(bank, x);
          rep = attack_iom1(bank, out);
        }
        rep.score_against(x);
        return IomScore{rep.score_init, rep.score, rep.iterations};
      });
      std::vector<double> a, r, it;
      for (const auto& s : scores) {
        a.push_back(s.avg);
        r.push_back(s.ref);
        it.push_back(s.iterations);
      }
      const MeanStd ma = stats_of(a), mr = stats_of(r), mi = stats_of(it);
      t.add_row({double(N), double(K), ma.mean, ma.se(), mr.mean, mr.se(), mi.mean});
    }
  }
  return t;
}

ResultTable run_drp2(const ExperimentConfig& c) {
  ResultTable t;
  t.columns = {"N", "L", "K", "trials", "success_rate", "mean_rounds", "max_rounds", "mean_score"};
  struct R {
    bool ok = false;
    int rounds = 0;
    double score = 0.0;
  };
  auto res = parallel_map<R>(c.trials, c.workers, [&](int tr) {
    LinearBankSpec spec;
    spec.kind = LinearKind::DRP2;
    spec.N = c.N;
    spec.L = c.L;
    spec.count = c.K;
    spec.quantize = c.quantize;
    spec.q = c.q;
    spec.key = {c.seed, key_label("drp2.bank", {tr})};
    const LinearBank bank(spec);
    Stream sx = derive_stream({c.seed, "drp2.x"}, {u64(tr)});
    const Vec x = gaussian_vector(sx, c.N);
    AttackReport rep = attack_drp2(bank, drp2_outputs(bank, x));
    rep.score_against(x);
    return R{rep.converged, rep.iterations, rep.score};
  });
  double ok = 0, rounds = 0, score = 0;
  int maxr = 0;
  for (const auto& r : res) {
    ok += r.ok;
    rounds += r.rounds;
    score += r.score;
    maxr = std::max(maxr, r.rounds);
  }
  const double n = c.trials;
  t.add_row({double(c.N), double(c.L), double(c.K), n, ok / n, rounds / n, double(maxr), score / n});
  return t;
}

ResultTable run_rp(const ExperimentConfig& c) {
  ResultTable t;
  t.columns = {"N", "blocks", "trials", "exact", "max_error"};
  auto err = parallel_map<double>(c.trials, c.workers, [&](int tr) {
    LinearBankSpec spec;
    spec.kind = LinearKind::RP;
    spec.N = c.N;
    spec.rows = c.L;
    spec.count = c.K;
    spec.key = {c.seed, key_label("rp.bank", {tr})};
    const LinearBank bank(spec);
    Stream sx = derive_stream({c.seed, "rp.x"}, {u64(tr)});
    const Vec x = gaussian_vector(sx, c.N);
    std::vector<int> blocks(c.K);
    std::vector<Vec> outs;
    for (int i = 0; i < c.K; ++i) {
      blocks[i] = i;
      outs.push_back(rp_forward(bank, x, i));
    }
    const AttackReport rep = invert_rp(bank, blocks, outs);
    return (rep.x_hat - x).cwiseAbs().maxCoeff();
  });
  double exact = 0, worst = 0;
  for (double e : err) {
    exact += e <= 1e-8;
    worst = std::max(worst, e);
  }
  t.add_row({double(c.N), double(c.K), double(c.trials), exact, worst});
  return t;
}

ResultTable run_hop(const ExperimentConfig& c) {
  ResultTable t;
  t.columns = {"N", "M", "J", "observed", "trials", "exact", "max_error"};
  const int J = c.L > 0 ? c.L : 2 * c.N;
  const int M = c.K;
  const int observed = c.p > 0 ? c.p : M / 2;
  require(observed < M, "hop: observed outputs must leave some to predict");
  auto err = parallel_map<double>(c.trials, c.workers, [&](int tr) {
    const HopSpec spec = make_hop_spec({c.seed, key_label("hop.spec", {tr})}, c.N, M, J);
    Stream sx = derive_stream({c.seed, "hop.x"}, {u64(tr)});
    Vec x(c.N);
    for (int i = 0; i < c.N; ++i) x[i] = 2.0 * sx.uniform() - 1.0;
    const Vec y = hop_forward(spec, x);
    std::vector<int> obs(observed);
    for (int m = 0; m < observed; ++m) obs[m] = m;
    const HopSubstitute sub = hop_substitute(spec, obs, y.head(observed));
    double e = 0.0;
    for (int m = observed; m < M; ++m) e = std::max(e, std::abs(sub.predict(spec, m) - y[m]) / (1.0 + std::abs(y[m])));
    return e;
  });
  double exact = 0, worst = 0;
  for (double e : err) {
    exact += e <= 1e-8;
    worst = std::max(worst, e);
  }
  t.add_row({double(c.N), double(M), double(J), double(observed), double(c.trials), exact, worst});
  return t;
}

ResultTable run_newton(const ExperimentConfig& c) {
  const int bound = c.N * (c.N + 1) / 2;
  if (c.Ny * c.K < bound) {
    throw InvalidInput("svdcef_newton: N_y*K = " + std::to_string(c.Ny * c.K) + " < N(N+1)/2 = " +
                       std::to_string(bound) + "; B would lack full column rank");
  }
  ConvergenceConfig cc;
  cc.N = c.N;
  cc.K = c.K;
  cc.Ny = c.Ny;
  cc.radii = c.radii;
  cc.trials = c.trials;
  cc.seed = c.seed;
  cc.workers = c.workers;
  if (c.newton == "literal") {
    cc.newton = NewtonOptions::literal();
  } else if (c.newton == "safeguarded") {
    cc.newton = NewtonOptions{};
  } else {
    throw InvalidInput("svdcef_newton: unknown variant '" + c.newton + "'");
  }
  ResultTable t;
  t.columns = {"N", "K", "Ny", "r", "P", "P_star", "bound", "successes", "mean_iterations"};
  for (const auto& row : convergence_probability_experiment(cc)) {
    t.add_row({double(c.N), double(c.K), double(c.Ny), row.r, row.p, row.p_star, row.bound, double(row.successes),
               row.mean_iterations});
  }
  return t;
}

// ---- SVD-CEF statistics --------------------------------------------------

ResultTable run_eta(const ExperimentConfig& c) {
  ResultTable t;
  t.columns = {"N", "mean_eta", "std_eta", "p_good", "samples", "degenerate"};
  struct Acc {
    double sum = 0.0, sumsq = 0.0;
    long good = 0, degenerate = 0;
  };
  for (int N : c.Ns) {
    const KeyMaterial qkey{c.seed, key_label("eta.Q", {N})};
    auto acc = parallel_map<Acc>(c.eta_blocks, c.workers, [&](int b) {
      const auto block = make_rotation_block(qkey, N, b);
      Stream sx = derive_stream({c.seed, "eta.x"}, {u64(N), u64(b)});
      Acc a;
      for (int i = 0; i < c.eta_inputs; ++i) {
        const Vec x = sample_uniform_sphere(sx, N);
        const double e = block_response(block, x).eta;
        if (std::isinf(e)) {
          ++a.degenerate;
        } else if (e < c.eta_max) {
          a.sum += e;
          a.sumsq += e * e;
          ++a.good;
        }
      }
      return a;
    });
    Acc tot;
    for (const auto& a : acc) {
      tot.sum += a.sum;
      tot.sumsq += a.sumsq;
      tot.good += a.good;
      tot.degenerate += a.degenerate;
    }
    const double total = double(c.eta_blocks) * c.eta_inputs;
    const double mean = tot.good > 0 ? tot.sum / tot.good : 0.0;
    const double var = tot.good > 1 ? (tot.sumsq - tot.good * mean * mean) / (tot.good - 1) : 0.0;
    t.add_row({double(N), mean, std::sqrt(std::max(var, 0.0)), tot.good / total, total, double(tot.degenerate)});
  }
  return t;
}

ResultTable run_ber(const ExperimentConfig& c) {
  ResultTable t;
  t.columns = {"N", "sigma", "ber_svdcef", "ber_iom2", "sign_flip_rate", "retention", "bits_svdcef", "bits_iom2"};
  for (int N : c.Ns) {
    BerConfig bc;
    bc.N = N;
    bc.sigmas = c.sigmas;
    bc.trials = c.trials;
    bc.noise_draws = c.noise_draws;
    bc.blocks = c.K;
    bc.L_y = c.L;
    bc.eta_max = c.eta_max;
    bc.seed = c.seed;
    bc.workers = c.workers;
    for (const auto& r : ber_experiment(bc)) {
      t.add_row({double(N), r.sigma, r.ber_svd, r.ber_iom2, r.sign_flip_rate, r.retention, double(r.bits_svd),
                 double(r.bits_iom2)});
    }
  }
  return t;
}

ResultTable run_correlation(const ExperimentConfig& c) {
  ResultTable t;
  t.columns = {"N", "rho", "rho_se", "rho_star", "rho_star_se", "rho_identity"};
  for (int N : c.Ns) {
    CorrelationConfig cc;
    cc.N = N;
    cc.banks = c.banks;
    cc.trials = c.trials;
    cc.eta_max = c.eta_max;
    cc.seed = c.seed;
    cc.workers = c.workers;
    const CorrelationResult r = correlation_rho(cc);
    t.add_row({double(N), r.rho_stats.mean, r.rho_stats.se(), r.rho_star_stats.mean, r.rho_star_stats.se(),
               r.rho_identity_stats.mean});
  }
  return t;
}

ResultTable run_kl(const ExperimentConfig& c) {
  ResultTable t;
  t.columns = {"N", "kl", "kl_se", "control", "control_se"};
  for (int N : c.Ns) {
    KlConfig kc;
    kc.N = N;
    kc.banks = c.banks;
    kc.directions = c.directions;
    kc.trials = c.trials;
    kc.bins = c.bins;
    kc.eta_max = c.eta_max;
    kc.seed = c.seed;
    kc.workers = c.workers;
    const KlResult r = kl_distance(kc);
    t.add_row({double(N), r.d_stats.mean, r.d_stats.se(), r.control_stats.mean, r.control_stats.se()});
  }
  return t;
}

ResultTable run_profile(const ExperimentConfig& c) {
  ResultTable t;
  t.columns = {"N", "alpha", "dx", "ratio", "ratio_se", "ratio_rms", "eta_rms", "max_du"};
  for (int N : c.Ns) {
    DistanceProfileConfig pc;
    pc.N = N;
    pc.alphas = c.alphas;
    pc.trials = c.trials;
    pc.eta_max = c.eta_max;
    pc.seed = c.seed;
    pc.workers = c.workers;
    for (const auto& r : global_distance_profile(pc)) {
      t.add_row({double(N), r.alpha, r.dx, r.ratio.mean, r.ratio.se(), r.ratio_rms, r.eta_rms, r.max_du});
    }
  }
  return t;
}

template <class T>
void read_field(const nlohmann::json& j, const char* name, T& dst) {
  if (j.contains(name)) dst = j.at(name).get<T>();
}

}  // namespace

const std::vector<std::string>& experiment_ids() { return kIds; }

const char* version_string() { return "cef 1.0.0"; }

ExperimentConfig default_config(const std::string& id) {
  if (std::find(kIds.begin(), kIds.end(), id) == kIds.end()) throw InvalidInput("unknown experiment '" + id + "'");
  ExperimentConfig c;
  c.experiment = id;
  if (id == "iom1_table" || id == "iom2_table") {
    c.Ns = {8, 16, 32};
    c.Ks = {8, 16, 32, 64};
    c.trials = 100;
  } else if (id == "drp2") {
    c.N = 8;
    c.L = 8;
    c.K = 23 * 8;
    c.trials = 100;
  } else if (id == "rp") {
    c.N = 16;
    c.L = 4;  // rows per block
    c.K = 4;
    c.trials = 100;
  } else if (id == "hop") {
    c.N = 4;
    c.L = 0;  // J -> 2N
    c.K = 40;
    c.p = 20;
    c.trials = 100;
  } else if (id == "svdcef_newton") {
    c.N = 4;
    c.K = 10;
    c.Ny = 1;
    c.radii = {0.001, 0.01, 0.1, 0.3};
    c.trials = 100;
  } else if (id == "eta_stats") {
    c.Ns = {16, 32};
  } else if (id == "ber") {
    c.Ns = {16, 32};
    c.sigmas = {0.0, 0.01, 0.02, 0.05, 0.1};
    c.trials = 500;
    c.noise_draws = 5;
    c.L = 8;  // L_y
    c.K = 0;  // outputs per x -> N
  } else if (id == "correlation") {
    c.Ns = {8, 16, 32};
    c.banks = 50;
    c.trials = 2000;
  } else if (id == "kl_distance") {
    c.Ns = {8, 16, 32};
    c.banks = 10;
    c.directions = 5;
    c.trials = 20000;
  } else if (id == "distance_profile") {
    c.Ns = {8};
    c.alphas = {1e-8, 1e-4, 1e-2, 0.1, 0.5, 1.0};
    c.trials = 2000;
  }
  return c;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  require(j.is_object() && j.contains("experiment"), "config: missing 'experiment'");
  ExperimentConfig c = default_config(j.at("experiment").get<std::string>());
  read_field(j, "Ns", c.Ns);
  read_field(j, "N", c.N);
  read_field(j, "L", c.L);
  read_field(j, "K", c.K);
  read_field(j, "Ks", c.Ks);
  read_field(j, "p", c.p);
  read_field(j, "Ny", c.Ny);
  read_field(j, "sigmas", c.sigmas);
  read_field(j, "radii", c.radii);
  read_field(j, "alphas", c.alphas);
  read_field(j, "trials", c.trials);
  read_field(j, "noise_draws", c.noise_draws);
  read_field(j, "eta_blocks", c.eta_blocks);
  read_field(j, "eta_inputs", c.eta_inputs);
  read_field(j, "banks", c.banks);
  read_field(j, "directions", c.directions);
  read_field(j, "bins", c.bins);
  read_field(j, "q", c.q);
  read_field(j, "quantize", c.quantize);
  read_field(j, "newton", c.newton);
  read_field(j, "seed", c.seed);
  read_field(j, "eta_max", c.eta_max);
  read_field(j, "workers", c.workers);
  read_field(j, "output", c.output);
  return c;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"experiment", c.experiment}, {"Ns", c.Ns},
          {"N", c.N},                   {"L", c.L},
          {"K", c.K},                   {"Ks", c.Ks},
          {"p", c.p},                   {"Ny", c.Ny},
          {"sigmas", c.sigmas},         {"radii", c.radii},
          {"alphas", c.alphas},         {"trials", c.trials},
          {"noise_draws", c.noise_draws}, {"eta_blocks", c.eta_blocks},
          {"eta_inputs", c.eta_inputs}, {"banks", c.banks},
          {"directions", c.directions}, {"bins", c.bins},
          {"q", c.q},                   {"quantize", c.quantize},
          {"newton", c.newton},         {"seed", c.seed},
          {"eta_max", c.eta_max},       {"output", c.output}};
}

void validate(const ExperimentConfig& c) {
  default_config(c.experiment);
  require(c.trials >= 1 && c.noise_draws >= 1 && c.eta_blocks >= 1 && c.eta_inputs >= 1 && c.banks >= 1 &&
              c.directions >= 1 && c.bins >= 2,
          "config: counts must be >= 1");
  for (double s : c.sigmas) require(s >= 0.0, "config: sigma must be >= 0");
  for (int n : c.Ns) require(n >= 2, "config: N must be >= 2");
  require(c.N >= 2, "config: N must be >= 2");
  require(c.eta_max > 0.0, "config: eta_max must be positive");
}

void ResultTable::add_row(std::vector<double> row) {
  require(row.size() == columns.size(), "ResultTable: row width does not match the header");
  for (double v : row) require(std::isfinite(v), "ResultTable: non-finite cell in " + name);
  rows.push_back(std::move(row));
}

double ResultTable::at(std::size_t row, const std::string& column) const {
  const auto it = std::find(columns.begin(), columns.end(), column);
  require(it != columns.end(), "ResultTable: no column '" + column + "'");
  require(row < rows.size(), "ResultTable: row out of range");
  return rows[row][static_cast<std::size_t>(it - columns.begin())];
}

std::string config_hash(const ExperimentConfig& c) {
  nlohmann::json j = to_json(c);
  j.erase("output");
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ResultTable run(const ExperimentConfig& config) {
  validate(config);
  const auto t0 = Clock::now();
  static const std::map<std::string, ResultTable (*)(const ExperimentConfig&)> table{
      {"iom1_table", [](const ExperimentConfig& c) { return run_iom_table(c, false); }},
      {"iom2_table", [](const ExperimentConfig& c) { return run_iom_table(c, true); }},
      {"drp2", run_drp2},
      {"rp", run_rp},
      {"hop", run_hop},
      {"svdcef_newton", run_newton},
      {"eta_stats", run_eta},
      {"ber", run_ber},
      {"correlation", run_correlation},
      {"kl_distance", run_kl},
      {"distance_profile", run_profile},
  };
  ResultTable t = table.at(config.experiment)(config);
  t.name = config.experiment;
  t.meta = {{"config_hash", config_hash(config)},
            {"elapsed_seconds", std::chrono::duration<double>(Clock::now() - t0).count()},
            {"version", version_string()},
            {"seed", config.seed}};
  return t;
}

std::string emit_csv(const ResultTable& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    if (i) out += ',';
    out += t.columns[i];
  }
  out += '\n';
  char buf[64];
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      std::snprintf(buf, sizeof buf, "%.10g", row[i]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

nlohmann::json emit_json(const ResultTable& t) {
  return {{"name", t.name}, {"columns", t.columns}, {"rows", t.rows}, {"meta", t.meta}};
}

ResultTable table_from_json(const nlohmann::json& j) {
  ResultTable t;
  t.name = j.value("name", std::string{});
  t.columns = j.at("columns").get<std::vector<std::string>>();
  for (const auto& r : j.at("rows")) t.add_row(r.get<std::vector<double>>());
  if (j.contains("meta")) t.meta = j.at("meta");
  return t;
}

}  // namespace cef
