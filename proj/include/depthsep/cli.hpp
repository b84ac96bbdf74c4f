#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "depthsep/experiment.hpp"
#include "depthsep/verify.hpp"

namespace depthsep {

enum ExitCode : int { kExitOk = 0, kExitHardFailure = 1, kExitUsage = 2 };

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class TargetKind { g, gtilde, surrogate };

inline std::string target_name(TargetKind t) {
  switch (t) {
    case TargetKind::g: return "g";
    case TargetKind::gtilde: return "gtilde";
    case TargetKind::surrogate: return "surrogate";
  }
  return "?";
}

struct RunConfig {
  SuiteConfig suite;
  TrainConfig train;
  std::optional<std::size_t> N;  // unset: default count
  std::string out = "depthsep_out";
  ActivationKind activation = ActivationKind::relu;
  TargetKind target = TargetKind::g;
  std::vector<std::size_t> widths{1, 2, 4, 8, 16};
  std::string hard_file, net_file, points_file;  // empty: under out
  std::size_t n_samples = 10000;

  std::filesystem::path out_path(const char* name) const { return std::filesystem::path(out) / name; }
  std::filesystem::path hard_path() const { return hard_file.empty() ? out_path("hard_function.txt") : std::filesystem::path(hard_file); }
  std::filesystem::path net_path() const { return net_file.empty() ? out_path("network.txt") : std::filesystem::path(net_file); }

  void validate() const {
    try {
      if (N && *N == 0) throw std::invalid_argument("N must be >= 1 (omit it for the default count)");
      suite.validate();
      train.validate();
      if (widths.empty()) throw std::invalid_argument("widths must not be empty");
      for (auto w : widths)
        if (w == 0) throw std::invalid_argument("widths must be positive");
      if (n_samples == 0) throw std::invalid_argument("n_samples must be positive");
      if (out.empty()) throw std::invalid_argument("out must not be empty");
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
};

namespace detail {

inline std::vector<std::size_t> parse_width_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto a = item.find_first_not_of(" \t"), b = item.find_last_not_of(" \t");
    if (a == std::string::npos) throw std::invalid_argument("empty entry in widths");
    out.push_back(parse_u64(item.substr(a, b - a + 1)));
  }
  return out;
}

inline bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("bad boolean: " + s);
}

inline int parse_int(const std::string& s) {
  const std::uint64_t v = parse_u64(s);
  if (v > 1000000000ULL) throw std::invalid_argument("integer out of range: " + s);
  return static_cast<int>(v);
}

}  // namespace detail

inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_int;
  try {
    if (key == "d") c.suite.d = c.train.d = parse_int(value);
    else if (key == "alpha") c.suite.alpha = parse_double(value);
    else if (key == "N") c.N = parse_u64(value);
    else if (key == "grid_points") c.suite.grid_points = parse_int(value);
    else if (key == "seed") c.suite.seed = c.train.seed = parse_u64(value);
    else if (key == "sign_trials") c.suite.sign_trials = parse_int(value);
    else if (key == "delta") c.suite.delta = parse_double(value);
    else if (key == "n_mc") c.suite.n_mc = parse_u64(value);
    else if (key == "tail_tol") c.suite.tail_tol = c.train.tail_tol = parse_double(value);
    else if (key == "radial_rel_tol") c.suite.radial_rel_tol = parse_double(value);
    else if (key == "nested_rel_tol") c.suite.nested_rel_tol = parse_double(value);
    else if (key == "nodes_per_wavelength") c.suite.nodes_per_wavelength = parse_int(value);
    else if (key == "rd_dmax") c.suite.rd_dmax = parse_int(value);
    else if (key == "threads") c.suite.threads = static_cast<unsigned>(parse_int(value));
    else if (key == "out") c.out = value;
    else if (key == "activation") c.activation = parse_activation(value);
    else if (key == "target") {
      if (value == "g") c.target = TargetKind::g;
      else if (value == "gtilde") c.target = TargetKind::gtilde;
      else if (value == "surrogate") c.target = TargetKind::surrogate;
      else throw std::invalid_argument("target must be g, gtilde or surrogate");
    } else if (key == "widths") c.widths = detail::parse_width_list(value);
    else if (key == "hard_file") c.hard_file = value;
    else if (key == "net_file") c.net_file = value;
    else if (key == "points") c.points_file = value;
    else if (key == "n_samples") c.n_samples = parse_u64(value);
    else if (key == "n_train") c.train.n_train = parse_u64(value);
    else if (key == "n_val") c.train.n_val = parse_u64(value);
    else if (key == "n_eval") c.train.n_eval = parse_u64(value);
    else if (key == "steps") c.train.steps = parse_u64(value);
    else if (key == "step_size") c.train.step_size = parse_double(value);
    else if (key == "decay_start") c.train.decay_start = parse_double(value);
    else if (key == "grad_clip") c.train.grad_clip = parse_double(value);
    else if (key == "restarts") c.train.restarts = parse_int(value);
    else if (key == "batch") c.train.batch = parse_u64(value);
    else if (key == "record_timing") c.train.record_timing = detail::parse_bool(value);
    else throw ConfigError("unknown config key: " + key);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key + ": " + e.what());
  } catch (const std::out_of_range&) {
    throw ConfigError(key + ": value out of range");
  }
  if (c.N) c.suite.N = *c.N;
}

inline RunConfig parse_run_config(std::istream& is) {
  RunConfig c;
  std::map<std::string, std::string> kv;
  try {
    kv = read_key_values(is);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  for (const auto& [k, v] : kv) apply_setting(c, k, v);
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse_run_config(in);
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

inline HardFunction load_hard(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("missing hard function file: " + p.string());
  try {
    return read_hard_function(in);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

inline ThreeLayerNet load_net(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("missing network file: " + p.string());
  try {
    return read_three_layer(in);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

}  // namespace detail

inline int cmd_verify(const RunConfig& c, const std::vector<std::string>& only, std::ostream& out, std::ostream& log) {
  std::vector<std::string> ids;
  try {
    for (const auto& id : only) ids.push_back(normalize_check_id(id));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const auto reps = run_suite(c.suite, ids, &log);
  auto os = detail::open_out(c.out_path("reports.csv"));
  write_reports_csv(reps, os);
  write_summary(reps, out);
  return any_hard_failure(reps) ? kExitHardFailure : kExitOk;
}

inline int cmd_build(const RunConfig& c, std::ostream& out, std::ostream& log) {
  log << "selecting signs over " << c.suite.sign_trials << " trials\n";
  const HardBuild hb = build_hard(c.suite);
  const HardFunction& h = hb.hard;
  Activation act = c.activation == ActivationKind::threshold ? Activation::threshold() : Activation::relu();
  log << "compiling the three-layer network\n";
  const ThreeLayerNet net = build_prop_approx(h, act, c.suite.delta);
  {
    auto os = detail::open_out(c.hard_path());
    write_hard_function(h, os);
  }
  {
    auto os = detail::open_out(c.net_path());
    write_three_layer(net, os);
  }
  auto os = detail::open_out(c.out_path("build_report.txt"));
  std::ostringstream rep;
  rep << "d = " << h.family.d << "\nalpha = " << format_g17(h.family.alpha) << "\nN = " << h.family.N
      << "\ngood_intervals = " << h.family.good_count() << "\nseed = " << h.signs.seed
      << "\nsign_trial = " << h.signs.trial << "\nhigh_freq_mass = " << format_g17(h.signs.high_freq_mass)
      << "\ndelta = " << format_g17(c.suite.delta) << "\nactivation = " << activation_name(act.kind)
      << "\nfirst_units = " << net.first_units() << "\nsecond_units = " << net.second_units()
      << "\nwidth = " << net.width()
      << "\nwidth_bound = " << format_g17(prop_approx_width_bound(h.family.d, h.family.alpha, h.family.N,
                                                                    c.suite.delta, act.c_sigma))
      << "\n";
  os << rep.str();
  out << rep.str();
  return kExitOk;
}

inline int cmd_sweep(const RunConfig& c, std::ostream& out, std::ostream& log) {
  const HardFunction h = detail::load_hard(c.hard_path());
  std::optional<ThreeLayerNet> net;
  if (c.target == TargetKind::g) {
    net = detail::load_net(c.net_path());
    if (net->d != h.family.d) throw ConfigError("network and hard function disagree on d");
  }
  PointFn target;
  switch (c.target) {
    case TargetKind::g: target = [&](std::span<const double> x) { return eval_three_layer(*net, x); }; break;
    case TargetKind::gtilde: target = [&](std::span<const double> x) { return eval_gtilde(h, x); }; break;
    case TargetKind::surrogate: target = [&](std::span<const double> x) { return eval_surrogate(h, x); }; break;
  }
  TrainConfig tc = c.train;
  tc.d = h.family.d;
  log << "sampling training data at d=" << tc.d << "\n";
  const TrainData data = make_train_data(target, tc, c.suite.threads, c.suite.radial_spec());
  const auto rows = width_sweep(data, c.widths, tc, c.suite.threads, &log);
  std::ostringstream csv;
  write_sweep_csv(rows, tc, target_name(c.target), dataset_checksum(data.eval), csv);
  detail::open_out(c.out_path("sweep.csv")) << csv.str();
  auto svg = detail::open_out(c.out_path("sweep.svg"));
  write_sweep_svg(rows, svg);
  out << csv.str();
  return kExitOk;
}

inline int cmd_sample(const RunConfig& c, std::ostream& out, std::ostream&) {
  const RadialDensity dens = build_density(c.suite.d, c.suite.tail_tol, c.suite.radial_spec());
  std::mt19937_64 rng(derive_seed(c.suite.seed, 7));
  auto os = detail::open_out(c.out_path("samples.csv"));
  for (int j = 0; j < dens.d; ++j) os << 'x' << j + 1 << ',';
  os << "r\n";
  for (std::size_t i = 0; i < c.n_samples; ++i) {
    const auto x = sample_mu(dens, rng);
    for (double v : x) os << format_g17(v) << ',';
    os << format_g17(vector_norm(x)) << '\n';
  }
  auto cdf = detail::open_out(c.out_path("cdf.csv"));
  write_cdf_csv(dens, cdf);
  out << "d = " << dens.d << "\nsamples = " << c.n_samples << "\nr_max = " << format_g17(dens.r_max)
      << "\nmass = " << format_g17(dens.mass()) << "\ntail_bound = " << format_g17(dens.tail_bound) << "\n";
  return kExitOk;
}

// L2(mu) distances of the built network to the hard function and its surrogate
inline int cmd_eval(const RunConfig& c, std::ostream& out, std::ostream&) {
  const HardFunction h = detail::load_hard(c.hard_path());
  const ThreeLayerNet net = detail::load_net(c.net_path());
  if (net.d != h.family.d) throw ConfigError("network and hard function disagree on d");
  const int d = h.family.d;
  std::ostringstream res;
  if (!c.points_file.empty()) {
    std::ifstream in(c.points_file);
    if (!in) throw ConfigError("missing points file: " + c.points_file);
    res << "point,g,gtilde,surrogate\n";
    std::string line;
    std::size_t k = 0;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::vector<double> x;
      std::stringstream ss(line);
      std::string item;
      try {
        while (std::getline(ss, item, ',')) x.push_back(parse_double(item));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(c.points_file + ": " + e.what());
      }
      if (static_cast<int>(x.size()) != d) throw ConfigError(c.points_file + ": expected " + std::to_string(d) + " columns");
      res << k++ << ',' << format_g17(eval_three_layer(net, x)) << ',' << format_g17(eval_gtilde(h, x)) << ','
          << format_g17(eval_surrogate(h, x)) << '\n';
    }
    detail::open_out(c.out_path("eval_points.csv")) << res.str();
  } else {
    const RadialDensity dens = build_density(d, c.suite.tail_tol, c.suite.radial_spec());
    const std::uint64_t seed = derive_seed(c.suite.seed, kStreamProp);
    auto g = [&](std::span<const double> x) { return eval_three_layer(net, x); };
    auto gt = [&](std::span<const double> x) { return eval_gtilde(h, x); };
    auto sg = [&](std::span<const double> x) { return eval_surrogate(h, x); };
    const McEstimate a = l2mu_error(g, gt, c.suite.n_mc, seed, dens);
    const McEstimate b = l2mu_error(g, sg, c.suite.n_mc, seed, dens);
    res << "reference,mean_sq,std_err,n_mc\n"
        << "gtilde," << format_g17(a.estimate) << ',' << format_g17(a.std_error) << ',' << c.suite.n_mc << '\n'
        << "surrogate," << format_g17(b.estimate) << ',' << format_g17(b.std_error) << ',' << c.suite.n_mc << '\n';
    detail::open_out(c.out_path("eval.csv")) << res.str();
  }
  out << res.str();
  return kExitOk;
}

}  // namespace depthsep
