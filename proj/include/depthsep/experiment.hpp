#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "depthsep/netbuild.hpp"
#include "depthsep/parallel.hpp"
#include "depthsep/radial.hpp"

namespace depthsep {

using PointFn = std::function<double(std::span<const double>)>;

struct TrainConfig {
  int d = 3;
  std::size_t width = 1;
  std::size_t n_train = 20000;
  std::size_t n_val = 2000;
  std::size_t n_eval = 10000;
  std::size_t steps = 20000;
  double step_size = 0.02;
  double decay_start = 0.5;  // fraction of steps run at the constant step size
  double grad_clip = 10.0;   // cap on the minibatch gradient norm
  int restarts = 8;
  std::size_t batch = 64;
  std::size_t checkpoints = 40;  // training-loss evaluations per run
  std::uint64_t seed = 1;
  ActivationKind activation = ActivationKind::relu;
  double tail_tol = 1e-3;
  bool record_timing = false;  // wall time into the seconds column

  void validate() const {
    if (d < 2) throw std::invalid_argument("d must be >= 2");
    if (width < 1 || n_train < 1 || n_val < 1 || steps < 1 || batch < 1 || restarts < 1 || checkpoints < 1)
      throw std::invalid_argument("training counts must be positive");
    if (n_eval < 10000) throw std::invalid_argument("n_eval must be >= 10000");
    if (!(step_size > 0.0)) throw std::invalid_argument("step_size must be positive");
    if (!(decay_start > 0.0 && decay_start <= 1.0)) throw std::invalid_argument("decay_start must lie in (0, 1]");
    if (!(grad_clip > 0.0)) throw std::invalid_argument("grad_clip must be positive");
    if (activation != ActivationKind::relu) throw std::invalid_argument("training supports relu only");
    if (!(tail_tol > 0.0 && tail_tol <= 1e-2)) throw std::invalid_argument("tail_tol must lie in (0, 0.01]");
  }
};

struct SweepRow {
  std::size_t width = 0;
  double train_loss = 0.0;
  double eval_error = 0.0;
  double std_err = 0.0;
  int restarts = 0;
  double seconds = 0.0;
};

// Sample points with target values, flattened row-major.
struct Dataset {
  int d = 0;
  std::vector<double> x, y;
  std::size_t size() const { return y.size(); }
  std::span<const double> point(std::size_t i) const { return {x.data() + i * d, static_cast<std::size_t>(d)}; }
};

inline Dataset sample_dataset(const RadialDensity& dens, std::size_t n, std::uint64_t seed, const PointFn& target,
                              unsigned threads = 0) {
  Dataset ds;
  ds.d = dens.d;
  ds.x.reserve(n * dens.d);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = sample_mu(dens, rng);
    ds.x.insert(ds.x.end(), p.begin(), p.end());
  }
  ds.y.resize(n);
  parallel_for(n, threads, [&](std::size_t i) { ds.y[i] = target(ds.point(i)); });
  return ds;
}

// FNV-1a over the coordinate bytes
inline std::uint64_t dataset_checksum(const Dataset& ds) {
  std::uint64_t h = 1469598103934665603ULL;
  for (double v : ds.x) {
    unsigned char b[sizeof(double)];
    std::memcpy(b, &v, sizeof v);
    for (unsigned char c : b) h = (h ^ c) * 1099511628211ULL;
  }
  return h;
}

struct McEstimate {
  double estimate = 0.0, std_error = 0.0;
};

inline McEstimate mean_and_se(const std::vector<double>& v) {
  McEstimate e;
  if (v.empty()) return e;
  const double n = static_cast<double>(v.size());
  for (double x : v) e.estimate += x;
  e.estimate /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - e.estimate) * (x - e.estimate);
  e.std_error = v.size() > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0;
  return e;
}

// Monte Carlo E_mu (f - g)^2 with its standard error
inline McEstimate l2mu_error(const PointFn& f, const PointFn& g, std::size_t n_eval, std::uint64_t seed,
                             const RadialDensity& dens) {
  std::mt19937_64 rng(seed);
  std::vector<double> v(n_eval);
  for (auto& s : v) {
    const auto x = sample_mu(dens, rng);
    const double e = f(x) - g(x);
    s = e * e;
  }
  return mean_and_se(v);
}

inline McEstimate dataset_error(const TwoLayerNet& net, const Dataset& ds) {
  std::vector<double> v(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double e = eval_two_layer(net, ds.point(i)) - ds.y[i];
    v[i] = e * e;
  }
  return mean_and_se(v);
}

struct TrainResult {
  TwoLayerNet net;
  SweepRow row;
  std::vector<double> best_train_trace;  // best-so-far training loss at each checkpoint, chosen restart
  int diverged = 0;
};

namespace detail {

struct RunOutcome {
  TwoLayerNet best;  // parameters at the best validation checkpoint
  double val_loss = std::numeric_limits<double>::infinity();
  std::vector<double> trace;
  bool diverged = false;
};

inline RunOutcome sgd_run(const Dataset& train, const Dataset& val, const TrainConfig& cfg, std::uint64_t seed) {
  const int d = train.d;
  const std::size_t k = cfg.width;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  TwoLayerNet net;
  net.d = d;
  net.act = Activation::relu();
  net.v.resize(k);
  net.b.resize(k);
  net.w.resize(k * d);
  for (std::size_t i = 0; i < k; ++i) {
    net.v[i] = gauss(rng) / std::sqrt(static_cast<double>(k));
    net.b[i] = 0.1 * gauss(rng);
    for (int j = 0; j < d; ++j) net.w[i * d + j] = gauss(rng) / std::sqrt(static_cast<double>(d));
  }
  RunOutcome out;
  std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
  std::vector<double> gv(k), gb(k), gw(k * d), z(k);
  const std::size_t t0 = std::max<std::size_t>(1, static_cast<std::size_t>(cfg.decay_start * cfg.steps));
  const std::size_t every = std::max<std::size_t>(1, cfg.steps / cfg.checkpoints);
  double best_train = std::numeric_limits<double>::infinity();

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    std::fill(gv.begin(), gv.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    std::fill(gw.begin(), gw.end(), 0.0);
    for (std::size_t m = 0; m < cfg.batch; ++m) {
      const std::size_t idx = pick(rng);
      const auto x = train.point(idx);
      double pred = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        double s = net.b[i];
        for (int j = 0; j < d; ++j) s += net.w[i * d + j] * x[j];
        z[i] = s;
        pred += net.v[i] * (s > 0 ? s : 0.0);
      }
      const double r = 2.0 * (pred - train.y[idx]) / static_cast<double>(cfg.batch);
      for (std::size_t i = 0; i < k; ++i) {
        if (z[i] <= 0) continue;
        gv[i] += r * z[i];
        const double c = r * net.v[i];
        gb[i] += c;
        for (int j = 0; j < d; ++j) gw[i * d + j] += c * x[j];
      }
    }
    double norm2 = 0.0;
    for (double g : gv) norm2 += g * g;
    for (double g : gb) norm2 += g * g;
    for (double g : gw) norm2 += g * g;
    if (!std::isfinite(norm2)) {
      out.diverged = true;
      return out;
    }
    const double eta = cfg.step_size * (step <= t0 ? 1.0 : std::sqrt(static_cast<double>(t0) / step));
    const double scale = eta * std::min(1.0, cfg.grad_clip / std::max(std::sqrt(norm2), 1e-300));
    for (std::size_t i = 0; i < k; ++i) {
      net.v[i] -= scale * gv[i];
      net.b[i] -= scale * gb[i];
    }
    for (std::size_t q = 0; q < gw.size(); ++q) net.w[q] -= scale * gw[q];

    if (step % every == 0 || step == cfg.steps) {
      const double tl = dataset_error(net, train).estimate;
      if (!std::isfinite(tl)) {
        out.diverged = true;
        return out;
      }
      best_train = std::min(best_train, tl);
      out.trace.push_back(best_train);
      const double vl = dataset_error(net, val).estimate;
      if (vl < out.val_loss) {
        out.val_loss = vl;
        out.best = net;
      }
    }
  }
  return out;
}

}  // namespace detail

struct TrainData {
  RadialDensity dens;
  Dataset train, val, eval;
};

inline TrainData make_train_data(const PointFn& target, const TrainConfig& cfg, unsigned threads = 0,
                                 const QuadratureSpec& spec = {}) {
  cfg.validate();
  TrainData td{build_density(cfg.d, cfg.tail_tol, spec), {}, {}, {}};
  td.train = sample_dataset(td.dens, cfg.n_train, derive_seed(cfg.seed, 1), target, threads);
  td.val = sample_dataset(td.dens, cfg.n_val, derive_seed(cfg.seed, 2), target, threads);
  td.eval = sample_dataset(td.dens, cfg.n_eval, derive_seed(cfg.seed, 3), target, threads);
  return td;
}

inline TrainResult train_two_layer(const TrainData& data, const TrainConfig& cfg, unsigned threads = 0,
                                   std::ostream* log = nullptr) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  std::vector<detail::RunOutcome> runs(cfg.restarts);
  parallel_for(runs.size(), threads, [&](std::size_t r) {
    runs[r] = detail::sgd_run(data.train, data.val, cfg, derive_seed(cfg.seed, 1000 + 64 * cfg.width + r));
  });
  TrainResult res;
  std::size_t best = runs.size();
  for (std::size_t r = 0; r < runs.size(); ++r) {
    if (runs[r].diverged) {
      ++res.diverged;
      if (log) *log << "width " << cfg.width << ": restart " << r << " diverged\n";
      continue;
    }
    if (best == runs.size() || runs[r].val_loss < runs[best].val_loss) best = r;
  }
  res.row.width = cfg.width;
  res.row.restarts = cfg.restarts;
  if (best == runs.size()) {
    // every restart diverged; report the zero network
    res.net.d = cfg.d;
    res.net.act = Activation::relu();
    res.row.train_loss = std::numeric_limits<double>::quiet_NaN();
  } else {
    res.net = runs[best].best;
    res.best_train_trace = runs[best].trace;
    res.row.train_loss = runs[best].trace.empty() ? std::numeric_limits<double>::quiet_NaN() : runs[best].trace.back();
  }
  const McEstimate e = dataset_error(res.net, data.eval);
  res.row.eval_error = e.estimate;
  res.row.std_err = e.std_error;
  if (cfg.record_timing)
    res.row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

inline std::vector<SweepRow> width_sweep(const TrainData& data, const std::vector<std::size_t>& widths,
                                         const TrainConfig& base, unsigned threads = 0, std::ostream* log = nullptr) {
  std::vector<SweepRow> rows;
  for (std::size_t w : widths) {
    TrainConfig cfg = base;
    cfg.width = w;
    rows.push_back(train_two_layer(data, cfg, threads, log).row);
    if (log) *log << "width " << w << " eval_error " << rows.back().eval_error << "\n";
  }
  return rows;
}

inline std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows, const TrainConfig& cfg, const std::string& target_id,
                            std::uint64_t eval_checksum, std::ostream& os) {
  char cks[32];
  std::snprintf(cks, sizeof cks, "%016llx", static_cast<unsigned long long>(eval_checksum));
  os << "# d=" << cfg.d << "\n# target=" << target_id << "\n# seed=" << cfg.seed << "\n# n_train=" << cfg.n_train
     << "\n# n_val=" << cfg.n_val << "\n# n_eval=" << cfg.n_eval << "\n# steps=" << cfg.steps
     << "\n# step_size=" << format_g17(cfg.step_size) << "\n# decay_start=" << format_g17(cfg.decay_start)
     << "\n# grad_clip=" << format_g17(cfg.grad_clip) << "\n# batch=" << cfg.batch << "\n# restarts=" << cfg.restarts
     << "\n# activation=" << activation_name(cfg.activation) << "\n# tail_tol=" << format_g17(cfg.tail_tol)
     << "\n# eval_checksum=" << cks << "\n";
  os << "width,train_loss,eval_error,std_err,restarts,seconds\n";
  for (const auto& r : rows)
    os << r.width << ',' << format_g17(r.train_loss) << ',' << format_g17(r.eval_error) << ','
       << format_g17(r.std_err) << ',' << r.restarts << ',' << format_g17(r.seconds) << '\n';
}

// width on a log axis against eval error
inline void write_sweep_svg(const std::vector<SweepRow>& rows, std::ostream& os) {
  const double W = 640, H = 400, L = 70, B = 50, T = 20, Rm = 20;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - Rm << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">width (log scale)</text>\n";
  os << "<text x=\"15\" y=\"" << H / 2 << "\" transform=\"rotate(-90 15 " << H / 2
     << ")\" text-anchor=\"middle\">eval error</text>\n";
  if (!rows.empty()) {
    double lx0 = std::log(static_cast<double>(rows.front().width)), lx1 = lx0, y1 = 0.0;
    for (const auto& r : rows) {
      lx0 = std::min(lx0, std::log(static_cast<double>(r.width)));
      lx1 = std::max(lx1, std::log(static_cast<double>(r.width)));
      if (std::isfinite(r.eval_error)) y1 = std::max(y1, r.eval_error + r.std_err);
    }
    if (lx1 == lx0) lx1 = lx0 + 1.0;
    if (y1 <= 0.0) y1 = 1.0;
    auto px = [&](std::size_t w) { return L + (W - L - Rm) * (std::log(static_cast<double>(w)) - lx0) / (lx1 - lx0); };
    auto py = [&](double e) { return H - B - (H - B - T) * e / y1; };
    os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
    for (const auto& r : rows) os << px(r.width) << ',' << py(r.eval_error) << ' ';
    os << "\"/>\n";
    for (const auto& r : rows) {
      os << "<circle cx=\"" << px(r.width) << "\" cy=\"" << py(r.eval_error) << "\" r=\"3\" fill=\"steelblue\"/>\n";
      os << "<text x=\"" << px(r.width) << "\" y=\"" << H - B + 15 << "\" text-anchor=\"middle\" font-size=\"11\">"
         << r.width << "</text>\n";
    }
    char top[32];
    std::snprintf(top, sizeof top, "%.3g", y1);
    os << "<text x=\"" << L - 5 << "\" y=\"" << T + 5 << "\" text-anchor=\"end\" font-size=\"11\">" << top
       << "</text>\n";
    os << "<text x=\"" << L - 5 << "\" y=\"" << H - B << "\" text-anchor=\"end\" font-size=\"11\">0</text>\n";
  }
  os << "</svg>\n";
}

}  // namespace depthsep
