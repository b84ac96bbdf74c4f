// End-to-end acceptance run. One PASS/FAIL line per criterion on stdout.
#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <random>
#include <sstream>

#include "depthsep/experiment.hpp"
#include "depthsep/verify.hpp"

using namespace depthsep;

namespace {

// pinned tolerances and budgets
constexpr double kDensityTol = 1e-3;
constexpr double kBesindRelTol = 1e-4;
constexpr double kNothinshRelTol = 1e-3;
constexpr double kLipapproxBound = 2.4e-3;
constexpr double kPropDelta = 0.05;
constexpr std::size_t kPropSamples = 100000;
constexpr double kRealizableTol = 1e-3;

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); }
};

QuadratureSpec spec(double rel) {
  QuadratureSpec s;
  s.rel_tol = rel;
  return s;
}

bool passed(const LemmaReport& r) { return r.verdict == Verdict::hard_pass; }

// default hard function, built once and shared
const SuiteConfig& defaults() {
  static const SuiteConfig c;
  return c;
}

const HardBuild& default_build() {
  static const HardBuild b = build_hard(defaults());
  return b;
}

const RadialDensity& default_density() {
  static const RadialDensity d = build_density(defaults().d, defaults().tail_tol, defaults().radial_spec());
  return d;
}

std::map<int, std::string>& details() {
  static std::map<int, std::string> m;
  return m;
}

double grid_sup_error(const std::function<double(double)>& f, const UnivariateApproximator& h, const Activation& act,
                      double lo, double hi, int n = 10000) {
  double e = 0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + (hi - lo) * i / n;
    e = std::max(e, std::fabs(f(x) - h(act, x)));
  }
  return e;
}

struct PiecewiseLinear {
  std::vector<double> xs, ys;
  double operator()(double x) const {
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    const std::size_t i = std::upper_bound(xs.begin(), xs.end(), x) - xs.begin();
    const double t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    return ys[i - 1] + t * (ys[i] - ys[i - 1]);
  }
};

PiecewiseLinear random_lipschitz(std::mt19937_64& rng, double L, double R) {
  std::uniform_real_distribution<double> u(-1, 1);
  PiecewiseLinear f;
  const int k = 2 + static_cast<int>(rng() % 12);
  for (int i = 0; i < k; ++i) f.xs.push_back(R * u(rng));
  f.xs.push_back(-R);
  f.xs.push_back(R);
  std::sort(f.xs.begin(), f.xs.end());
  f.xs.erase(std::unique(f.xs.begin(), f.xs.end()), f.xs.end());
  f.ys.push_back(3 * u(rng));
  for (std::size_t i = 1; i < f.xs.size(); ++i) f.ys.push_back(f.ys.back() + L * u(rng) * (f.xs[i] - f.xs[i - 1]));
  return f;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

}  // namespace

TEST(Criterion01, RdBounds) {
  Timer t;
  const LemmaReport r = check_rd_bounds(200);
  EXPECT_TRUE(passed(r)) << r.notes;
  EXPECT_LT(t.seconds(), 1.0);
  details()[1] = fmt("max ratio %.17g, %.2fs", r.measured, t.seconds());
}

TEST(Criterion02, BesselMagnitudeAndSlope) {
  Timer t;
  const LemmaReport r = check_lipmag(20.0, 0.25, 100.0, 0.01);
  EXPECT_TRUE(passed(r)) << r.notes;
  EXPECT_LT(t.seconds(), 30.0);
  details()[2] = fmt("measured %.6g, %.2fs", r.measured, t.seconds());
}

TEST(Criterion03, BesselAsymptoticEnvelope) {
  Timer t;
  const LemmaReport r = check_besapprox(2, 20, 0.25, 1e-9);
  EXPECT_TRUE(passed(r)) << r.notes;
  EXPECT_LT(t.seconds(), 30.0);
  details()[3] = fmt("max error/envelope %.6g, %.2fs", r.measured, t.seconds());
}

TEST(Criterion04, BesselSquareBound) {
  Timer t;
  const LemmaReport r = check_besbound();
  EXPECT_TRUE(passed(r)) << r.notes;
  EXPECT_LE(r.measured, 1.0);
  EXPECT_LT(t.seconds(), 10.0);
  details()[4] = fmt("max J^2 r sqrt(d)/1.3 = %.6g, %.2fs", r.measured, t.seconds());
}

TEST(Criterion05, ThresholdedBesselIntegral) {
  Timer t;
  std::string note;
  for (auto [d, beta] : {std::pair{2, 64.0}, std::pair{4, 32.0}, std::pair{2, 128.0}}) {
    const LemmaReport r = check_besind(d, beta, spec(kBesindRelTol));
    EXPECT_TRUE(passed(r)) << d << " " << beta << " " << r.notes;
    EXPECT_GE(r.measured, 0.005 / (beta * d));
    note += fmt("(%g,%g): %.4g ", d, beta, r.measured);
  }
  EXPECT_LT(t.seconds(), 30.0);
  details()[5] = note + fmt("%.2fs", t.seconds());
}

TEST(Criterion06, DensityNormalization) {
  Timer t;
  const LemmaReport r = check_density_norm({2, 3, 4, 6}, kDensityTol, spec(1e-4));
  EXPECT_TRUE(passed(r)) << r.notes;
  EXPECT_LE(r.measured, kDensityTol);
  EXPECT_LT(t.seconds(), 60.0);
  details()[6] = r.notes + fmt("%.2fs", t.seconds());
}

TEST(Criterion07, LowFrequencyMassPerShell) {
  // family only; the sign search is not part of this budget
  Timer t;
  const IntervalFamily fam = build_family(4, 25.0, default_interval_count(4, 25.0));
  ASSERT_EQ(fam.N, 20000u);
  const LemmaReport r = check_nothinsh(fam, spec(kNothinshRelTol));
  EXPECT_TRUE(passed(r)) << r.notes;
  EXPECT_LE(r.measured, 0.5);
  EXPECT_LT(t.seconds(), 15 * 60.0);
  details()[7] = fmt("max fraction %.6g over %g good intervals, %.1fs", r.measured,
                     static_cast<double>(fam.good_count()), t.seconds());
}

TEST(Criterion08, SurrogateGap) {
  const HardFunction& h = default_build().hard;
  Timer t;
  const LemmaReport r = check_lipapprox(h, defaults().radial_spec());
  EXPECT_TRUE(passed(r)) << r.notes;
  EXPECT_LE(r.measured, kLipapproxBound);
  EXPECT_LT(t.seconds(), 5 * 60.0);
  details()[8] = fmt("gap %.6g <= %.6g, %.1fs", r.measured, kLipapproxBound, t.seconds());
}

TEST(Criterion09, UnivariateReluBuilder) {
  Timer t;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0, 1);
  const Activation act = Activation::relu();
  int failures = 0;
  for (int c = 0; c < 100; ++c) {
    const double L = std::exp(std::log(0.1) + u(rng) * std::log(100.0));
    const double R = 0.1 + 5 * u(rng);
    const double delta = R * L / std::exp(std::log(0.3) + u(rng) * std::log(1000.0));
    const PiecewiseLinear f = random_lipschitz(rng, L, R);
    const auto h = build_univariate_relu(f, L, R, delta);
    const double err = grid_sup_error(f, h, act, -1.5 * R - 1, 1.5 * R + 1);
    if (!(err <= delta && h.width() <= 3 * R * L / delta && h.max_abs_alpha() <= 2 * L)) ++failures;
  }
  EXPECT_EQ(failures, 0);
  EXPECT_LT(t.seconds(), 60.0);
  details()[9] = fmt("%g failures, %.2fs", failures, t.seconds());
}

TEST(Criterion10, ThreeLayerApproximation) {
  const HardFunction& h = default_build().hard;
  const RadialDensity& dens = default_density();
  Timer t;
  const ThreeLayerNet net = build_prop_approx(h, Activation::relu(), kPropDelta);
  const PropApproxResult res = check_prop_approx(h, net, kPropDelta, dens, kPropSamples,
                                                 derive_seed(defaults().seed, kStreamProp), defaults().radial_spec());
  const double bound = std::sqrt(3.0) / (25.0 * std::pow(4.0, 0.25)) + kPropDelta;
  EXPECT_TRUE(passed(res.report)) << res.report.notes;
  EXPECT_LE(res.distance + 3 * res.distance_se, bound);
  EXPECT_LE(static_cast<double>(res.width), res.width_bound);
  EXPECT_GE(res.out_min, -2.0);
  EXPECT_LE(res.out_max, 2.0);
  EXPECT_LT(t.seconds(), 10 * 60.0);
  details()[10] = fmt("distance %.4g + 3se <= %.4g", res.distance, bound) +
                  fmt(", width %g <= %.4g", static_cast<double>(res.width), res.width_bound) +
                  fmt(", %.1fs", t.seconds());
}

TEST(Criterion11, PlancherelPairs) {
  const HardFunction& h = default_build().hard;
  const RadialDensity& dens = default_density();
  Timer t;
  const auto pairs = default_fgg_pairs(h, dens);
  ASSERT_EQ(pairs.size(), 3u);
  std::string note;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const LemmaReport r = check_fgg_identity(pairs[k], dens, defaults().n_mc,
                                             derive_seed(defaults().seed, kStreamFgg + k), defaults().radial_spec());
    EXPECT_TRUE(passed(r)) << pairs[k].name << " " << r.notes;
    note += pairs[k].name + fmt(" %.3g/%.3g ", r.measured, r.bound);
  }
  EXPECT_LT(t.seconds(), 2 * 60.0);
  details()[11] = note + fmt("%.1fs", t.seconds());
}

TEST(Criterion12, InformationalReportsPresent) {
  const HardBuild& b = default_build();
  std::vector<LemmaReport> reps{check_flat(b.hard.family), check_nothinsh2(b.hard.family, b.search.spectra),
                                check_bigmass(b.hard, defaults().radial_spec()),
                                check_signschoice(b.hard.family, b.search)};
  std::ostringstream csv;
  write_reports_csv(reps, csv);
  std::string note;
  for (const char* id : {"flat", "nothinsh2", "bigmass", "signschoice"}) {
    EXPECT_NE(csv.str().find(std::string("\n") + id + ","), std::string::npos) << id;
  }
  for (const auto& r : reps) {
    EXPECT_TRUE(std::isfinite(r.margin)) << r.lemma_id;
    EXPECT_NE(r.verdict, Verdict::hard_pass) << r.lemma_id;
    note += r.lemma_id + "=" + verdict_name(r.verdict) + fmt("(%.3g) ", r.margin);
  }
  details()[12] = note;
}

TEST(Criterion13, WidthSweepDeterminism) {
  Timer t;
  SuiteConfig sc;
  sc.d = 3;
  const HardBuild hb = build_hard(sc);
  const ThreeLayerNet net = build_prop_approx(hb.hard, Activation::relu(), sc.delta);
  TrainConfig tc;
  tc.d = 3;
  auto target = [&](std::span<const double> x) { return eval_three_layer(net, x); };
  auto sweep_csv = [&] {
    const TrainData data = make_train_data(target, tc, 0, sc.radial_spec());
    const auto rows = width_sweep(data, {1, 2, 4, 8, 16}, tc);
    std::ostringstream os;
    write_sweep_csv(rows, tc, "g", dataset_checksum(data.eval), os);
    return os.str();
  };
  const std::string a = sweep_csv(), b = sweep_csv();
  EXPECT_EQ(a, b);
  // schema: comment header, column line, one row per width with six fields
  std::istringstream in(a);
  std::string line;
  int comments = 0, rows = 0;
  bool columns = false;
  while (std::getline(in, line)) {
    if (line.rfind("# ", 0) == 0 && line.find('=') != std::string::npos) {
      EXPECT_FALSE(columns);
      ++comments;
    } else if (line == "width,train_loss,eval_error,std_err,restarts,seconds") {
      columns = true;
    } else {
      ASSERT_TRUE(columns) << line;
      EXPECT_EQ(std::count(line.begin(), line.end(), ','), 5) << line;
      ++rows;
    }
  }
  EXPECT_TRUE(columns);
  EXPECT_GE(comments, 3);
  EXPECT_EQ(rows, 5);
  EXPECT_NE(a.find("# seed="), std::string::npos);
  EXPECT_NE(a.find("# tail_tol="), std::string::npos);
  EXPECT_NE(a.find("# target=g"), std::string::npos);

  // realizable target
  TrainConfig rc;
  rc.d = 2;
  rc.width = 1;
  rc.restarts = 8;
  auto unit = [](std::span<const double> x) { return std::max(0.0, 0.8 * x[0] - 0.6 * x[1] + 0.1); };
  const TrainData rd = make_train_data(unit, rc);
  const TrainResult rr = train_two_layer(rd, rc);
  EXPECT_LE(rr.row.eval_error, kRealizableTol);
  EXPECT_LT(t.seconds(), 30 * 60.0);
  details()[13] = fmt("realizable error %.3g, %.1fs; sweep:\n", rr.row.eval_error, t.seconds()) + a;
}

namespace {

class CriterionPrinter : public testing::EmptyTestEventListener {
  void OnTestEnd(const testing::TestInfo& info) override {
    const int n = std::atoi(info.test_suite_name() + std::string("Criterion").size());
    std::printf("criterion %2d %s  %s  %s\n", n, info.result()->Passed() ? "PASS" : "FAIL", info.name(),
                details()[n].c_str());
    std::fflush(stdout);
  }
};

}  // namespace

int main(int argc, char** argv) {
  testing::InitGoogleTest(&argc, argv);
  testing::UnitTest::GetInstance()->listeners().Append(new CriterionPrinter);
  return RUN_ALL_TESTS();
}
