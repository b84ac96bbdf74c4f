#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "depthsep/netbuild.hpp"

using namespace depthsep;

namespace {

// sup |f - h| on an evenly spaced grid
double grid_sup_error(const std::function<double(double)>& f, const UnivariateApproximator& h, const Activation& act,
                      double lo, double hi, int n = 10000) {
  double e = 0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + (hi - lo) * i / n;
    e = std::max(e, std::fabs(f(x) - h(act, x)));
  }
  return e;
}

// random piecewise-linear f, L-Lipschitz, constant outside [-R, R]
struct RandomPl {
  std::vector<double> xs, ys;
  double operator()(double x) const {
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t i = it - xs.begin();
    const double t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    return ys[i - 1] + t * (ys[i] - ys[i - 1]);
  }
};

RandomPl random_pl(std::mt19937_64& rng, double L, double R) {
  std::uniform_real_distribution<double> u(-1, 1);
  RandomPl f;
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

std::vector<double> random_point(std::mt19937_64& rng, int d, double radius) {
  std::normal_distribution<double> g;
  std::vector<double> x(d);
  double n2 = 0;
  for (auto& v : x) {
    v = g(rng);
    n2 += v * v;
  }
  for (auto& v : x) v *= radius / std::sqrt(n2);
  return x;
}

RadialProfile trapezoid(double lo, double hi, double L) {
  RadialProfile p;
  p.lo = lo;
  p.hi = hi;
  p.eval = [lo, hi, L](double r) { return std::min(1.0, L * std::max(0.0, std::min(r - lo, hi - r))); };
  p.breakpoints = {lo + 1 / L, hi - 1 / L};
  p.piecewise_linear = true;
  return p;
}

HardFunction default_hard() {
  IntervalFamily f = build_family(4, 25.0, default_interval_count(4, 25.0));
  SignVector s;
  s.eps = trial_signs(f.N, 1, 0);
  return make_hard_function(std::move(f), std::move(s));
}

}  // namespace

TEST(Activation, ValuesAndGrowth) {
  const Activation r = Activation::relu(), t = Activation::threshold();
  EXPECT_EQ(r(-2.0), 0.0);
  EXPECT_EQ(r(2.5), 2.5);
  EXPECT_EQ(t(-1e-9), 0.0);
  EXPECT_EQ(t(0.0), 1.0);
  EXPECT_EQ(r.c_sigma, 3.0);
  EXPECT_EQ(t.c_sigma, 2.0);
  EXPECT_TRUE(growth_bound_holds(r));
  EXPECT_TRUE(growth_bound_holds(t));
  Activation e;
  e.kind = ActivationKind::custom;
  e.fn = [](double x) { return std::exp(std::min(x, 700.0)); };
  EXPECT_FALSE(growth_bound_holds(e));
  Activation sq = e;
  sq.fn = [](double x) { return x * x; };
  sq.growth_alpha = 2.0;
  EXPECT_TRUE(growth_bound_holds(sq));
}

TEST(UnivariateRelu, Examples) {
  const auto zero = build_univariate_relu([](double) { return 0.0; }, 1.0, 1.0, 0.1);
  EXPECT_EQ(zero.width(), 0u);
  EXPECT_EQ(zero.a, 0.0);
  // 2RL < delta
  const auto small = build_univariate_relu([](double x) { return 0.1 * std::clamp(x, -1.0, 1.0); }, 0.1, 1.0, 0.5);
  EXPECT_EQ(small.width(), 0u);

  const Activation act = Activation::relu();
  auto f = [](double x) { return std::min(x * x, 1.0); };
  const auto h = build_univariate_relu(f, 2.0, 1.0, 0.5);
  for (const auto& t : h.terms) EXPECT_EQ(std::fmod(t.gamma, 0.25), 0.0) << t.gamma;
  EXPECT_LE(grid_sup_error(f, h, act, -1, 1), 0.5);
  EXPECT_LE(grid_sup_error(f, h, act, -3, 3), 0.5);
  EXPECT_LE(h.width(), 12u);
  EXPECT_LE(h.max_abs_alpha(), 4.0);
  EXPECT_THROW(build_univariate_relu(f, 2.0, 1.0, 0.0), std::domain_error);
  EXPECT_THROW(build_univariate_relu(f, 2.0, 1.0, -1.0), std::domain_error);
}

TEST(UnivariateRelu, HundredRandomCases) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0, 1);
  const Activation act = Activation::relu();
  int failures = 0;
  for (int c = 0; c < 100; ++c) {
    const double L = std::exp(std::log(0.1) + u(rng) * std::log(100.0));
    const double R = 0.1 + 5 * u(rng);
    // R L / delta spans [0.3, 300], covering the constant, coarse and regular branches
    const double delta = R * L / std::exp(std::log(0.3) + u(rng) * std::log(1000.0));
    const RandomPl f = random_pl(rng, L, R);
    const auto h = build_univariate_relu(f, L, R, delta);
    const double err = grid_sup_error(f, h, act, -1.5 * R - 1, 1.5 * R + 1);
    const bool ok = err <= delta && h.width() <= 3 * R * L / delta && h.max_abs_alpha() <= 2 * L;
    if (!ok) ++failures;
    EXPECT_TRUE(ok) << "case " << c << " L=" << L << " R=" << R << " delta=" << delta << " err=" << err
                    << " width=" << h.width();
  }
  EXPECT_EQ(failures, 0);
}

TEST(UnivariateThreshold, Examples) {
  const Activation act = Activation::threshold();
  const auto k = build_univariate_threshold([](double) { return 1.75; }, 0.0, 1.0, 0.1);
  EXPECT_EQ(k.a, 1.75);
  EXPECT_LE(k.width(), 1u);
  auto f = [](double x) { return std::clamp(x, -1.0, 1.0); };
  const auto h = build_univariate_threshold(f, 1.0, 1.0, 0.25);
  EXPECT_LE(h.width(), 8u);
  EXPECT_LE(grid_sup_error(f, h, act, -2, 2), 0.25);
}

TEST(UnivariateThreshold, RandomCasesAndWidthFormula) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0, 1);
  const Activation act = Activation::threshold();
  for (int c = 0; c < 100; ++c) {
    const double L = 0.1 + 10 * u(rng), R = 0.1 + 5 * u(rng), delta = 0.01 + u(rng);
    const RandomPl f = random_pl(rng, L, R);
    const auto h = build_univariate_threshold(f, L, R, delta);
    EXPECT_LE(grid_sup_error(f, h, act, -1.5 * R - 1, 1.5 * R + 1), delta) << c;
    EXPECT_LE(static_cast<double>(h.width()), 2 * R * L / delta + 1) << c;
  }
}

TEST(TwoLayer, Examples) {
  TwoLayerNet z;
  z.d = 3;
  z.add_unit(0.0, std::vector<double>{0, 0, 0}, 0.0);
  const std::vector<double> x{2.0, -1.0, 5.0};
  EXPECT_EQ(eval_two_layer(z, x), 0.0);
  TwoLayerNet one;
  one.d = 3;
  one.add_unit(1.0, std::vector<double>{1, 0, 0}, 0.0);
  EXPECT_EQ(eval_two_layer(one, x), 2.0);
  EXPECT_THROW(eval_two_layer(one, std::vector<double>{1.0}), std::invalid_argument);
  EXPECT_THROW(one.add_unit(1.0, std::vector<double>{1.0}, 0.0), std::invalid_argument);
}

TEST(ThreeLayer, AllZeroParameters) {
  ThreeLayerNet n;
  n.d = 2;
  n.w1 = {0, 0, 0, 0};
  n.b1 = {0, 0};
  n.a1 = {0, 0};
  n.u = {0, 0};
  n.beta = {0, 0};
  n.v0 = {0, 0};
  n.c = {0, 0};
  n.finalize();
  EXPECT_EQ(eval_three_layer(n, std::vector<double>{1.5, -2.0}), 0.0);
  EXPECT_THROW(eval_three_layer(n, std::vector<double>{1.5}), std::invalid_argument);
}

TEST(Radial3Layer, ZeroProfile) {
  const ThreeLayerNet n = build_radial_3layer(zero_profile(1.0, 3.0), 1.0, 0.1, Activation::relu(), 3);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 500; ++i) {
    const auto x = random_point(rng, 3, 5.0 * (i % 100) / 100.0);
    EXPECT_LE(std::fabs(eval_three_layer(n, x)), 0.1);
  }
  EXPECT_THROW(build_radial_3layer(zero_profile(0.5, 3.0), 1.0, 0.1, Activation::relu(), 3), std::domain_error);
  EXPECT_THROW(build_radial_3layer(zero_profile(1.0, 3.0), 1.0, 0.0, Activation::relu(), 3), std::domain_error);
}

TEST(Radial3Layer, SupErrorAndCompositionSmall) {
  for (const Activation& act : {Activation::relu(), Activation::threshold()}) {
    const int d = 3;
    const double L = 4.0, delta = 0.1;
    RadialProfile f = trapezoid(1.0, 3.0, L);
    const ThreeLayerNet n = build_radial_3layer(f, L, delta, act, d);
    EXPECT_LE(static_cast<double>(n.width()), radial_3layer_width_bound(d, 1.0, 3.0, L, delta, act.c_sigma));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    double worst = 0;
    for (int i = 0; i < 4000; ++i) {
      const double r = 4.0 * u(rng);
      const auto x = random_point(rng, d, r);
      const double g = eval_three_layer(n, x);
      worst = std::max(worst, std::fabs(g - f(r)));
      const double comp = eval_composition(n, x);
      EXPECT_NEAR(g, comp, 1e-12) << activation_name(act.kind);
    }
    EXPECT_LE(worst, delta) << activation_name(act.kind);
  }
}

TEST(Radial3Layer, SmoothProfileUsesLipschitzKnots) {
  RadialProfile f;
  f.lo = 2.0;
  f.hi = 4.0;
  f.eval = [](double r) { return std::pow(std::sin(std::numbers::pi * (r - 2.0) / 2.0), 2); };
  const double L = std::numbers::pi / 2, delta = 0.05;
  const ThreeLayerNet n = build_radial_3layer(f, L, delta, Activation::relu(), 2);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 3000; ++i) {
    const double r = 5.0 * u(rng);
    EXPECT_LE(std::fabs(eval_three_layer(n, random_point(rng, 2, r)) - f(r)), delta) << r;
  }
}

TEST(Radial3Layer, FoldedConstant) {
  // a profile whose s~ has a nonzero left value exercises the extra neuron
  RadialProfile f;
  f.lo = 1.0;
  f.hi = 2.0;
  f.eval = [](double) { return 0.25; };
  f.piecewise_linear = true;
  const ThreeLayerNet n = build_radial_3layer(f, 1.0, 0.05, Activation::relu(), 2);
  EXPECT_EQ(n.v0.back(), 1.0);
  EXPECT_EQ(n.beta.back(), 0.0);
  EXPECT_EQ(n.c.back(), 1.0);
  EXPECT_EQ(n.first_units(), n.a1.size() + 1);
  EXPECT_NEAR(eval_three_layer(n, std::vector<double>{0.0, 0.0}), 0.25, 1e-12);
}

class DefaultNet : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    hard_ = new HardFunction(default_hard());
    net_ = new ThreeLayerNet(build_prop_approx(*hard_, Activation::relu(), 0.05));
  }
  static void TearDownTestSuite() {
    delete net_;
    delete hard_;
  }
  static HardFunction* hard_;
  static ThreeLayerNet* net_;
};
HardFunction* DefaultNet::hard_ = nullptr;
ThreeLayerNet* DefaultNet::net_ = nullptr;

TEST_F(DefaultNet, WidthWithinBothFormulas) {
  const HardFunction& h = *hard_;
  const double base = h.family.base;
  EXPECT_LE(static_cast<double>(net_->width()), prop_approx_width_bound(4, 25.0, h.family.N, 0.05, 3.0));
  EXPECT_LE(static_cast<double>(net_->width()),
            radial_3layer_width_bound(4, base, 2 * base, h.surrogate_lipschitz, 0.05, 3.0));
}

TEST_F(DefaultNet, SupErrorOnRandomPoints) {
  const HardFunction& h = *hard_;
  const double base = h.family.base;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  const std::vector<double> bp = surrogate_breakpoints(h);
  double worst = 0, lo = 0, hi = 0;
  for (int i = 0; i < 10000; ++i) {
    // half of the radii near a surrogate breakpoint, where the error concentrates
    const double r = i % 2 ? 3 * base * u(rng) : bp[rng() % bp.size()] + (u(rng) - 0.5) * 2 / h.surrogate_lipschitz;
    const auto x = random_point(rng, 4, r);
    const double g = eval_three_layer(*net_, x);
    worst = std::max(worst, std::fabs(g - eval_surrogate(h, r)));
    lo = std::min(lo, g);
    hi = std::max(hi, g);
  }
  EXPECT_LE(worst, 0.05);
  EXPECT_GE(lo, -2.0);
  EXPECT_LE(hi, 2.0);
}

TEST_F(DefaultNet, RadialSymmetry) {
  const double base = hard_->family.base;
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 2000; ++i) {
    const double r = base * (0.9 + 1.2 * u(rng));
    const auto x = random_point(rng, 4, r), y = random_point(rng, 4, r);
    EXPECT_LE(std::fabs(eval_three_layer(*net_, x) - eval_three_layer(*net_, y)), 2 * 0.05);
  }
}

TEST_F(DefaultNet, CompositionIdentity) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0, 1);
  const double base = hard_->family.base;
  for (int i = 0; i < 300; ++i) {
    const auto x = random_point(rng, 4, base * 2.2 * u(rng));
    const double g = eval_three_layer(*net_, x), c = eval_composition(*net_, x);
    // both sum the same first-layer terms in a different grouping; the sum reaches |x|^2 ~ 1e4
    // and s~ amplifies its rounding by its slope N / (2 base)
    double ell = 0;
    for (double v : x) ell += v * v;
    const double slope = hard_->surrogate_lipschitz / (2 * base);
    EXPECT_NEAR(g, c, 1e-12 * (1 + slope * ell)) << ell;
  }
}

namespace {
template <class Net>
std::string dump(const Net& n) {
  std::ostringstream os;
  if constexpr (std::is_same_v<Net, TwoLayerNet>)
    write_two_layer(n, os);
  else
    write_three_layer(n, os);
  return os.str();
}
}  // namespace

TEST(Serialization, TwoLayerRoundTrip) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  TwoLayerNet n;
  n.d = 3;
  for (int i = 0; i < 7; ++i) n.add_unit(g(rng), std::vector<double>{g(rng), g(rng), g(rng)}, g(rng));
  std::istringstream is(dump(n));
  const TwoLayerNet back = read_two_layer(is);
  EXPECT_EQ(back.v, n.v);
  EXPECT_EQ(back.w, n.w);
  EXPECT_EQ(back.b, n.b);
  EXPECT_EQ(dump(back), dump(n));
  const std::vector<double> x{0.3, -1.1, 2.0};
  EXPECT_EQ(eval_two_layer(back, x), eval_two_layer(n, x));
}

TEST(Serialization, ThreeLayerRoundTrip) {
  for (const Activation& act : {Activation::relu(), Activation::threshold()}) {
    const ThreeLayerNet n = build_radial_3layer(trapezoid(1.0, 2.0, 3.0), 3.0, 0.2, act, 2);
    std::istringstream is(dump(n));
    const ThreeLayerNet back = read_three_layer(is);
    EXPECT_EQ(back.act.kind, act.kind);
    EXPECT_EQ(back.w1, n.w1);
    EXPECT_EQ(back.c, n.c);
    EXPECT_EQ(dump(back), dump(n));
    for (double r : {0.5, 1.2, 1.5, 1.9, 2.5}) {
      const std::vector<double> x{r * 0.6, r * 0.8};
      EXPECT_EQ(eval_three_layer(back, x), eval_three_layer(n, x));
    }
  }
}

TEST(Serialization, Rejections) {
  std::istringstream bad("layers 2\nd 2\nactivation relu\nwidth 1\nU 0x1p+0 0x0p+0 1\n");
  EXPECT_THROW(read_two_layer(bad), std::invalid_argument);
  std::istringstream wrong("layers 3\n");
  EXPECT_THROW(read_two_layer(wrong), std::invalid_argument);
  std::istringstream custom("layers 2\nd 1\nactivation custom\nwidth 0\n");
  EXPECT_THROW(read_two_layer(custom), std::invalid_argument);
  std::istringstream trailing("layers 2\nd 1\nactivation relu\nwidth 0\nU 1 2 3\n");
  EXPECT_THROW(read_two_layer(trailing), std::invalid_argument);
}
