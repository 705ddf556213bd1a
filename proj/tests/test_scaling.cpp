#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "betr/rng.hpp"
#include "betr/scaling.hpp"
#include "temp_path.hpp"

using namespace betr;

namespace {

// Independent straight-line evaluation of the fitting objective, kept apart
// from the library implementation.
double objective_oracle(const LossLawParams& p, const std::vector<LossPoint>& pts, double delta) {
  double total = 0.0;
  for (const auto& pt : pts) {
    const double t1 = std::exp(p.a - p.alpha * std::log(pt.n_params));
    const double t2 = std::exp(p.b - p.beta * std::log(pt.tokens));
    const double t3 = std::exp(p.e);
    const double resid = std::log(t1 + t2 + t3) - std::log(pt.loss);
    const double ar = std::abs(resid);
    total += pt.weight * (ar <= delta ? 0.5 * resid * resid : delta * (ar - 0.5 * delta));
  }
  return total;
}

// the training grid: 8 model sizes x 8 token counts
std::vector<std::pair<double, double>> experiment_grid() {
  const double sizes[] = {50e6, 91e6, 175e6, 343e6, 790e6, 1.6e9, 3.1e9, 6.6e9};
  const double tokens[] = {1.1e9, 2.3e9, 4.7e9, 9.4e9, 19e9, 38e9, 76e9, 152e9};
  std::vector<std::pair<double, double>> grid;
  for (double n : sizes)
    for (double d : tokens) grid.emplace_back(n, d);
  return grid;
}

std::vector<LossPoint> planted_points(const LossLawParams& p, double noise_sigma,
                                      std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LossPoint> pts;
  for (const auto& [n, d] : experiment_grid()) {
    double loss = predict_loss(p, n, d);
    if (noise_sigma > 0.0) loss *= std::exp(noise_sigma * rng.next_normal());
    pts.push_back({n, d, loss, 1.0});
  }
  return pts;
}

LossLawParams planted_params() {
  LossLawParams p;
  p.a = std::log(400.0);
  p.b = std::log(900.0);
  p.e = std::log(1.8);
  p.alpha = 0.33;
  p.beta = 0.28;
  return p;
}

}  // namespace

TEST_CASE("objective equals the oracle on random inputs") {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    LossLawParams p{rng.next_double() * 10, rng.next_double() * 10, rng.next_double() * 2 - 1,
                    rng.next_double(), rng.next_double()};
    std::vector<LossPoint> pts;
    const std::size_t n = 1 + rng.next_below(5);
    for (std::size_t i = 0; i < n; ++i)
      pts.push_back({std::pow(10, 6 + 4 * rng.next_double()), std::pow(10, 8 + 3 * rng.next_double()),
                     0.5 + 4 * rng.next_double(), rng.next_double()});
    const double want = objective_oracle(p, pts, 1e-3);
    const double got = huber_lse_objective(p, pts, 1e-3);
    CHECK(std::abs(got - want) <= 1e-12 * std::max(1.0, std::abs(want)));
  }
}

TEST_CASE("objective is zero on exactly generated data") {
  auto p = planted_params();
  auto pts = planted_points(p, 0.0, 0);
  CHECK(huber_lse_objective(p, pts, 1e-3) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("single small residual sits in the quadratic Huber regime") {
  LossLawParams p = planted_params();
  std::vector<LossPoint> pts{{1e9, 1e10, predict_loss(p, 1e9, 1e10) * std::exp(5e-4), 1.0}};
  CHECK(huber_lse_objective(p, pts, 1e-3) == doctest::Approx(0.5 * 5e-4 * 5e-4).epsilon(1e-6));
}

TEST_CASE("predict_loss matches the paper-style evaluation") {
  // a=5.450 b=6.676 e=0.5218 alpha=0.3037 beta=0.3282 at N=1e9, D=1e10
  LossLawParams p{5.450, 6.676, 0.5218, 0.3037, 0.3282};
  const double val = predict_loss(p, 1e9, 1e10);
  CHECK(val == doctest::Approx(2.53).epsilon(0.01));
  // floor: with negligible A and B only E remains
  LossLawParams floor{-69, -69, 0.5218, 0.3037, 0.3282};
  CHECK(predict_loss(floor, 1e9, 1e10) == doctest::Approx(std::exp(0.5218)));
  // doubling N shrinks the N-term by 2^alpha
  const double n_term1 = predict_loss(p, 1e9, 1e10) - predict_loss(floor, 1e9, 1e10);
  (void)n_term1;
  CHECK(predict_loss(p, 2e9, 1e10) < val);
}

TEST_CASE("noise-free planted recovery") {
  auto p = planted_params();
  auto pts = planted_points(p, 0.0, 0);
  auto fit = fit_loss_law(pts, {});
  CHECK(fit.params.alpha == doctest::Approx(p.alpha).epsilon(1e-3));
  CHECK(fit.params.beta == doctest::Approx(p.beta).epsilon(1e-3));
  CHECK(fit.params.E() == doctest::Approx(p.E()).epsilon(1e-3));
  CHECK(fit.params.A() == doctest::Approx(p.A()).epsilon(1e-2));
  CHECK_FALSE(fit.span_warning);
}

TEST_CASE("bootstrap ensembles are reproducible from (data, seed, n)") {
  auto pts = planted_points(planted_params(), 0.01, 3);
  LossFitOptions opts;
  opts.bootstrap_n = 10;
  opts.seed = 99;
  auto f1 = fit_loss_law(pts, opts);
  auto f2 = fit_loss_law(pts, opts);
  REQUIRE(f1.bootstrap.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(f1.bootstrap[i].a == f2.bootstrap[i].a);
    CHECK(f1.bootstrap[i].alpha == f2.bootstrap[i].alpha);
  }
}

TEST_CASE("inverse density weights") {
  auto mk = [](double flops) {
    LossPoint p;
    p.n_params = flops / 6.0;
    p.tokens = 1.0;
    p.loss = 1.0;
    return p;
  };
  SUBCASE("all runs in one bin get equal weights") {
    std::vector<LossPoint> pts{mk(1e20), mk(1.1e20), mk(1.2e20)};
    auto w = inverse_density_weights(pts, 1);
    for (double wi : w) CHECK(wi == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("bins with counts {1, 3}") {
    std::vector<LossPoint> pts{mk(1e18), mk(1e20), mk(1.1e20), mk(1.2e20)};
    auto w = inverse_density_weights(pts, 1);
    CHECK(w[0] == doctest::Approx(1.0));
    CHECK(w[1] == doctest::Approx(1.0 / 3.0));
    CHECK(w[2] == doctest::Approx(1.0 / 3.0));
    CHECK(w[3] == doctest::Approx(1.0 / 3.0));
  }
}

TEST_CASE("n_opt closed form agrees with the numeric minimizer") {
  LossLawParams p{5.450, 6.676, 0.5218, 0.3037, 0.3282};
  for (double log_c = 18; log_c <= 23; log_c += 0.25) {
    const double c = std::pow(10.0, log_c);
    const double closed = n_opt(p, c);
    const double numeric = n_opt_numeric(p, c);
    CHECK(std::abs(closed - numeric) / closed < 1e-3);
  }
  // symmetric case: alpha=beta, A=B -> N_opt = sqrt(C/6)
  LossLawParams sym{2.0, 2.0, 0.0, 0.3, 0.3};
  CHECK(n_opt(sym, 6e20) == doctest::Approx(std::sqrt(1e20)).epsilon(1e-9));
}

TEST_CASE("tokens-per-parameter sits in the paper's range for the reference fit") {
  LossLawParams p{5.450, 6.676, 0.5218, 0.3037, 0.3282};
  for (double log_c = 18; log_c <= 23; log_c += 0.5) {
    const double c = std::pow(10.0, log_c);
    const double n = n_opt(p, c);
    const double d = c / (6.0 * n);
    CHECK(d / n >= 8.0);
    CHECK(d / n <= 14.0);
  }
}

TEST_CASE("sigmoid prediction and midpoint identity") {
  SigmoidParams hs{0.7488, 0.2520, -10.01, 0.6357};
  CHECK(predict_accuracy(hs, hs.L0) == doctest::Approx(0.7488 / 2 + 0.2520));
  CHECK(predict_accuracy(hs, hs.L0) == doctest::Approx(0.6264).epsilon(1e-3));
  // low loss saturates high for negative k
  CHECK(predict_accuracy(hs, 0.0) > predict_accuracy(hs, 2.0));
}

TEST_CASE("sigmoid recovery from the reference parameters") {
  SigmoidParams hs{0.7488, 0.2520, -10.01, 0.6357};
  Rng rng(5);
  std::vector<AccPoint> pts;
  for (double loss = 0.55; loss <= 1.0; loss += 0.025)
    pts.push_back({loss, predict_accuracy(hs, loss) + 0.005 * rng.next_normal()});
  auto fit = fit_sigmoid(pts, {});
  for (double loss = 0.55; loss <= 1.0; loss += 0.01)
    CHECK(predict_accuracy(fit.params, loss) ==
          doctest::Approx(predict_accuracy(hs, loss)).epsilon(0.02));
}

TEST_CASE("flat data degenerates gracefully") {
  std::vector<AccPoint> pts;
  for (double loss = 0.5; loss <= 1.5; loss += 0.1) pts.push_back({loss, 0.42});
  auto fit = fit_sigmoid(pts, {.append_anchor = false});
  for (const auto& p : pts)
    CHECK(predict_accuracy(fit.params, p.loss) == doctest::Approx(0.42).epsilon(1e-3));
}

TEST_CASE("anchor appears exactly once in every bootstrap refit") {
  // with the anchor the fit passes near (0, 1); bootstrap members must too
  SigmoidParams hs{0.7488, 0.2520, -10.01, 0.6357};
  std::vector<AccPoint> pts;
  for (double loss = 0.55; loss <= 1.0; loss += 0.05)
    pts.push_back({loss, predict_accuracy(hs, loss)});
  SigmoidFitOptions opts;
  opts.bootstrap_n = 20;
  opts.seed = 11;
  auto fit = fit_sigmoid(pts, opts);
  REQUIRE(fit.bootstrap.size() == 20);
  for (const auto& bp : fit.bootstrap)
    CHECK(predict_accuracy(bp, 0.0) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("mean accuracy averages benchmark predictions") {
  BenchmarkFits f1, f2;
  f1.loss.params = {5.450, 6.676, 0.5218, 0.3037, 0.3282};
  f2.loss.params = f1.loss.params;
  f1.sigmoid.params = {0.0, 0.4, -1.0, 1.0};  // constant 0.4
  f2.sigmoid.params = {0.0, 0.6, -1.0, 1.0};  // constant 0.6
  CHECK(mean_accuracy({f1, f2}, 1e9, 1e10) == doctest::Approx(0.5));
  CHECK(mean_accuracy({f1}, 1e9, 1e10) == doctest::Approx(0.4));
}

TEST_CASE("compute multiplier on identical and shifted curves") {
  LossLawFit val;
  val.params = {5.450, 6.676, 0.5218, 0.3037, 0.3282};
  BenchmarkFits bf;
  bf.loss = val;
  // midpoint placed inside the curve's loss range so accuracy actually moves
  bf.sigmoid.params = {0.7, 0.25, -5.0, 2.6};
  CurveOptions copts;
  copts.grid_points = 200;
  auto curve = compute_optimal_accuracy_curve(val, {bf}, copts);

  CHECK(compute_multiplier(curve, curve) == doctest::Approx(1.0));

  // method curve identical in accuracy but reached at half the compute
  auto shifted = curve;
  for (auto& p : shifted.points) p.flops /= 2.0;
  const double cm = compute_multiplier(curve, shifted);
  CHECK(cm == doctest::Approx(2.0).epsilon(0.01));
  const double cm_inv = compute_multiplier(shifted, curve);
  CHECK(cm * cm_inv == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("power law fit recovers planted exponents") {
  std::vector<std::pair<double, double>> xy;
  for (double log_c = 19; log_c <= 23; log_c += 0.2) {
    const double c = std::pow(10.0, log_c);
    xy.emplace_back(c, 4e-5 * std::pow(c, 0.25));
  }
  auto fit = fit_power_law(xy);
  CHECK(fit.exponent == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(fit.coefficient == doctest::Approx(4e-5).epsilon(1e-6));
}

TEST_CASE("optimal filter law: dominant curve gives flat probabilities") {
  CurveOptions copts;
  copts.grid_points = 20;
  std::vector<std::pair<double, ComputeOptimalCurve>> curves;
  for (double frac : {0.03, 0.10, 0.30}) {
    ComputeOptimalCurve c;
    for (int i = 0; i < copts.grid_points; ++i) {
      CurvePoint p;
      p.flops = std::pow(10.0, 19 + i * 0.2);
      p.value = frac == 0.10 ? 0.6 : 0.5;  // 10% dominates everywhere
      c.points.push_back(p);
    }
    curves.emplace_back(frac, c);
  }
  auto res = fit_optimal_filter_law(curves);
  CHECK(res.law.flat_warning);
  CHECK(res.law.exponent == doctest::Approx(0.0));
  for (const auto& row : res.probabilities) {
    double sum = 0;
    for (double p : row) sum += p;
    CHECK(sum == doctest::Approx(1.0));
    CHECK(row[1] == doctest::Approx(1.0));
  }
}

TEST_CASE("batch size selection") {
  CHECK(select_batch_size(1.1e9) == 262144);
  SUBCASE("monotone over the token grid") {
    std::uint64_t prev = 0;
    for (double d : {1.1e9, 2.3e9, 4.7e9, 9.4e9, 19e9, 38e9, 76e9, 152e9}) {
      const auto b = select_batch_size(d);
      CHECK(b >= prev);
      prev = b;
    }
  }
  SUBCASE("exact power of two is a fixed point without the safety margin") {
    BatchSizeLaw law;
    law.safety_reduction = 0.0;
    // pick D so that d * D^0.47 = 2^18 (nudged up past float round-down)
    const double d_tokens = std::pow(262144.0 / law.d, 1.0 / 0.47) * (1 + 1e-9);
    CHECK(select_batch_size(d_tokens, law) == 262144);
  }
}

TEST_CASE("runs CSV round-trips") {
  std::vector<RunRecord> runs(2);
  runs[0].run_id = "r1";
  runs[0].n_params = 50e6;
  runs[0].tokens = 1.1e9;
  runs[0].losses["val"] = 3.21;
  runs[0].accuracies["hellaswag"] = 0.31;
  runs[1].run_id = "r2";
  runs[1].n_params = 91e6;
  runs[1].tokens = 2.3e9;
  runs[1].flops_override = 1.5e18;
  runs[1].losses["val"] = 3.05;
  const std::string path = betr_test::temp_path(".csv");
  write_runs_csv(path, runs);
  auto loaded = read_runs_csv(path);
  std::remove(path.c_str());
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].losses.at("val") == doctest::Approx(3.21));
  CHECK(loaded[0].accuracies.at("hellaswag") == doctest::Approx(0.31));
  CHECK(loaded[1].flops() == doctest::Approx(1.5e18));
  CHECK(loaded[0].flops() == doctest::Approx(6.0 * 50e6 * 1.1e9));
}
