#include "betr/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "betr/optim.hpp"
#include "betr/rng.hpp"

namespace betr {

double LossLawParams::A() const { return std::exp(a); }
double LossLawParams::B() const { return std::exp(b); }
double LossLawParams::E() const { return std::exp(e); }

namespace {

double huber(double r, double delta) {
  const double ar = std::abs(r);
  return ar <= delta ? 0.5 * r * r : delta * (ar - 0.5 * delta);
}

double lse3(double x, double y, double z) {
  const double m = std::max(x, std::max(y, z));
  return m + std::log(std::exp(x - m) + std::exp(y - m) + std::exp(z - m));
}

LossLawParams unpack(const Eigen::VectorXd& v) {
  return {v(0), v(1), v(2), v(3), v(4)};
}

Eigen::VectorXd pack(const LossLawParams& p) {
  Eigen::VectorXd v(5);
  v << p.a, p.b, p.e, p.alpha, p.beta;
  return v;
}

double loss_mae(const LossLawParams& p, const std::vector<LossPoint>& points) {
  double sum = 0.0;
  for (const auto& pt : points) sum += std::abs(predict_loss(p, pt.n_params, pt.tokens) - pt.loss);
  return points.empty() ? 0.0 : sum / static_cast<double>(points.size());
}

}  // namespace

double huber_lse_objective(const LossLawParams& p, const std::vector<LossPoint>& points,
                           double delta) {
  double total = 0.0;
  for (const auto& pt : points) {
    if (!(pt.n_params > 0.0 && pt.tokens > 0.0 && pt.loss > 0.0) || pt.weight < 0.0 ||
        !std::isfinite(pt.loss))
      throw std::invalid_argument("loss points require positive N, D, L and non-negative weight");
    const double pred = lse3(p.a - p.alpha * std::log(pt.n_params),
                             p.b - p.beta * std::log(pt.tokens), p.e);
    total += pt.weight * huber(pred - std::log(pt.loss), delta);
  }
  return total;
}

double predict_loss(const LossLawParams& p, double n_params, double tokens) {
  return p.E() + p.A() * std::pow(n_params, -p.alpha) + p.B() * std::pow(tokens, -p.beta);
}

std::vector<double> inverse_density_weights(const std::vector<LossPoint>& points,
                                            int bins_per_decade) {
  if (points.empty()) throw std::invalid_argument("no points");
  std::vector<long> bin(points.size());
  std::map<long, std::size_t> counts;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double flops = 6.0 * points[i].n_params * points[i].tokens;
    bin[i] = static_cast<long>(std::floor(std::log10(flops) * bins_per_decade));
    ++counts[bin[i]];
  }
  std::vector<double> weights(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    weights[i] = 1.0 / static_cast<double>(counts[bin[i]]);
  return weights;
}

LossLawFit fit_loss_law(const std::vector<LossPoint>& points, const LossFitOptions& opts) {
  if (points.empty()) throw std::invalid_argument("no points to fit");

  auto objective_for = [&](const std::vector<LossPoint>& pts) {
    return [&pts, delta = opts.huber_delta](const Eigen::VectorXd& v) {
      return huber_lse_objective(unpack(v), pts, delta);
    };
  };
  const auto obj = objective_for(points);

  // coarse grid, then quasi-Newton refinement from the best starts
  std::vector<std::pair<double, Eigen::VectorXd>> grid;
  for (double a = 0.0; a <= 10.0; a += 2.5)
    for (double b = 0.0; b <= 10.0; b += 2.5)
      for (double e = -1.0; e <= 1.0; e += 0.5)
        for (double alpha = 0.1; alpha <= 0.61; alpha += 0.1)
          for (double beta = 0.1; beta <= 0.61; beta += 0.1) {
            Eigen::VectorXd v(5);
            v << a, b, e, alpha, beta;
            grid.emplace_back(obj(v), v);
          }
  std::sort(grid.begin(), grid.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });

  const int starts = std::max(1, opts.grid_starts);
  MinimizeResult best;
  best.value = std::numeric_limits<double>::infinity();
  for (int s = 0; s < starts && s < static_cast<int>(grid.size()); ++s) {
    MinimizeResult r = bfgs_minimize(obj, grid[static_cast<std::size_t>(s)].second);
    if (r.value < best.value) best = r;
  }
  if (!std::isfinite(best.value))
    throw std::runtime_error("loss-law optimizer failed on every grid start");

  LossLawFit fit;
  fit.params = unpack(best.x);
  fit.huber_delta = opts.huber_delta;
  fit.fit_mae = loss_mae(fit.params, points);

  {
    double n_lo = points[0].n_params, n_hi = n_lo, d_lo = points[0].tokens, d_hi = d_lo;
    for (const auto& pt : points) {
      n_lo = std::min(n_lo, pt.n_params);
      n_hi = std::max(n_hi, pt.n_params);
      d_lo = std::min(d_lo, pt.tokens);
      d_hi = std::max(d_hi, pt.tokens);
    }
    fit.span_warning = points.size() < 6 || n_hi / n_lo <= 10.0 || d_hi / d_lo <= 10.0;
  }

  if (opts.bootstrap_n > 0) {
    Rng rng(opts.seed);
    fit.bootstrap.reserve(static_cast<std::size_t>(opts.bootstrap_n));
    for (int k = 0; k < opts.bootstrap_n; ++k) {
      std::vector<LossPoint> resample(points.size());
      for (auto& pt : resample) pt = points[rng.next_below(points.size())];
      const auto boot_obj = [&resample, delta = opts.huber_delta](const Eigen::VectorXd& v) {
        return huber_lse_objective(unpack(v), resample, delta);
      };
      MinimizeResult r = bfgs_minimize(boot_obj, pack(fit.params));
      fit.bootstrap.push_back(unpack(r.x));
    }
  }
  return fit;
}

double n_opt(const LossLawParams& p, double flops) {
  if (!(flops > 0.0)) throw std::invalid_argument("compute must be positive");
  // d/dN [A N^-alpha + B (C/6N)^-beta] = 0
  const double ratio = (p.alpha * p.A()) / (p.beta * p.B());
  return std::pow(ratio, 1.0 / (p.alpha + p.beta)) *
         std::pow(flops / 6.0, p.beta / (p.alpha + p.beta));
}

double n_opt_numeric(const LossLawParams& p, double flops) {
  auto f = [&](double log_n) {
    const double n = std::exp(log_n);
    return predict_loss(p, n, flops / (6.0 * n));
  };
  const double log_n = golden_section_minimize(f, std::log(1.0), std::log(flops / 6.0), 1e-12);
  return std::exp(log_n);
}

double predict_accuracy(const SigmoidParams& p, double loss) {
  return p.c1 / (1.0 + std::exp(-p.k * (loss - p.L0))) + p.c2;
}

namespace {

Eigen::VectorXd pack_sigmoid(const SigmoidParams& p) {
  Eigen::VectorXd v(4);
  v << p.c1, p.c2, p.k, p.L0;
  return v;
}

SigmoidParams unpack_sigmoid(const Eigen::VectorXd& v) { return {v(0), v(1), v(2), v(3)}; }

double sigmoid_sse(const SigmoidParams& p, const std::vector<AccPoint>& pts) {
  double sse = 0.0;
  for (const auto& pt : pts) {
    const double r = predict_accuracy(p, pt.loss) - pt.accuracy;
    sse += r * r;
  }
  return sse;
}

SigmoidParams fit_sigmoid_once(const std::vector<AccPoint>& pts,
                               const std::vector<SigmoidParams>& starts) {
  const auto obj = [&pts](const Eigen::VectorXd& v) { return sigmoid_sse(unpack_sigmoid(v), pts); };
  MinimizeResult best;
  best.value = std::numeric_limits<double>::infinity();
  for (const auto& s : starts) {
    MinimizeResult r = bfgs_minimize(obj, pack_sigmoid(s));
    if (r.value < best.value) best = r;
  }
  if (!std::isfinite(best.value)) throw std::runtime_error("sigmoid fit failed from every start");
  return unpack_sigmoid(best.x);
}

}  // namespace

SigmoidFit fit_sigmoid(const std::vector<AccPoint>& points, const SigmoidFitOptions& opts) {
  std::vector<AccPoint> pts = points;
  if (opts.append_anchor) pts.push_back({0.0, 1.0});
  if (pts.size() < 4) throw std::invalid_argument("need >= 4 points (after anchoring) to fit");

  double acc_lo = pts[0].accuracy, acc_hi = acc_lo, loss_mid = 0.0;
  for (const auto& p : pts) {
    acc_lo = std::min(acc_lo, p.accuracy);
    acc_hi = std::max(acc_hi, p.accuracy);
    loss_mid += p.loss;
  }
  loss_mid /= static_cast<double>(pts.size());

  std::vector<SigmoidParams> starts;
  for (double k : {-15.0, -10.0, -5.0, -1.0, 1.0})
    for (double l0 : {0.5 * loss_mid, loss_mid, 1.5 * loss_mid})
      starts.push_back({acc_hi - acc_lo, acc_lo, k, l0});
  starts.push_back({0.0, (acc_lo + acc_hi) / 2.0, -1.0, loss_mid});

  SigmoidFit fit;
  fit.params = fit_sigmoid_once(pts, starts);
  {
    double sum = 0.0;
    for (const auto& p : points) sum += std::abs(predict_accuracy(fit.params, p.loss) - p.accuracy);
    fit.fit_mae = points.empty() ? 0.0 : sum / static_cast<double>(points.size());
  }

  if (opts.bootstrap_n > 0) {
    Rng rng(opts.seed);
    fit.bootstrap.reserve(static_cast<std::size_t>(opts.bootstrap_n));
    for (int k = 0; k < opts.bootstrap_n; ++k) {
      std::vector<AccPoint> resample(points.size());
      for (auto& p : resample) p = points[rng.next_below(points.size())];
      if (opts.append_anchor) resample.push_back({0.0, 1.0});  // anchor re-appended exactly once
      fit.bootstrap.push_back(fit_sigmoid_once(resample, {fit.params}));
    }
  }
  return fit;
}

double predict_accuracy(const LossLawParams& loss_p, const SigmoidParams& sig_p, double n_params,
                        double tokens) {
  return predict_accuracy(sig_p, predict_loss(loss_p, n_params, tokens));
}

double mean_accuracy(const std::vector<BenchmarkFits>& fits, double n_params, double tokens) {
  if (fits.empty()) throw std::invalid_argument("no benchmark fits");
  double sum = 0.0;
  for (const auto& f : fits)
    sum += predict_accuracy(f.loss.params, f.sigmoid.params, n_params, tokens);
  return sum / static_cast<double>(fits.size());
}

namespace {

std::vector<double> log_spaced(double lo, double hi, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  const double llo = std::log10(lo), lhi = std::log10(hi);
  for (int i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] =
        std::pow(10.0, llo + (lhi - llo) * i / std::max(1, n - 1));
  return out;
}

void fill_bands(ComputeOptimalCurve& curve) {
  if (curve.ensemble_values.empty()) {
    for (auto& p : curve.points) {
      p.lo95 = p.value;
      p.hi95 = p.value;
    }
    return;
  }
  const std::size_t k = curve.ensemble_values.size();
  std::vector<double> column(k);
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    for (std::size_t m = 0; m < k; ++m) column[m] = curve.ensemble_values[m][i];
    std::sort(column.begin(), column.end());
    auto pct = [&](double q) {
      const double pos = q * static_cast<double>(k - 1);
      const std::size_t lo = static_cast<std::size_t>(pos);
      const std::size_t hi = std::min(lo + 1, k - 1);
      return column[lo] + (column[hi] - column[lo]) * (pos - static_cast<double>(lo));
    };
    curve.points[i].lo95 = pct(0.025);
    curve.points[i].hi95 = pct(0.975);
  }
}

}  // namespace

ComputeOptimalCurve compute_optimal_loss_curve(const LossLawFit& fit, const CurveOptions& opts) {
  ComputeOptimalCurve curve;
  const auto grid = log_spaced(opts.flops_lo, opts.flops_hi, opts.grid_points);
  for (double c : grid) {
    CurvePoint p;
    p.flops = c;
    p.n_opt = n_opt(fit.params, c);
    p.d_opt = c / (6.0 * p.n_opt);
    p.value = predict_loss(fit.params, p.n_opt, p.d_opt);
    curve.points.push_back(p);
  }
  for (const auto& bp : fit.bootstrap) {
    std::vector<double> vals;
    vals.reserve(grid.size());
    for (double c : grid) {
      const double n = n_opt(bp, c);
      vals.push_back(predict_loss(bp, n, c / (6.0 * n)));
    }
    curve.ensemble_values.push_back(std::move(vals));
  }
  fill_bands(curve);
  return curve;
}

ComputeOptimalCurve compute_optimal_accuracy_curve(const LossLawFit& val_loss,
                                                   const std::vector<BenchmarkFits>& benchmarks,
                                                   const CurveOptions& opts) {
  if (benchmarks.empty()) throw std::invalid_argument("no benchmark fits");
  ComputeOptimalCurve curve;
  const auto grid = log_spaced(opts.flops_lo, opts.flops_hi, opts.grid_points);
  for (double c : grid) {
    CurvePoint p;
    p.flops = c;
    p.n_opt = n_opt(val_loss.params, c);
    p.d_opt = c / (6.0 * p.n_opt);
    p.value = mean_accuracy(benchmarks, p.n_opt, p.d_opt);
    curve.points.push_back(p);
  }

  // pairwise composition: val member k with each benchmark's members k
  std::size_t ensemble_n = val_loss.bootstrap.size();
  for (const auto& b : benchmarks) {
    ensemble_n = std::min(ensemble_n, b.loss.bootstrap.size());
    ensemble_n = std::min(ensemble_n, b.sigmoid.bootstrap.size());
  }
  for (std::size_t k = 0; k < ensemble_n; ++k) {
    std::vector<double> vals;
    vals.reserve(grid.size());
    for (double c : grid) {
      const double n = n_opt(val_loss.bootstrap[k], c);
      const double d = c / (6.0 * n);
      double sum = 0.0;
      for (const auto& b : benchmarks)
        sum += predict_accuracy(b.sigmoid.bootstrap[k],
                                predict_loss(b.loss.bootstrap[k], n, d));
      vals.push_back(sum / static_cast<double>(benchmarks.size()));
    }
    curve.ensemble_values.push_back(std::move(vals));
  }
  fill_bands(curve);
  return curve;
}

double compute_multiplier(const ComputeOptimalCurve& baseline, const ComputeOptimalCurve& method,
                          double accuracy_bin_width) {
  if (accuracy_bin_width <= 0.0) throw std::invalid_argument("bin width must be positive");
  auto bin_log_flops = [&](const ComputeOptimalCurve& c) {
    std::map<long, std::pair<double, std::size_t>> bins;  // bin -> (sum log C, count)
    for (const auto& p : c.points) {
      const long b = static_cast<long>(std::floor(p.value / accuracy_bin_width));
      auto& [sum, count] = bins[b];
      sum += std::log(p.flops);
      ++count;
    }
    return bins;
  };
  const auto base_bins = bin_log_flops(baseline);
  const auto meth_bins = bin_log_flops(method);

  double sum_ratio = 0.0;
  std::size_t overlap = 0;
  for (const auto& [b, base] : base_bins) {
    auto it = meth_bins.find(b);
    if (it == meth_bins.end()) continue;
    // geometric mean of FLOPs per bin (compute is log-distributed)
    const double base_mean = base.first / static_cast<double>(base.second);
    const double meth_mean = it->second.first / static_cast<double>(it->second.second);
    sum_ratio += std::exp(base_mean - meth_mean);
    ++overlap;
  }
  if (overlap < 3) throw std::invalid_argument("curves overlap in fewer than 3 accuracy bins");
  return sum_ratio / static_cast<double>(overlap);
}

PowerLawFit fit_power_law(const std::vector<std::pair<double, double>>& xy) {
  if (xy.size() < 2) throw std::invalid_argument("need >= 2 points for a power law");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : xy) {
    if (!(x > 0.0 && y > 0.0)) throw std::invalid_argument("power law requires positive data");
    const double lx = std::log(x), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = static_cast<double>(xy.size());
  const double denom = n * sxx - sx * sx;
  PowerLawFit fit;
  if (std::abs(denom) < 1e-30) {
    fit.exponent = 0.0;
    fit.coefficient = std::exp(sy / n);
    fit.flat_warning = true;
    return fit;
  }
  fit.exponent = (n * sxy - sx * sy) / denom;
  fit.coefficient = std::exp((sy - fit.exponent * sx) / n);
  return fit;
}

OptimalFilterResult fit_optimal_filter_law(
    const std::vector<std::pair<double, ComputeOptimalCurve>>& curves_by_fraction) {
  if (curves_by_fraction.size() < 3)
    throw std::invalid_argument("need >= 3 filter fractions");
  const std::size_t grid_n = curves_by_fraction.front().second.points.size();
  for (const auto& [f, c] : curves_by_fraction)
    if (c.points.size() != grid_n)
      throw std::invalid_argument("curves must share the compute grid");

  std::size_t ensemble_n = std::numeric_limits<std::size_t>::max();
  for (const auto& [f, c] : curves_by_fraction)
    ensemble_n = std::min(ensemble_n, c.ensemble_values.size());

  OptimalFilterResult res;
  for (const auto& [f, c] : curves_by_fraction) res.fractions.push_back(f);
  res.grid_flops.reserve(grid_n);
  for (const auto& p : curves_by_fraction.front().second.points) res.grid_flops.push_back(p.flops);

  res.probabilities.assign(grid_n, std::vector<double>(curves_by_fraction.size(), 0.0));
  for (std::size_t i = 0; i < grid_n; ++i) {
    if (ensemble_n == 0) {
      // no bootstrap: the main curves form a single-member ensemble
      std::size_t best = 0;
      for (std::size_t j = 1; j < curves_by_fraction.size(); ++j)
        if (curves_by_fraction[j].second.points[i].value >
            curves_by_fraction[best].second.points[i].value)
          best = j;
      res.probabilities[i][best] = 1.0;
    } else {
      for (std::size_t k = 0; k < ensemble_n; ++k) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < curves_by_fraction.size(); ++j)
          if (curves_by_fraction[j].second.ensemble_values[k][i] >
              curves_by_fraction[best].second.ensemble_values[k][i])
            best = j;
        res.probabilities[i][best] += 1.0 / static_cast<double>(ensemble_n);
      }
    }
    std::size_t argmax = 0;
    for (std::size_t j = 1; j < curves_by_fraction.size(); ++j)
      if (res.probabilities[i][j] > res.probabilities[i][argmax]) argmax = j;
    res.argmax_fraction.push_back(res.fractions[argmax]);
  }

  std::vector<std::pair<double, double>> xy;
  for (std::size_t i = 0; i < grid_n; ++i) xy.emplace_back(res.grid_flops[i], res.argmax_fraction[i]);
  std::size_t distinct = 1;
  for (std::size_t i = 1; i < res.argmax_fraction.size(); ++i)
    if (res.argmax_fraction[i] != res.argmax_fraction[0]) distinct = 2;
  if (distinct < 2) {
    res.law.coefficient = res.argmax_fraction.empty() ? 0.0 : res.argmax_fraction[0];
    res.law.exponent = 0.0;
    res.law.flat_warning = true;
  } else {
    res.law = fit_power_law(xy);
  }
  return res;
}

std::uint64_t select_batch_size(double tokens, const BatchSizeLaw& law) {
  if (!(tokens > 0.0)) throw std::invalid_argument("token count must be positive");
  const double b_star = law.d * std::pow(tokens, -law.gamma);
  const double reduced = b_star * (1.0 - law.safety_reduction);
  std::uint64_t p = 1;
  while (static_cast<double>(p) * 2.0 <= reduced) p *= 2;
  return p;
}

std::vector<RunRecord> read_runs_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<RunRecord> runs;
  std::map<std::string, std::size_t> index;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("run_id", 0) == 0) continue;  // header
    std::stringstream ss(line);
    std::string run_id, n_s, d_s, flops_s, metric, value_s, kind;
    if (!std::getline(ss, run_id, ',') || !std::getline(ss, n_s, ',') ||
        !std::getline(ss, d_s, ',') || !std::getline(ss, flops_s, ',') ||
        !std::getline(ss, metric, ',') || !std::getline(ss, value_s, ',') ||
        !std::getline(ss, kind, ','))
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 7 columns");
    auto [it, inserted] = index.try_emplace(run_id, runs.size());
    if (inserted) {
      RunRecord r;
      r.run_id = run_id;
      r.n_params = std::stod(n_s);
      r.tokens = std::stod(d_s);
      if (!flops_s.empty()) r.flops_override = std::stod(flops_s);
      runs.push_back(std::move(r));
    }
    RunRecord& rec = runs[it->second];
    const double value = std::stod(value_s);
    if (kind == "loss") {
      rec.losses[metric] = value;
    } else if (kind == "accuracy") {
      if (!(value >= 0.0 && value <= 1.0))
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": accuracy outside [0,1]");
      rec.accuracies[metric] = value;
    } else {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": kind must be loss|accuracy");
    }
  }
  return runs;
}

void write_runs_csv(const std::string& path, const std::vector<RunRecord>& runs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "run_id,n_params,tokens,flops,metric,value,kind\n";
  out.precision(12);
  for (const auto& r : runs) {
    auto prefix = [&]() -> std::ofstream& {
      out << r.run_id << ',' << r.n_params << ',' << r.tokens << ',';
      if (r.flops_override) out << *r.flops_override;
      return out;
    };
    for (const auto& [metric, v] : r.losses) prefix() << ',' << metric << ',' << v << ",loss\n";
    for (const auto& [metric, v] : r.accuracies)
      prefix() << ',' << metric << ',' << v << ",accuracy\n";
  }
}

}  // namespace betr
