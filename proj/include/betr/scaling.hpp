#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace betr {

struct RunRecord {
  std::string run_id;
  double n_params = 0.0;
  double tokens = 0.0;
  std::optional<double> flops_override;
  std::map<std::string, double> losses;      // metric name -> loss or BPB
  std::map<std::string, double> accuracies;  // benchmark -> accuracy in [0,1]

  double flops() const { return flops_override ? *flops_override : 6.0 * n_params * tokens; }
};

std::vector<RunRecord> read_runs_csv(const std::string& path);
void write_runs_csv(const std::string& path, const std::vector<RunRecord>& runs);

// One (N, D, L) observation for the loss-law fit.
struct LossPoint {
  double n_params = 0.0;
  double tokens = 0.0;
  double loss = 0.0;
  double weight = 1.0;
};

struct LossLawParams {
  // log-space parameters: a = log A, b = log B, e = log E
  double a = 0.0, b = 0.0, e = 0.0;
  double alpha = 0.0, beta = 0.0;

  double A() const;
  double B() const;
  double E() const;
};

struct LossLawFit {
  LossLawParams params;
  double huber_delta = 1e-3;
  double fit_mae = 0.0;
  bool span_warning = false;  // < 6 runs or < 1 decade span in N or D
  std::vector<LossLawParams> bootstrap;
};

// Huber(LSE(a - alpha*log N, b - beta*log D, e) - log L), weighted sum.
double huber_lse_objective(const LossLawParams& p, const std::vector<LossPoint>& points,
                           double delta);

// L(N, D) = E + A/N^alpha + B/D^beta.
double predict_loss(const LossLawParams& p, double n_params, double tokens);

struct LossFitOptions {
  double huber_delta = 1e-3;
  int bootstrap_n = 0;
  std::uint64_t seed = 0;
  int grid_starts = 10;  // best grid points refined by BFGS
};

LossLawFit fit_loss_law(const std::vector<LossPoint>& points, const LossFitOptions& opts = {});

// weight_i = 1 / (count of runs in run_i's log10-FLOPs bin).
std::vector<double> inverse_density_weights(const std::vector<LossPoint>& points,
                                            int bins_per_decade);

// Compute-optimal model size under C = 6ND: closed-form first-order condition.
double n_opt(const LossLawParams& p, double flops);
// Numeric cross-check via golden-section search over log N.
double n_opt_numeric(const LossLawParams& p, double flops);

struct SigmoidParams {
  double c1 = 0.0, c2 = 0.0, k = 0.0, L0 = 0.0;
};

struct SigmoidFit {
  SigmoidParams params;
  double fit_mae = 0.0;
  std::vector<SigmoidParams> bootstrap;
};

// Acc(L) = c1 / (1 + exp(-k (L - L0))) + c2.
double predict_accuracy(const SigmoidParams& p, double loss);

struct SigmoidFitOptions {
  int bootstrap_n = 0;
  std::uint64_t seed = 0;
  bool append_anchor = true;  // (L=0, Acc=1) appended to every fit
};

struct AccPoint {
  double loss = 0.0;
  double accuracy = 0.0;
};

SigmoidFit fit_sigmoid(const std::vector<AccPoint>& points, const SigmoidFitOptions& opts = {});

// Two-step prediction: loss law then sigmoid.
double predict_accuracy(const LossLawParams& loss_p, const SigmoidParams& sig_p, double n_params,
                        double tokens);

struct BenchmarkFits {
  LossLawFit loss;
  SigmoidFit sigmoid;
};

// Unweighted average of per-benchmark predictions at (N, D).
double mean_accuracy(const std::vector<BenchmarkFits>& fits, double n_params, double tokens);

struct CurvePoint {
  double flops = 0.0;
  double n_opt = 0.0;
  double d_opt = 0.0;
  double value = 0.0;  // loss or accuracy at the compute-optimal point
  double lo95 = 0.0;
  double hi95 = 0.0;
};

struct ComputeOptimalCurve {
  std::vector<CurvePoint> points;
  // bootstrap ensemble of the value track, ensemble-major:
  // ensemble_values[k][i] = member k's value at points[i].flops
  std::vector<std::vector<double>> ensemble_values;
};

struct CurveOptions {
  double flops_lo = 1e18;
  double flops_hi = 1e23;
  int grid_points = 40;
};

// Loss along the compute-optimal path of a single loss-law fit.
ComputeOptimalCurve compute_optimal_loss_curve(const LossLawFit& fit, const CurveOptions& opts = {});

// Accuracy along the validation-loss-defined compute-optimal path. N_opt
// comes from `val_loss` per compute budget; accuracy is the mean over
// benchmark fits. Bootstrap members compose pairwise by ensemble index.
ComputeOptimalCurve compute_optimal_accuracy_curve(const LossLawFit& val_loss,
                                                   const std::vector<BenchmarkFits>& benchmarks,
                                                   const CurveOptions& opts = {});

// Mean ratio of baseline FLOPs to method FLOPs over overlapping accuracy
// bins. FLOPs are averaged geometrically within bins.
double compute_multiplier(const ComputeOptimalCurve& baseline, const ComputeOptimalCurve& method,
                          double accuracy_bin_width = 0.0025);

struct PowerLawFit {
  double coefficient = 0.0;
  double exponent = 0.0;
  bool flat_warning = false;  // exponent unidentifiable (single argmax fraction)
};

// Least squares in log-log space: y = coefficient * x^exponent.
PowerLawFit fit_power_law(const std::vector<std::pair<double, double>>& xy);

struct OptimalFilterResult {
  PowerLawFit law;
  std::vector<double> grid_flops;
  // probabilities[i][f] = P(fraction f optimal at grid point i), rows sum to 1
  std::vector<std::vector<double>> probabilities;
  std::vector<double> fractions;       // column order for probabilities
  std::vector<double> argmax_fraction;  // per grid point, highest-probability fraction
};

// Per-compute optimal filtering fraction from bootstrap curve ensembles, and
// the fitted power law over the argmax track.
OptimalFilterResult fit_optimal_filter_law(
    const std::vector<std::pair<double, ComputeOptimalCurve>>& curves_by_fraction);

struct BatchSizeLaw {
  double d = 22.91;
  double gamma = -0.47;
  double safety_reduction = 0.20;
};

// B* = d * D^{-gamma}, reduced by the safety margin, rounded down to a
// power of two (in tokens).
std::uint64_t select_batch_size(double tokens, const BatchSizeLaw& law = {});

// JSON artifacts carry full parameter tuples plus bootstrap ensembles so the
// downstream curve/cm/fopt steps can propagate uncertainty.
void write_loss_fit_json(const std::string& path, const LossLawFit& fit);
LossLawFit read_loss_fit_json(const std::string& path);
void write_sigmoid_fit_json(const std::string& path, const SigmoidFit& fit);
SigmoidFit read_sigmoid_fit_json(const std::string& path);
void write_curve_json(const std::string& path, const ComputeOptimalCurve& curve);
ComputeOptimalCurve read_curve_json(const std::string& path);
// plot-ready CSV: compute,n_opt,d_opt,value,lo95,hi95
void write_curve_csv(const std::string& path, const ComputeOptimalCurve& curve);

}  // namespace betr
