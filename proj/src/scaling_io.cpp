#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "betr/scaling.hpp"

namespace betr {

namespace {

using nlohmann::json;

json params_to_json(const LossLawParams& p) {
  return {{"a", p.a},         {"b", p.b},   {"e", p.e},   {"alpha", p.alpha},
          {"beta", p.beta},   {"A", p.A()}, {"B", p.B()}, {"E", p.E()}};
}

LossLawParams params_from_json(const json& j) {
  return {j.at("a").get<double>(), j.at("b").get<double>(), j.at("e").get<double>(),
          j.at("alpha").get<double>(), j.at("beta").get<double>()};
}

json sigmoid_to_json(const SigmoidParams& p) {
  return {{"c1", p.c1}, {"c2", p.c2}, {"k", p.k}, {"L0", p.L0}};
}

SigmoidParams sigmoid_from_json(const json& j) {
  return {j.at("c1").get<double>(), j.at("c2").get<double>(), j.at("k").get<double>(),
          j.at("L0").get<double>()};
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  in >> j;
  return j;
}

void dump_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace

void write_loss_fit_json(const std::string& path, const LossLawFit& fit) {
  json j;
  j["kind"] = "loss_law_fit";
  j["params"] = params_to_json(fit.params);
  j["huber_delta"] = fit.huber_delta;
  j["fit_mae"] = fit.fit_mae;
  j["span_warning"] = fit.span_warning;
  j["bootstrap"] = json::array();
  for (const auto& b : fit.bootstrap) j["bootstrap"].push_back(params_to_json(b));
  dump_json(path, j);
}

LossLawFit read_loss_fit_json(const std::string& path) {
  const json j = load_json(path);
  if (j.value("kind", "") != "loss_law_fit")
    throw std::runtime_error(path + ": not a loss-law fit file");
  LossLawFit fit;
  fit.params = params_from_json(j.at("params"));
  fit.huber_delta = j.at("huber_delta").get<double>();
  fit.fit_mae = j.at("fit_mae").get<double>();
  fit.span_warning = j.at("span_warning").get<bool>();
  for (const auto& b : j.at("bootstrap")) fit.bootstrap.push_back(params_from_json(b));
  return fit;
}

void write_sigmoid_fit_json(const std::string& path, const SigmoidFit& fit) {
  json j;
  j["kind"] = "sigmoid_fit";
  j["params"] = sigmoid_to_json(fit.params);
  j["fit_mae"] = fit.fit_mae;
  j["bootstrap"] = json::array();
  for (const auto& b : fit.bootstrap) j["bootstrap"].push_back(sigmoid_to_json(b));
  dump_json(path, j);
}

SigmoidFit read_sigmoid_fit_json(const std::string& path) {
  const json j = load_json(path);
  if (j.value("kind", "") != "sigmoid_fit")
    throw std::runtime_error(path + ": not a sigmoid fit file");
  SigmoidFit fit;
  fit.params = sigmoid_from_json(j.at("params"));
  fit.fit_mae = j.at("fit_mae").get<double>();
  for (const auto& b : j.at("bootstrap")) fit.bootstrap.push_back(sigmoid_from_json(b));
  return fit;
}

void write_curve_json(const std::string& path, const ComputeOptimalCurve& curve) {
  json j;
  j["kind"] = "compute_optimal_curve";
  j["points"] = json::array();
  for (const auto& p : curve.points)
    j["points"].push_back({{"flops", p.flops},
                           {"n_opt", p.n_opt},
                           {"d_opt", p.d_opt},
                           {"value", p.value},
                           {"lo95", p.lo95},
                           {"hi95", p.hi95}});
  j["ensemble_values"] = curve.ensemble_values;
  dump_json(path, j);
}

ComputeOptimalCurve read_curve_json(const std::string& path) {
  const json j = load_json(path);
  if (j.value("kind", "") != "compute_optimal_curve")
    throw std::runtime_error(path + ": not a curve file");
  ComputeOptimalCurve curve;
  for (const auto& pj : j.at("points")) {
    CurvePoint p;
    p.flops = pj.at("flops").get<double>();
    p.n_opt = pj.at("n_opt").get<double>();
    p.d_opt = pj.at("d_opt").get<double>();
    p.value = pj.at("value").get<double>();
    p.lo95 = pj.at("lo95").get<double>();
    p.hi95 = pj.at("hi95").get<double>();
    curve.points.push_back(p);
  }
  curve.ensemble_values = j.at("ensemble_values").get<std::vector<std::vector<double>>>();
  return curve;
}

void write_curve_csv(const std::string& path, const ComputeOptimalCurve& curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(12);
  out << "compute,n_opt,d_opt,value,lo95,hi95\n";
  for (const auto& p : curve.points)
    out << p.flops << ',' << p.n_opt << ',' << p.d_opt << ',' << p.value << ',' << p.lo95 << ','
        << p.hi95 << '\n';
}

}  // namespace betr
