#pragma once

// JSON (de)serialization of the double-precision types: model files, prior
// specs, covariances, check reports, design results and experiment output.
// Matrices are row-major nested arrays of numbers; ragged rows are rejected.
// Infinite report entries serialize as the string "inf".

#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include <json.hpp>

#include "dplds/covariance.hpp"
#include "dplds/errors.hpp"
#include "dplds/experiment.hpp"
#include "dplds/noise_design.hpp"
#include "dplds/privacy.hpp"
#include "dplds/state_space.hpp"

namespace dplds {

using json = nlohmann::json;

inline json matrix_to_json(const MatrixX<double>& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline MatrixX<double> matrix_from_json(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty())
    throw DomainError(name + ": expected a nonempty array of rows");
  const auto& first = j.at(0);
  if (!first.is_array() || first.empty())
    throw DomainError(name + ": rows must be nonempty arrays");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = static_cast<Index>(first.size());
  MatrixX<double> m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto& row = j.at(i);
    if (!row.is_array() || static_cast<Index>(row.size()) != cols)
      throw DomainError(name + ": ragged rows (row " + std::to_string(i) + ")");
    for (Index k = 0; k < cols; ++k) {
      const auto& entry = row.at(k);
      if (!entry.is_number())
        throw DomainError(name + ": entries must be numbers");
      m(i, k) = entry.get<double>();
    }
  }
  return m;
}

inline json model_to_json(const StateSpaceModel<double>& model) {
  return json{{"A", matrix_to_json(model.A())},
              {"B", matrix_to_json(model.B())},
              {"C", matrix_to_json(model.C())},
              {"D", matrix_to_json(model.D())}};
}

inline StateSpaceModel<double> model_from_json(const json& j) {
  for (const char* key : {"A", "B", "C", "D"})
    if (!j.contains(key))
      throw DomainError(std::string("model: missing matrix \"") + key + "\"");
  return StateSpaceModel<double>(matrix_from_json(j.at("A"), "A"), matrix_from_json(j.at("B"), "B"),
                                 matrix_from_json(j.at("C"), "C"), matrix_from_json(j.at("D"), "D"));
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DomainError(path + ": " + e.what());
  }
  return j;
}

inline StateSpaceModel<double> load_model(const std::string& path) {
  return model_from_json(load_json_file(path));
}

/// Accepts either a bare 2-D array or an object with a "matrix" entry.
inline CovarianceMatrix<double> covariance_from_json(const json& j, const std::string& name) {
  if (j.is_array()) return CovarianceMatrix<double>(matrix_from_json(j, name));
  if (j.is_object() && j.contains("matrix"))
    return CovarianceMatrix<double>(matrix_from_json(j.at("matrix"), name));
  throw DomainError(name + ": expected a matrix or an object with a \"matrix\" entry");
}

/// Prior specification:
///   {"type": "filter",     "model": {...}}            driven by white noise
///   {"type": "step",       "sigma_s": [[...]]}        constant reference
///   {"type": "covariance", "matrix": [[...]]}         explicit covariance
inline GaussianPrior<double> prior_from_json(const json& j, Index horizon) {
  if (!j.is_object() || !j.contains("type"))
    throw DomainError("prior: expected an object with a \"type\" entry");
  const std::string type = j.at("type").get<std::string>();
  if (type == "filter") {
    if (!j.contains("model")) throw DomainError("prior: filter prior needs a \"model\" entry");
    return filter_prior(model_from_json(j.at("model")), horizon);
  }
  if (type == "step") {
    if (!j.contains("sigma_s")) throw DomainError("prior: step prior needs a \"sigma_s\" entry");
    return step_prior(CovarianceMatrix<double>(matrix_from_json(j.at("sigma_s"), "sigma_s")),
                      horizon);
  }
  if (type == "covariance") {
    if (!j.contains("matrix")) throw DomainError("prior: covariance prior needs a \"matrix\" entry");
    auto cov = CovarianceMatrix<double>(matrix_from_json(j.at("matrix"), "matrix"));
    return GaussianPrior<double>(std::move(cov), horizon);
  }
  throw DomainError("prior: unknown type \"" + type + "\"");
}

inline json finite_or_inf(double x) {
  if (std::isinf(x)) return json(x > 0 ? "inf" : "-inf");
  return json(x);
}

inline json check_report_to_json(const CheckReport<double>& report) {
  json j{{"satisfied", report.satisfied},
         {"lhs", finite_or_inf(report.lhs)},
         {"rhs", finite_or_inf(report.rhs)},
         {"margin", finite_or_inf(report.margin)},
         {"precision", report.precision},
         {"epsilon", report.epsilon},
         {"delta", report.delta},
         {"gamma", report.gamma},
         {"T", report.horizon}};
  if (report.samples) j["samples"] = *report.samples;
  if (report.gamma_hat) j["gamma_hat"] = *report.gamma_hat;
  if (report.ci) j["ci"] = *report.ci;
  return j;
}

inline json design_result_to_json(const DesignResult<double>& result) {
  const auto& mech = result.mechanism;
  return json{{"formula", result.formula},
              {"channel", mech.channel() == NoiseChannel::kInput ? "input" : "output"},
              {"trace", result.trace},
              {"mean", std::vector<double>(mech.mean().data(), mech.mean().data() + mech.mean().size())},
              {"covariance", matrix_to_json(mech.covariance().matrix())},
              {"epsilon", result.check.epsilon},
              {"delta", result.check.delta},
              {"gamma", result.check.gamma},
              {"T", result.check.horizon},
              {"check", check_report_to_json(result.check)}};
}

inline json experiment_report_to_json(const ExperimentReport<double>& report) {
  json mechanisms = json::array();
  for (const auto& outcome : report.mechanisms) {
    json entry{{"name", outcome.name},
               {"noise_trace", outcome.noise_trace},
               {"error_variance_trace", outcome.error_variance_trace},
               {"mse_per_seed", outcome.mse_per_seed},
               {"mse_mean", outcome.mse_mean}};
    entry["check"] = outcome.check ? check_report_to_json(*outcome.check) : json(nullptr);
    if (outcome.empirical) entry["empirical"] = check_report_to_json(*outcome.empirical);
    mechanisms.push_back(std::move(entry));
  }
  return json{{"T", report.horizon},
              {"epsilon", report.epsilon},
              {"delta", report.delta},
              {"gamma", report.gamma},
              {"pair_distance_bound", report.pair_distance_bound},
              {"threshold", report.threshold},
              {"spectral_radius", report.spectral_radius},
              {"stable", report.stable},
              {"prior", json{{"dim", report.prior_dim},
                             {"rank", report.prior_rank},
                             {"strict", report.prior_strict},
                             {"trace", report.prior_trace},
                             {"lambda_max", report.prior_lambda_max}}},
              {"mechanisms", std::move(mechanisms)}};
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write file: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace dplds
