#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dplds/core.hpp"
#include "dplds/covariance.hpp"
#include "dplds/errors.hpp"
#include "dplds/noise_design.hpp"
#include "dplds/privacy.hpp"
#include "dplds/random.hpp"
#include "dplds/special_functions.hpp"
#include "dplds/state_space.hpp"

namespace dplds {

enum class MechanismChoice { kNoiseFree, kIid, kOptimal };

inline std::string to_string(MechanismChoice choice) {
  switch (choice) {
    case MechanismChoice::kNoiseFree: return "noisefree";
    case MechanismChoice::kIid: return "iid";
    case MechanismChoice::kOptimal: return "optimal";
  }
  return "unknown";
}

/// Closed-loop tracking experiment: a reference drawn from the filter prior
/// drives the loop, input noise drawn per mechanism is added to it, and the
/// realized tracking error is compared across mechanisms.
template <typename Scalar>
struct ExperimentConfig {
  StateSpaceModel<Scalar> plant;
  StateSpaceModel<Scalar> controller;
  StateSpaceModel<Scalar> reference_filter;
  PrivacyBudget<Scalar> budget;
  Index horizon;
  std::vector<MechanismChoice> mechanisms;
  std::vector<std::uint64_t> seeds;
  Index empirical_samples = 0;  // 0 disables the Monte-Carlo coverage estimate
};

template <typename Scalar>
struct MechanismOutcome {
  std::string name;
  Scalar noise_trace = Scalar(0);
  Scalar error_variance_trace = Scalar(0);  // exact Tr(Theta Sigma_v Theta^T)
  std::vector<Scalar> mse_per_seed;
  Scalar mse_mean = Scalar(0);
  std::optional<CheckReport<Scalar>> check;      // absent for the noise-free run
  std::optional<CheckReport<Scalar>> empirical;  // present when samples requested
};

template <typename Scalar>
struct SeedTrajectories {
  std::uint64_t seed;
  Trajectory<Scalar> reference;
  std::vector<Trajectory<Scalar>> outputs;  // plant output, parallel to mechanisms
};

template <typename Scalar>
struct ExperimentReport {
  Index horizon = 0;
  Scalar epsilon = Scalar(0), delta = Scalar(0), gamma = Scalar(0);
  Scalar pair_distance_bound = Scalar(0);  // c
  Scalar threshold = Scalar(0);            // R
  Scalar spectral_radius = Scalar(0);
  bool stable = false;
  Index prior_dim = 0, prior_rank = 0;
  bool prior_strict = false;
  Scalar prior_trace = Scalar(0), prior_lambda_max = Scalar(0);
  std::vector<MechanismOutcome<Scalar>> mechanisms;
  std::vector<SeedTrajectories<Scalar>> trajectories;
};

/// Runs the experiment. Per seed, the reference comes from substream
/// (seed, 0) and mechanism j's noise from substream (seed, 1 + j); fixed
/// seeds give bit-identical reports. The mean squared tracking error is
/// |E_T|^2 / (T + 1) with e = r - y_p, so the same reference realization is
/// shared by all mechanisms of a seed.
template <typename Scalar>
ExperimentReport<Scalar> run_experiment(const ExperimentConfig<Scalar>& config) {
  if (config.mechanisms.empty())
    throw DomainError("run_experiment: at least one mechanism must be selected");
  if (config.seeds.empty())
    throw DomainError("run_experiment: at least one seed must be given");

  const Index T = config.horizon;
  const ClosedLoopModel<Scalar> loop = close_loop(config.plant, config.controller);
  const StateSpaceModel<Scalar> tracking = loop.output_model();
  if (tracking.input_dim() != config.reference_filter.output_dim())
    throw DimensionError("run_experiment: reference dimension does not match the loop input");

  const GaussianPrior<Scalar> prior = filter_prior(config.reference_filter, T);
  const LiftedOperator<Scalar> noise_to_error = lift(loop.error_noise_model(), T);
  const Index m = prior.input_dim();

  ExperimentReport<Scalar> report;
  report.horizon = T;
  report.epsilon = config.budget.epsilon;
  report.delta = config.budget.delta;
  report.gamma = config.budget.gamma;
  report.pair_distance_bound =
      detail::pair_distance_bound_for_dof(config.budget.gamma, prior.dof());
  report.threshold = r_threshold(config.budget);
  report.spectral_radius = loop.spectral_radius();
  report.stable = report.spectral_radius < Scalar(1);
  report.prior_dim = prior.dim();
  report.prior_rank = prior.dof();
  report.prior_strict = prior.strict();
  report.prior_trace = prior.covariance().trace();
  report.prior_lambda_max = prior.covariance().lambda_max();

  // mechanisms
  std::vector<std::optional<MechanismSpec<Scalar>>> specs;
  for (const MechanismChoice choice : config.mechanisms) {
    MechanismOutcome<Scalar> outcome;
    outcome.name = to_string(choice);
    switch (choice) {
      case MechanismChoice::kNoiseFree:
        specs.emplace_back(std::nullopt);
        break;
      case MechanismChoice::kIid: {
        auto design = iid_input_noise(prior, config.budget);
        outcome.noise_trace = design.trace;
        outcome.check = design.check;
        specs.emplace_back(std::move(design.mechanism));
        break;
      }
      case MechanismChoice::kOptimal: {
        auto design = optimal_input_noise(prior, config.budget);
        outcome.noise_trace = design.trace;
        outcome.check = design.check;
        specs.emplace_back(std::move(design.mechanism));
        break;
      }
    }
    const auto& spec = specs.back();
    if (spec)
      outcome.error_variance_trace =
          (noise_to_error.matrix() * spec->covariance().factor()).squaredNorm();
    if (spec && config.empirical_samples > 0) {
      const LiftedOperator<Scalar> reference_to_output = lift(tracking, T);
      outcome.empirical = empirical_bdp(prior, *spec, reference_to_output, config.budget,
                                        config.empirical_samples, /*seed=*/config.seeds.front());
    }
    report.mechanisms.push_back(std::move(outcome));
  }

  // closed-loop runs
  for (const std::uint64_t seed : config.seeds) {
    std::mt19937_64 reference_gen = substream(seed, 0);
    const VectorX<Scalar> r_stacked = prior.sample(reference_gen);
    const Trajectory<Scalar> reference = Trajectory<Scalar>::FromStacked(r_stacked, m);
    SeedTrajectories<Scalar> run{seed, reference, {}};

    for (std::size_t j = 0; j < specs.size(); ++j) {
      std::mt19937_64 noise_gen = substream(seed, 1 + static_cast<std::uint64_t>(j));
      VectorX<Scalar> v_stacked = VectorX<Scalar>::Zero(prior.dim());
      if (specs[j]) v_stacked = specs[j]->sample(noise_gen);
      const auto driven = Trajectory<Scalar>::FromStacked(r_stacked + v_stacked, m);
      const Trajectory<Scalar> output = simulate(tracking, driven);
      const Scalar mse =
          (reference.samples() - output.samples()).squaredNorm() / Scalar(T + 1);
      report.mechanisms[j].mse_per_seed.push_back(mse);
      run.outputs.push_back(output);
    }
    report.trajectories.push_back(std::move(run));
  }

  for (auto& outcome : report.mechanisms) {
    Scalar sum = Scalar(0);
    for (const Scalar mse : outcome.mse_per_seed) sum += mse;
    outcome.mse_mean = sum / Scalar(outcome.mse_per_seed.size());
  }
  return report;
}

}  // namespace dplds
