// dplds: design and verify Gaussian noise mechanisms that make discrete-time
// linear systems Bayesian differentially private, plus the closed-loop
// tracking experiment and plot-data emission.
//
// Exit codes: 0 success, 2 parse/validation error, 3 infeasibility or rank
// error, 4 numeric failure. Failures print a machine-readable JSON object on
// stderr. Set DPLDS_LOG=debug for progress notes.

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dplds/dplds.hpp"
#include "dplds/json_io.hpp"

namespace {

using namespace dplds;
namespace fs = std::filesystem;

constexpr double kPi = 3.141592653589793238462643383279502884;

bool debug_logging() {
  const char* env = std::getenv("DPLDS_LOG");
  return env != nullptr && std::string(env) == "debug";
}

void log_debug(const std::string& message) {
  if (debug_logging()) std::cerr << "[dplds] " << message << "\n";
}

void emit(const json& j, const std::string& out_path) {
  if (out_path.empty())
    std::cout << j.dump(2) << "\n";
  else
    write_json_file(out_path, j);
}

void emit_csv(const std::string& csv, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << csv;
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw DomainError("cannot write file: " + out_path);
  out << csv;
}

// locale-independent number formatting for the CSV outputs
std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buffer[64];
  const auto result =
      std::to_chars(buffer, buffer + sizeof(buffer), v, std::chars_format::general, 12);
  return std::string(buffer, result.ptr);
}

struct BudgetFlags {
  double epsilon = 0, delta = 0, gamma = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--epsilon", epsilon, "Privacy parameter epsilon (> 0)")->required();
    cmd->add_option("--delta", delta, "Privacy parameter delta in (0, 1/2)")->required();
    cmd->add_option("--gamma", gamma, "Prior coverage probability gamma in [0, 1]")->required();
  }

  PrivacyBudget<double> budget() const { return PrivacyBudget<double>(epsilon, delta, gamma); }
};

// ---------------------------------------------------------------------------
// design

struct DesignArgs {
  std::string model_path, prior_path, out_path;
  std::string channel = "input", mechanism = "optimal";
  BudgetFlags budget;
  Index horizon = 0;
};

int run_design(const DesignArgs& args) {
  const GaussianPrior<double> prior =
      prior_from_json(load_json_file(args.prior_path), args.horizon);
  const PrivacyBudget<double> budget = args.budget.budget();

  std::optional<DesignResult<double>> result;
  if (args.channel == "output") {
    if (args.mechanism != "optimal")
      throw DomainError("design: the output channel only supports --mechanism optimal");
    if (args.model_path.empty())
      throw DomainError("design: --model is required for the output channel");
    const auto model = load_model(args.model_path);
    log_debug("lifting the model over horizon " + std::to_string(args.horizon));
    result = optimal_output_noise(prior, lift(model, args.horizon), budget);
  } else if (args.mechanism == "optimal") {
    result = optimal_input_noise(prior, budget);
  } else {
    result = iid_input_noise(prior, budget);
  }

  emit(design_result_to_json(*result), args.out_path);
  std::cerr << "designed " << result->formula << ": trace " << format_number(result->trace)
            << ", margin " << format_number(result->check.margin) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// check

struct CheckArgs {
  std::string model_path, prior_path, weight_path, noise_path, out_path;
  std::string channel = "output";
  BudgetFlags budget;
  Index horizon = 0;
};

int run_check(const CheckArgs& args) {
  const PrivacyBudget<double> budget = args.budget.budget();
  const auto noise = covariance_from_json(load_json_file(args.noise_path), "noise");
  if (args.prior_path.empty() == args.weight_path.empty())
    throw DomainError("check: give exactly one of --prior and --weight");

  CheckReport<double> report;
  if (!args.weight_path.empty()) {
    if (args.channel != "output")
      throw DomainError("check: --weight applies to the output channel only");
    if (args.model_path.empty()) throw DomainError("check: --model is required for --weight");
    const auto weight = covariance_from_json(load_json_file(args.weight_path), "weight");
    const MechanismSpec<double> mech(NoiseChannel::kOutput, noise);
    report = dp_check(weight, mech, lift(load_model(args.model_path), args.horizon), budget);
  } else {
    const auto prior = prior_from_json(load_json_file(args.prior_path), args.horizon);
    if (args.channel == "output") {
      if (args.model_path.empty()) throw DomainError("check: --model is required for the output channel");
      const MechanismSpec<double> mech(NoiseChannel::kOutput, noise);
      report = bdp_check(prior, mech, lift(load_model(args.model_path), args.horizon), budget);
    } else {
      const MechanismSpec<double> mech(NoiseChannel::kInput, noise);
      report = bdp_input_check(prior, mech, budget);
    }
  }

  emit(check_report_to_json(report), args.out_path);
  std::cerr << (report.satisfied ? "satisfied" : "NOT satisfied") << ", margin "
            << format_number(report.margin) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// experiment

struct ExperimentArgs {
  std::string config_path, out_dir;
  std::string plant_path, controller_path, prior_path;
  BudgetFlags budget;
  bool budget_given = false;
  Index horizon = -1;
  std::vector<std::string> mechanisms;
  std::uint64_t seed = 1;
  Index num_seeds = 20;
  Index samples = 0;
};

MechanismChoice parse_mechanism(const std::string& name) {
  if (name == "noisefree") return MechanismChoice::kNoiseFree;
  if (name == "iid") return MechanismChoice::kIid;
  if (name == "optimal") return MechanismChoice::kOptimal;
  throw DomainError("experiment: unknown mechanism \"" + name + "\"");
}

StateSpaceModel<double> model_from_entry(const json& entry, const fs::path& base) {
  if (entry.is_string()) {
    fs::path p = entry.get<std::string>();
    if (p.is_relative()) p = base / p;
    return load_model(p.string());
  }
  return model_from_json(entry);
}

int run_experiment_cmd(const ExperimentArgs& args) {
  json config_json = json::object();
  fs::path base = ".";
  if (!args.config_path.empty()) {
    config_json = load_json_file(args.config_path);
    base = fs::path(args.config_path).parent_path();
  }

  const auto pick_model = [&](const char* key, const std::string& flag) {
    if (!flag.empty()) return load_model(flag);
    if (!config_json.contains(key))
      throw DomainError(std::string("experiment: missing model \"") + key + "\"");
    return model_from_entry(config_json.at(key), base);
  };

  const auto plant = pick_model("plant", args.plant_path);
  const auto controller = pick_model("controller", args.controller_path);
  const auto filter = pick_model("reference_filter", args.prior_path);

  const auto number = [&](const char* key, double flag_value, bool flag_given) {
    if (flag_given) return flag_value;
    if (!config_json.contains(key))
      throw DomainError(std::string("experiment: missing \"") + key + "\"");
    return config_json.at(key).get<double>();
  };
  const PrivacyBudget<double> budget(number("epsilon", args.budget.epsilon, args.budget_given),
                                     number("delta", args.budget.delta, args.budget_given),
                                     number("gamma", args.budget.gamma, args.budget_given));

  Index horizon = args.horizon;
  if (horizon < 0) {
    if (!config_json.contains("horizon")) throw DomainError("experiment: missing \"horizon\"");
    horizon = config_json.at("horizon").get<Index>();
  }

  std::vector<std::string> mechanism_names = args.mechanisms;
  if (mechanism_names.empty() && config_json.contains("mechanisms"))
    mechanism_names = config_json.at("mechanisms").get<std::vector<std::string>>();
  if (mechanism_names.empty()) mechanism_names = {"noisefree", "iid", "optimal"};
  std::vector<MechanismChoice> mechanisms;
  for (const auto& name : mechanism_names) mechanisms.push_back(parse_mechanism(name));

  std::vector<std::uint64_t> seeds;
  if (config_json.contains("seeds"))
    seeds = config_json.at("seeds").get<std::vector<std::uint64_t>>();
  if (seeds.empty()) {
    const Index count = config_json.contains("num_seeds")
                            ? config_json.at("num_seeds").get<Index>()
                            : args.num_seeds;
    const std::uint64_t base_seed =
        config_json.contains("seed") ? config_json.at("seed").get<std::uint64_t>() : args.seed;
    for (Index i = 0; i < count; ++i) seeds.push_back(base_seed + static_cast<std::uint64_t>(i));
  }

  Index samples = args.samples;
  if (samples == 0 && config_json.contains("empirical_samples"))
    samples = config_json.at("empirical_samples").get<Index>();

  log_debug("running " + std::to_string(seeds.size()) + " seeds over horizon " +
            std::to_string(horizon));
  const ExperimentConfig<double> config{plant,   controller, filter, budget,
                                        horizon, mechanisms, seeds,  samples};
  const auto report = run_experiment(config);

  if (args.out_dir.empty()) throw DomainError("experiment: --out directory is required");
  fs::create_directories(args.out_dir);
  write_json_file((fs::path(args.out_dir) / "report.json").string(),
                  experiment_report_to_json(report));

  // one CSV per seed: t, reference, plant output per mechanism
  for (const auto& run : report.trajectories) {
    std::string csv = "t";
    const Index m = run.reference.dim();
    const Index q = run.outputs.empty() ? 0 : run.outputs.front().dim();
    for (Index i = 0; i < m; ++i) csv += ",r_" + std::to_string(i);
    for (std::size_t j = 0; j < report.mechanisms.size(); ++j)
      for (Index i = 0; i < q; ++i)
        csv += ",yp_" + report.mechanisms[j].name + "_" + std::to_string(i);
    csv += "\n";
    for (Index t = 0; t <= report.horizon; ++t) {
      csv += std::to_string(t);
      for (Index i = 0; i < m; ++i) csv += "," + format_number(run.reference.sample(t)(i));
      for (const auto& output : run.outputs)
        for (Index i = 0; i < q; ++i) csv += "," + format_number(output.sample(t)(i));
      csv += "\n";
    }
    const auto path = fs::path(args.out_dir) / ("trajectory_seed_" + std::to_string(run.seed) + ".csv");
    emit_csv(csv, path.string());
  }

  std::cerr << "experiment report written to " << args.out_dir << "\n";
  for (const auto& outcome : report.mechanisms)
    std::cerr << "  " << outcome.name << ": mean MSE " << format_number(outcome.mse_mean)
              << ", noise trace " << format_number(outcome.noise_trace)
              << ", error variance trace " << format_number(outcome.error_variance_trace) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// c-curve

struct CurveArgs {
  double gamma = 0.5;
  Index input_dim = 1;
  Index t_min = 0, t_max = 200, t_step = 1;
  std::string out_path;
};

int run_c_curve(const CurveArgs& args) {
  if (!(args.gamma > 0.0 && args.gamma < 1.0))
    throw DomainError("c-curve: gamma must lie strictly between 0 and 1");
  if (args.t_min < 0 || args.t_max < args.t_min || args.t_step < 1)
    throw DomainError("c-curve: invalid horizon range");
  std::string csv = "T,c\n";
  for (Index T = args.t_min; T <= args.t_max; T += args.t_step)
    csv += std::to_string(T) + "," +
           format_number(pair_distance_bound(args.gamma, T, args.input_dim)) + "\n";
  emit_csv(csv, args.out_path);
  return 0;
}

// ---------------------------------------------------------------------------
// bode

struct BodeArgs {
  std::string model_path, out_path;
  double freq_min = 1e-4 * kPi;
  double freq_max = kPi;
  Index points = 200;
};

int run_bode(const BodeArgs& args) {
  if (!(args.freq_min > 0.0 && args.freq_min < args.freq_max && args.freq_max <= kPi))
    throw DomainError("bode: frequencies must satisfy 0 < min < max <= pi");
  if (args.points < 1) throw DomainError("bode: needs at least one point");
  const auto model = load_model(args.model_path);

  // log-spaced grid over [min, max)
  VectorX<double> freqs(args.points);
  const double ratio = std::pow(args.freq_max / args.freq_min, 1.0 / double(args.points));
  double f = args.freq_min;
  for (Index i = 0; i < args.points; ++i, f *= ratio) freqs(i) = f;
  const auto gains = bode_gain(model, freqs);

  std::string csv = "lambda,gain\n";
  for (Index i = 0; i < args.points; ++i)
    csv += format_number(freqs(i)) + "," + format_number(gains(i)) + "\n";
  emit_csv(csv, args.out_path);
  return 0;
}

json error_json(int code, const std::string& kind, const std::string& message) {
  return json{{"error", json{{"code", code}, {"kind", kind}, {"message", message}}}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian differential privacy for discrete-time linear systems"};
  app.require_subcommand(1);

  DesignArgs design_args;
  auto* design = app.add_subcommand("design", "Synthesize a noise mechanism");
  design->add_option("--model", design_args.model_path, "State-space model JSON (output channel)");
  design->add_option("--prior", design_args.prior_path, "Prior specification JSON")->required();
  design->add_option("--horizon", design_args.horizon, "Horizon T >= 0")->required();
  design->add_option("--channel", design_args.channel, "Noise channel")
      ->check(CLI::IsMember({"input", "output"}));
  design->add_option("--mechanism", design_args.mechanism, "Design formula")
      ->check(CLI::IsMember({"optimal", "iid"}));
  design->add_option("--out", design_args.out_path, "Output JSON path (stdout if omitted)");
  design_args.budget.attach(design);

  CheckArgs check_args;
  auto* check = app.add_subcommand("check", "Verify a noise covariance");
  check->add_option("--model", check_args.model_path, "State-space model JSON");
  check->add_option("--prior", check_args.prior_path, "Prior specification JSON");
  check->add_option("--weight", check_args.weight_path, "Adjacency weight JSON");
  check->add_option("--noise", check_args.noise_path, "Noise covariance JSON")->required();
  check->add_option("--horizon", check_args.horizon, "Horizon T >= 0")->required();
  check->add_option("--channel", check_args.channel, "Noise channel")
      ->check(CLI::IsMember({"input", "output"}));
  check->add_option("--out", check_args.out_path, "Output JSON path (stdout if omitted)");
  check_args.budget.attach(check);

  ExperimentArgs experiment_args;
  auto* experiment = app.add_subcommand("experiment", "Closed-loop tracking comparison");
  experiment->add_option("--config", experiment_args.config_path, "Experiment config JSON");
  experiment->add_option("--model", experiment_args.plant_path, "Plant model JSON (overrides config)");
  experiment->add_option("--controller", experiment_args.controller_path,
                         "Controller model JSON (overrides config)");
  experiment->add_option("--prior", experiment_args.prior_path,
                         "Reference filter model JSON (overrides config)");
  auto* eps = experiment->add_option("--epsilon", experiment_args.budget.epsilon, "Privacy epsilon");
  auto* del = experiment->add_option("--delta", experiment_args.budget.delta, "Privacy delta");
  auto* gam = experiment->add_option("--gamma", experiment_args.budget.gamma, "Coverage gamma");
  eps->needs(del)->needs(gam);
  del->needs(eps)->needs(gam);
  gam->needs(eps)->needs(del);
  experiment->add_option("--horizon", experiment_args.horizon, "Horizon T >= 0");
  experiment->add_option("--mechanism", experiment_args.mechanisms,
                         "Mechanisms to compare (repeatable)")
      ->check(CLI::IsMember({"noisefree", "iid", "optimal"}));
  experiment->add_option("--seed", experiment_args.seed, "Base seed");
  experiment->add_option("--seeds", experiment_args.num_seeds, "Number of seeds");
  experiment->add_option("--samples", experiment_args.samples,
                         "Monte-Carlo samples for the empirical coverage estimate");
  experiment->add_option("--out", experiment_args.out_dir, "Output directory")->required();

  CurveArgs curve_args;
  auto* curve = app.add_subcommand("c-curve", "Tabulate the distance bound against the horizon");
  curve->add_option("--gamma", curve_args.gamma, "Coverage gamma in (0, 1)")->required();
  curve->add_option("--input-dim", curve_args.input_dim, "Input dimension m");
  curve->add_option("--t-min", curve_args.t_min, "First horizon");
  curve->add_option("--t-max", curve_args.t_max, "Last horizon");
  curve->add_option("--t-step", curve_args.t_step, "Horizon step");
  curve->add_option("--out", curve_args.out_path, "Output CSV path (stdout if omitted)");

  BodeArgs bode_args;
  auto* bode = app.add_subcommand("bode", "Largest-singular-value gain over frequency");
  bode->add_option("--model", bode_args.model_path, "State-space model JSON")->required();
  bode->add_option("--freq-min", bode_args.freq_min, "Lowest frequency (rad)");
  bode->add_option("--freq-max", bode_args.freq_max, "Highest frequency (rad, <= pi)");
  bode->add_option("--points", bode_args.points, "Number of grid points");
  bode->add_option("--out", bode_args.out_path, "Output CSV path (stdout if omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    experiment_args.budget_given = eps->count() > 0;
    if (design->parsed()) return run_design(design_args);
    if (check->parsed()) return run_check(check_args);
    if (experiment->parsed()) return run_experiment_cmd(experiment_args);
    if (curve->parsed()) return run_c_curve(curve_args);
    if (bode->parsed()) return run_bode(bode_args);
  } catch (const RankError& e) {
    std::cerr << error_json(3, "rank", e.what()).dump() << "\n";
    return 3;
  } catch (const InfeasibleError& e) {
    std::cerr << error_json(3, "infeasible", e.what()).dump() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << error_json(4, "numeric", e.what()).dump() << "\n";
    return 4;
  } catch (const DimensionError& e) {
    std::cerr << error_json(2, "validation", e.what()).dump() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << error_json(2, "validation", e.what()).dump() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << error_json(2, "parse", e.what()).dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << error_json(4, "numeric", e.what()).dump() << "\n";
    return 4;
  }
  return 0;
}
