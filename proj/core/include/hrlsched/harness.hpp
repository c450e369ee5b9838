#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "hrlsched/baselines.hpp"
#include "hrlsched/env.hpp"
#include "hrlsched/policy.hpp"
#include "hrlsched/ssca_trainer.hpp"

namespace hrlsched {

/// Perturbation used to build "similar" environments for old policies.
struct EnvVariant {
  double lambda_scale = 1.0;
  double path_loss_offset_db = 0.0;
};

struct ScenarioConfig {
  std::string name = "custom";
  EnvConfig env;
  TrainerConfig trainer;
  InitOptions init;
  std::vector<std::string> old_policies;
  bool ablate_dk = false;
  bool ablate_old = false;
  std::vector<std::uint64_t> seeds{1};
  std::uint64_t slots = 20000;
  EnvVariant variant;

  void validate() const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::string> preset_names();
/// Built-in scenarios: "desk", "config1", "config2", "config1_k10",
/// "config2_k10", "light". Throws ConfigError for unknown names.
ScenarioConfig preset(std::string_view name);

/// Parses the key/value config format. Relative old-policy paths are
/// resolved against `base_dir`.
ScenarioConfig parse_config(std::string_view text, const std::string& base_dir = ".");
ScenarioConfig load_config(const std::string& path);
/// A preset name or a config file path.
ScenarioConfig resolve_config(const std::string& name_or_path);

EnvConfig apply_variant(EnvConfig env, const EnvVariant& variant);

/// Deterministic initial parameters of the new policy for a run seed.
GaussianPolicy initial_policy(const ScenarioConfig& cfg, std::uint64_t seed);

/// Component labels in p order, e.g. {"new", "old1", "dk"}.
std::vector<std::string> component_labels(std::size_t n_old, bool use_dk);

/// CSV writer for MetricsRow. Header: iteration,slot,reward,ma_reward,
/// drop_prob,p_<label>...,j_tilde[,wall_ms]
class MetricsCsv {
 public:
  MetricsCsv(std::ostream& out, std::vector<std::string> labels, bool wall_clock = false);
  void write(const MetricsRow& row, double wall_ms = 0.0);

 private:
  std::ostream& out_;
  std::size_t n_p_;
  bool wall_clock_;
};

std::string format_double(double v);

struct RunOutputs {
  std::string csv_path;     // empty: no CSV
  std::string policy_path;  // empty: do not save
  bool wall_clock = false;
};

/// HRL training run (honours ablation flags). Returns the run summary.
RunSummary cmd_train(const ScenarioConfig& cfg, std::uint64_t seed, const RunOutputs& out);

/// Trains a single-policy agent under the configured variant and saves it.
RunSummary cmd_make_old_policy(const ScenarioConfig& cfg, std::uint64_t seed, const RunOutputs& out);

/// `what` is "dk", "single", "heuristic", "hybrid" or a policy file path.
RunSummary cmd_eval(const ScenarioConfig& cfg, std::uint64_t seed, const std::string& what,
                    const RunOutputs& out);

}  // namespace hrlsched
