#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hrlsched/traffic_queue.hpp"

namespace hrlsched {

inline constexpr double kLogStdMin = -6.907755278982137;  // log(1e-3)
inline constexpr double kLogStdMax = 2.302585092994046;   // log(10)
inline constexpr double kParamBox = 10.0;                 // |gamma_j| <= 10
inline constexpr double kWeightFloor = 1e-9;
inline constexpr double kLogProbFloor = -745.0;
// Cap on pi_n / pi_theta. Below p_n = 1e-6 the ratio is unbounded and would
// overflow once the mixture density hits the floor.
inline constexpr double kMaxDensityRatio = 1e6;

/// Fully connected input -> hidden1 -> hidden2 -> 2K network (tanh hidden
/// layers). The first K outputs are the action mean, the last K the raw
/// log standard deviation.
struct MlpShape {
  std::size_t input = 0;
  std::size_t hidden1 = 64;
  std::size_t hidden2 = 64;
  std::size_t n_actions = 0;

  std::size_t param_count() const;
  friend bool operator==(const MlpShape&, const MlpShape&) = default;
};

struct GaussianOutput {
  std::vector<double> mean;
  std::vector<double> log_std;  // after clamping
};

struct InitOptions {
  double mean_bias = 0.5;
  double log_std_bias = -0.7;
  double weight_scale = 1.0;  // multiplies the Glorot-uniform bound
};

/// Diagonal Gaussian policy whose mean and log-std come from an MLP.
class GaussianPolicy {
 public:
  GaussianPolicy() = default;
  explicit GaussianPolicy(MlpShape shape);

  static GaussianPolicy random_init(MlpShape shape, Rng& rng, const InitOptions& opts = {});

  const MlpShape& shape() const { return shape_; }
  std::size_t param_count() const { return params_.size(); }
  std::span<const double> params() const { return params_; }
  std::span<double> params() { return params_; }

  GaussianOutput forward(std::span<const double> features) const;

  double log_density(std::span<const double> features, std::span<const double> action) const;

  /// Adds scale * d/dgamma log N(action; mu, Sigma) into `grad` and returns
  /// the log density.
  double accumulate_log_density_grad(std::span<const double> features, std::span<const double> action,
                                     double scale, std::span<double> grad) const;

  /// Vector-Jacobian product: adds d/dgamma [ <d_mean, mu> + <d_log_std, log_std> ]
  /// into `grad`.
  void backprop(std::span<const double> features, std::span<const double> d_mean,
                std::span<const double> d_log_std, std::span<double> grad) const;

 private:
  struct Trace {
    std::vector<double> h1, h2, out;
  };
  Trace run(std::span<const double> features) const;
  void backprop_trace(std::span<const double> features, const Trace& t, std::span<const double> d_out,
                      std::span<double> grad) const;

  MlpShape shape_;
  std::vector<double> params_;
};

double diag_gaussian_log_density(std::span<const double> mean, std::span<const double> log_std,
                                 std::span<const double> action);

/// Q-weighted domain-knowledge mean: total queued bits of each user / q_scale.
std::vector<double> dk_mean(std::span<const UserQueue> queues, double q_scale_bits);

/// w_i = max(a_i, 1e-9).
std::vector<double> action_to_weights(std::span<const double> action);

/// What a policy sees for one state.
struct PolicyInput {
  std::span<const double> features;
  std::span<const double> dk_mean;
};

struct ActionSample {
  std::vector<double> action;
  std::size_t component = 0;
};

/// Mixture pi_theta = sum_n p_n pi_n over [new, old_1..old_N, DK]; only p and
/// the new policy's parameters are trainable.
class HybridPolicy {
 public:
  HybridPolicy(GaussianPolicy fresh, std::vector<GaussianPolicy> old, bool use_dk, double sigma_dk);

  std::size_t n_components() const { return p_.size(); }
  std::size_t n_old() const { return old_.size(); }
  bool use_dk() const { return use_dk_; }
  std::size_t dk_index() const { return p_.size() - 1; }  // valid when use_dk()
  double sigma_dk() const { return sigma_dk_; }
  std::size_t theta_size() const { return p_.size() + fresh_.param_count(); }
  std::size_t n_actions() const { return fresh_.shape().n_actions; }

  std::span<const double> p() const { return p_; }
  void set_p(std::span<const double> p);  // no simplex check; callers project
  const GaussianPolicy& fresh() const { return fresh_; }
  GaussianPolicy& fresh() { return fresh_; }
  const std::vector<GaussianPolicy>& old() const { return old_; }

  /// theta = [p; gamma_0] as one flat vector.
  std::vector<double> theta() const;
  void set_theta(std::span<const double> theta);

  /// log N for components 1..N+1 (old and DK); these do not depend on theta.
  std::vector<double> fixed_log_densities(const PolicyInput& in, std::span<const double> action) const;

  ActionSample sample(const PolicyInput& in, Rng& rng) const;
  /// Draws from a single component.
  std::vector<double> sample_component(std::size_t m, const PolicyInput& in, Rng& rng) const;
  /// Deterministic mean action of a component.
  std::vector<double> component_mean(std::size_t m, const PolicyInput& in) const;

  double log_prob(const PolicyInput& in, std::span<const double> action) const;
  /// Gradient of log pi_theta(a|s) over [p; gamma_0].
  std::vector<double> grad_log_prob(const PolicyInput& in, std::span<const double> action) const;

  /// Same as above with precomputed fixed_log_densities(); adds scale * grad
  /// into `grad` and returns log pi_theta.
  double accumulate_grad_log_prob(const PolicyInput& in, std::span<const double> action,
                                  std::span<const double> fixed_logs, double scale,
                                  std::span<double> grad) const;

 private:
  double mixture_log(std::span<const double> comp_logs, std::vector<double>* responsibilities) const;

  std::vector<double> p_;
  GaussianPolicy fresh_;
  std::vector<GaussianPolicy> old_;
  bool use_dk_ = true;
  double sigma_dk_ = 0.05;
};

/// Binary policy format, little-endian:
///   magic "HRLSPOL1", u32 version, u32 layer count (3),
///   u64 input, u64 hidden1, u64 hidden2, u64 output (2K), u64 K,
///   u64 feature length, u64 parameter count, then f64 parameters.
inline constexpr std::uint32_t kPolicyFormatVersion = 1;

std::vector<std::uint8_t> save_policy(const GaussianPolicy& policy);
GaussianPolicy load_policy(std::span<const std::uint8_t> bytes);

void save_policy_file(const GaussianPolicy& policy, const std::string& path);
GaussianPolicy load_policy_file(const std::string& path);

}  // namespace hrlsched
