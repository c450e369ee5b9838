#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hrlsched/env.hpp"
#include "hrlsched/policy.hpp"

namespace hrlsched {

/// One stored interaction. `fixed_logs` caches the log densities of the
/// frozen components (old policies, DK) since they never change.
struct Experience {
  std::vector<double> features;
  std::vector<double> dk_mean;
  std::vector<double> action;
  std::vector<double> fixed_logs;
  std::size_t component = 0;
  double cost = 0.0;

  PolicyInput input() const { return {features, dk_mean}; }
};

/// Ring holding the latest 2L experiences, indexed oldest first.
class ExperienceBuffer {
 public:
  explicit ExperienceBuffer(std::size_t horizon);

  void push(Experience e);
  bool full() const { return items_.size() == 2 * horizon_; }
  std::size_t size() const { return items_.size(); }
  std::size_t horizon() const { return horizon_; }
  const Experience& operator[](std::size_t i) const { return items_[i]; }

 private:
  std::size_t horizon_;
  std::deque<Experience> items_;
};

enum class JBarNorm {
  mean,          // (1/2L) sum over the 2L stored costs
  inverse_horizon  // (1/L) sum over the 2L stored costs
};

double estimate_J_bar(const ExperienceBuffer& buffer, JBarNorm norm = JBarNorm::mean);

/// Truncated centered return sum_{r'=0}^{L-1} (C_{r+r'} - J-bar), r in [1, L]
/// counted from the oldest stored experience.
double estimate_Q(const ExperienceBuffer& buffer, std::size_t r, double j_bar);

/// (1/L) sum_{r=1}^{L} Q_r * grad log pi_theta(a_r | s_r) at the current theta.
std::vector<double> estimate_g_bar(const ExperienceBuffer& buffer, const HybridPolicy& policy, double j_bar);

struct Smoothed {
  double j = 0.0;
  std::vector<double> g;
};

Smoothed smooth(double j_prev, std::span<const double> g_prev, double j_bar, std::span<const double> g_bar,
                double chi);

struct StepSizes {
  double chi = 1.0;
  double eta = 1.0;
};

/// Throws std::invalid_argument unless 0.5 < kappa1 < kappa2 <= 1 and kappa1 < 1.
void validate_step_exponents(double kappa1, double kappa2);

/// chi_l = l^-kappa1, eta_l = l^-kappa2, l >= 1.
StepSizes step_sizes(std::uint64_t l, double kappa1 = 0.6, double kappa2 = 0.7);

/// Euclidean projection onto {x >= 0, sum x = 1} by the sorted-threshold rule.
std::vector<double> project_simplex(std::span<const double> x);

/// J + g^T (theta - theta_l) + varsigma ||theta - theta_l||^2.
double surrogate_value(std::span<const double> theta, std::span<const double> theta_l, double j,
                       std::span<const double> g, double varsigma);

/// Closed-form minimizer of the surrogate over Theta: the first `n_p`
/// coordinates are projected onto the simplex, the rest clamped to the box.
std::vector<double> solve_surrogate(std::span<const double> theta_l, std::size_t n_p, std::span<const double> g,
                                    double varsigma);

/// (1 - eta) theta_l + eta theta_c, with the p block re-projected.
std::vector<double> update_theta(std::span<const double> theta_l, std::span<const double> theta_c, double eta,
                                 std::size_t n_p);

enum class ReuseMode {
  ssca,       // p optimized jointly with gamma_0
  heuristic,  // p = softmax(nu * W) from running reuse gains
  frozen      // p held at its initial value
};

struct TrainerConfig {
  std::size_t horizon = 32;     // L
  std::size_t batch_size = 8;   // new experiences per iteration
  double varsigma = 1.0;
  double kappa1 = 0.6;
  double kappa2 = 0.7;
  double sigma_dk = 0.05;
  double nu = 5.0;              // softmax temperature for reuse gains
  std::size_t warmup_slots = 200;  // per candidate, for p^0
  double cost_scale = 1.0;      // learning cost = -cost_scale * reward / offered load
  double reuse_ema = 0.95;
  std::size_t ma_window = 500;
  JBarNorm j_bar_norm = JBarNorm::mean;
  ReuseMode reuse_mode = ReuseMode::ssca;
  std::optional<std::vector<double>> initial_p;  // overrides the softmax warm-up

  void validate() const;
};

struct MetricsRow {
  std::uint64_t iteration = 0;
  std::uint64_t slot = 0;
  double reward = 0.0;     // mean HLC-ET over the iteration's slots
  double ma_reward = 0.0;  // moving average over the last ma_window slots
  double drop_prob = 0.0;  // drops / (drops + deliveries) over the same window
  std::vector<double> p;
  double j_tilde = 0.0;
};

using MetricsSink = std::function<void(const MetricsRow&)>;

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rolling per-slot statistics shared by trainers and baseline runners.
class SlotTracker {
 public:
  explicit SlotTracker(std::size_t window) : window_(window) {}
  void record(const StepResult& r);
  double moving_average() const;
  double drop_probability() const;
  std::uint64_t slots() const { return rewards_.size(); }
  const std::vector<double>& rewards() const { return rewards_; }
  /// Moving average over the window ending at `slot` (1-based count).
  double moving_average_at(std::uint64_t slot) const;

 private:
  std::size_t window_;
  std::vector<double> rewards_;
  std::vector<std::int64_t> delivered_;
  std::vector<std::int64_t> dropped_;
};

/// Hybrid-policy trainer: stores experiences, forms J-bar / g-bar, smooths
/// them, and moves theta by the surrogate solution.
class Trainer {
 public:
  Trainer(Environment& env, HybridPolicy policy, TrainerConfig config, std::uint64_t seed);

  /// Runs until `total_slots` environment steps have been taken (including
  /// warm-up), emitting one row per iteration.
  void run(std::uint64_t total_slots, const MetricsSink& sink = {});

  const HybridPolicy& policy() const { return policy_; }
  const SlotTracker& tracker() const { return tracker_; }
  double j_tilde() const { return j_tilde_; }
  std::span<const double> reuse_gains() const { return gains_; }
  std::uint64_t iteration() const { return iteration_; }

 private:
  double learning_cost(double reward) const;
  PolicyInput observe(std::vector<double>& features, std::vector<double>& dk) const;
  void act(std::optional<std::size_t> forced_component);
  void warm_start_p();
  void update();

  Environment& env_;
  HybridPolicy policy_;
  TrainerConfig cfg_;
  Rng rng_;
  ExperienceBuffer buffer_;
  SlotTracker tracker_;
  std::vector<double> gains_;  // heuristic reuse gains W_n
  double j_tilde_ = 0.0;
  std::vector<double> g_tilde_;
  std::uint64_t iteration_ = 0;
  bool warmed_ = false;
};

}  // namespace hrlsched
