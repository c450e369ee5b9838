#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hrlsched/env.hpp"
#include "hrlsched/policy.hpp"
#include "hrlsched/ssca_trainer.hpp"

namespace hrlsched {

/// Pr(pi_n) = exp(nu W_n) / sum_j exp(nu W_j), max-shifted.
std::vector<double> heuristic_reuse_probs(std::span<const double> gains, double nu);

struct RunSummary {
  std::vector<double> rewards;  // per slot
  double final_ma = 0.0;
  std::vector<double> final_p;
};

/// Q-weighted greedy: w = dk_mean(state) every slot, no sampling noise.
/// Emits the trainer's row schema every `row_every` slots with p = (1).
RunSummary run_dk_greedy(Environment& env, std::uint64_t slots, const MetricsSink& sink = {},
                         std::size_t row_every = 8, std::size_t ma_window = 500);

/// Frozen Gaussian policy acting with its mean action.
RunSummary run_frozen_policy(Environment& env, const GaussianPolicy& policy, std::uint64_t slots,
                             const MetricsSink& sink = {}, std::size_t row_every = 8,
                             std::size_t ma_window = 500);

/// Trainer with a single new-policy component (no old policies, no DK).
RunSummary run_single_policy(Environment& env, const GaussianPolicy& init, TrainerConfig cfg,
                             std::uint64_t seed, std::uint64_t slots, const MetricsSink& sink = {},
                             GaussianPolicy* trained = nullptr);

/// Same components as the hybrid trainer, but p follows the softmax of
/// running reuse gains while gamma_0 is still trained.
RunSummary run_heuristic_reuse(Environment& env, const GaussianPolicy& init, std::vector<GaussianPolicy> old,
                               bool use_dk, TrainerConfig cfg, std::uint64_t seed, std::uint64_t slots,
                               const MetricsSink& sink = {});

/// Full hybrid trainer (SSCA on p and gamma_0).
RunSummary run_hybrid(Environment& env, const GaussianPolicy& init, std::vector<GaussianPolicy> old, bool use_dk,
                      TrainerConfig cfg, std::uint64_t seed, std::uint64_t slots, const MetricsSink& sink = {},
                      GaussianPolicy* trained = nullptr);

}  // namespace hrlsched
