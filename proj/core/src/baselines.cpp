#include "hrlsched/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hrlsched {

std::vector<double> heuristic_reuse_probs(std::span<const double> gains, double nu) {
  if (gains.empty()) throw std::invalid_argument("heuristic_reuse_probs: no gains");
  if (!(nu > 0.0)) throw std::invalid_argument("heuristic_reuse_probs: nu must be positive");
  const double top = *std::max_element(gains.begin(), gains.end());
  std::vector<double> p(gains.size());
  double s = 0.0;
  for (std::size_t i = 0; i < gains.size(); ++i) {
    p[i] = std::exp(nu * (gains[i] - top));
    s += p[i];
  }
  for (auto& v : p) v /= s;
  return p;
}

namespace {

template <class ActionFn>
RunSummary run_fixed(Environment& env, std::uint64_t slots, const MetricsSink& sink, std::size_t row_every,
                     std::size_t ma_window, ActionFn&& action_for) {
  if (row_every == 0) throw std::invalid_argument("row_every must be positive");
  SlotTracker tracker(ma_window);
  std::uint64_t iteration = 0;
  std::uint64_t row_start = 0;
  while (tracker.slots() < slots) {
    const std::vector<double> w = action_for(env.state());
    tracker.record(env.step(w));
    const std::uint64_t done = tracker.slots();
    if (sink && (done - row_start == row_every || done == slots)) {
      MetricsRow row;
      row.iteration = ++iteration;
      row.slot = done;
      double s = 0.0;
      for (std::uint64_t i = row_start; i < done; ++i) s += tracker.rewards()[i];
      row.reward = s / static_cast<double>(done - row_start);
      row.ma_reward = tracker.moving_average();
      row.drop_prob = tracker.drop_probability();
      row.p = {1.0};
      sink(row);
      row_start = done;
    } else if (done - row_start == row_every) {
      row_start = done;
    }
  }
  return {tracker.rewards(), tracker.moving_average(), {1.0}};
}

RunSummary summarize(const Trainer& t) {
  return {t.tracker().rewards(), t.tracker().moving_average(), {t.policy().p().begin(), t.policy().p().end()}};
}

}  // namespace

RunSummary run_dk_greedy(Environment& env, std::uint64_t slots, const MetricsSink& sink, std::size_t row_every,
                         std::size_t ma_window) {
  const double q_scale = env.config().q_scale_bits();
  return run_fixed(env, slots, sink, row_every, ma_window,
                   [&](const State& s) { return action_to_weights(dk_mean(s.queues, q_scale)); });
}

RunSummary run_frozen_policy(Environment& env, const GaussianPolicy& policy, std::uint64_t slots,
                             const MetricsSink& sink, std::size_t row_every, std::size_t ma_window) {
  if (policy.shape().input != env.config().feature_length() || policy.shape().n_actions != env.config().n_users())
    throw std::invalid_argument("frozen policy does not match the environment dimensions");
  return run_fixed(env, slots, sink, row_every, ma_window, [&](const State& s) {
    return action_to_weights(policy.forward(encode_state(s, env.config())).mean);
  });
}

RunSummary run_single_policy(Environment& env, const GaussianPolicy& init, TrainerConfig cfg, std::uint64_t seed,
                             std::uint64_t slots, const MetricsSink& sink, GaussianPolicy* trained) {
  cfg.reuse_mode = ReuseMode::ssca;
  cfg.initial_p.reset();
  Trainer t(env, HybridPolicy(init, {}, false, cfg.sigma_dk), cfg, seed);
  t.run(slots, sink);
  if (trained) *trained = t.policy().fresh();
  return summarize(t);
}

RunSummary run_heuristic_reuse(Environment& env, const GaussianPolicy& init, std::vector<GaussianPolicy> old,
                               bool use_dk, TrainerConfig cfg, std::uint64_t seed, std::uint64_t slots,
                               const MetricsSink& sink) {
  cfg.reuse_mode = ReuseMode::heuristic;
  Trainer t(env, HybridPolicy(init, std::move(old), use_dk, cfg.sigma_dk), cfg, seed);
  t.run(slots, sink);
  return summarize(t);
}

RunSummary run_hybrid(Environment& env, const GaussianPolicy& init, std::vector<GaussianPolicy> old, bool use_dk,
                      TrainerConfig cfg, std::uint64_t seed, std::uint64_t slots, const MetricsSink& sink,
                      GaussianPolicy* trained) {
  Trainer t(env, HybridPolicy(init, std::move(old), use_dk, cfg.sigma_dk), cfg, seed);
  t.run(slots, sink);
  if (trained) *trained = t.policy().fresh();
  return summarize(t);
}

}  // namespace hrlsched
