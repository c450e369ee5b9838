#include "hrlsched/wsr_scheduler.hpp"

#include <algorithm>
#include <stdexcept>

namespace hrlsched {

ScheduleDecision evaluate_set(const ChannelMatrix& h, std::span<const std::size_t> set,
                              const LinkBudget& link, double alpha) {
  ScheduleDecision d;
  d.scheduled.assign(set.begin(), set.end());
  if (set.empty()) {
    d.rates.assign(h.rows(), 0.0);
    return d;
  }
  d.precoder = rzf_precoder(h.select_rows(set), alpha);
  d.powers.assign(set.size(), equal_power(link.total_power_w, set.size()));
  d.rates = rates(h, set, d.precoder, d.powers, link);
  return d;
}

double wsr_value(const ScheduleDecision& decision, std::span<const double> weights) {
  double s = 0.0;
  for (auto i : decision.scheduled) s += weights[i] * decision.rates[i];
  return s;
}

ScheduleDecision greedy_wsr(const ChannelMatrix& h, std::span<const double> weights,
                            const LinkBudget& link, const GreedyOptions& opts) {
  const std::size_t n_users = h.rows();
  const std::size_t n_tx = h.cols();
  if (n_users == 0) throw std::invalid_argument("greedy_wsr: no users");
  if (weights.size() != n_users) throw std::invalid_argument("greedy_wsr: weight length != K");
  for (double w : weights)
    if (!(w >= 0.0)) throw std::invalid_argument("greedy_wsr: weights must be nonnegative");

  const bool all_zero = std::all_of(weights.begin(), weights.end(), [](double w) { return w == 0.0; });
  if (all_zero) {
    // Fallback: single user with the best unweighted rate.
    ScheduleDecision best;
    double best_rate = -1.0;
    for (std::size_t u = 0; u < n_users; ++u) {
      const std::size_t set[1] = {u};
      ScheduleDecision d = evaluate_set(h, set, link, opts.alpha);
      if (d.rates[u] > best_rate) {
        best_rate = d.rates[u];
        best = std::move(d);
      }
    }
    best.wsr = 0.0;
    best.round_wsr = {0.0};
    return best;
  }

  ScheduleDecision incumbent = evaluate_set(h, {}, link, opts.alpha);
  std::vector<bool> taken(n_users, false);
  std::vector<std::size_t> trial;
  while (incumbent.scheduled.size() < n_tx) {
    ScheduleDecision best_candidate;
    double best_value = 0.0;
    bool found = false;
    for (std::size_t u = 0; u < n_users; ++u) {
      if (taken[u]) continue;
      trial = incumbent.scheduled;
      trial.push_back(u);
      ScheduleDecision d;
      try {
        d = evaluate_set(h, trial, link, opts.alpha);
      } catch (const std::domain_error&) {
        continue;  // rank-deficient candidate set with alpha = 0
      }
      const double value = wsr_value(d, weights);
      if (!found || value > best_value) {
        found = true;
        best_value = value;
        best_candidate = std::move(d);
      }
    }
    const double threshold = incumbent.wsr + opts.rel_improvement * std::abs(incumbent.wsr);
    if (!found || !(best_value > threshold)) break;
    taken[best_candidate.scheduled.back()] = true;
    best_candidate.wsr = best_value;
    best_candidate.round_wsr = incumbent.round_wsr;
    best_candidate.round_wsr.push_back(best_value);
    incumbent = std::move(best_candidate);
  }
  return incumbent;
}

}  // namespace hrlsched
