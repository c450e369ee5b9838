#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hrlsched/mimo_phy.hpp"

namespace hrlsched {

/// Result of one scheduling decision for a slot.
struct ScheduleDecision {
  std::vector<std::size_t> scheduled;  // in commit order
  Precoder precoder;                   // columns aligned with `scheduled`
  std::vector<double> powers;          // aligned with `scheduled`
  std::vector<double> rates;           // per user (K entries), bits/s
  double wsr = 0.0;
  std::vector<double> round_wsr;       // incumbent WSR after each committed round
};

struct GreedyOptions {
  double alpha = 0.0;
  double rel_improvement = 1e-12;
};

/// Round-based greedy user selection: each round adds the candidate that
/// maximizes sum_{i in B} w_i R_i (RZF + equal power re-evaluated per
/// candidate set) and stops when nothing strictly improves or |B| = N_T.
/// Ties go to the lowest user index.
ScheduleDecision greedy_wsr(const ChannelMatrix& h, std::span<const double> weights,
                            const LinkBudget& link, const GreedyOptions& opts);

/// Recomputes sum_{i in B} w_i R_i from a decision.
double wsr_value(const ScheduleDecision& decision, std::span<const double> weights);

/// RZF + equal power evaluation of a fixed scheduled set. Rates are zero
/// outside the set.
ScheduleDecision evaluate_set(const ChannelMatrix& h, std::span<const std::size_t> set,
                              const LinkBudget& link, double alpha);

}  // namespace hrlsched
