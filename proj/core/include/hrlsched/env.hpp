#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hrlsched/mimo_phy.hpp"
#include "hrlsched/traffic_queue.hpp"
#include "hrlsched/wsr_scheduler.hpp"

namespace hrlsched {

struct UserProfile {
  int deadline = 4;             // D_i, slots
  double lambda_kbit = 22.0;    // mean packet size
  double path_loss_db = 140.0;
};

struct EnvConfig {
  std::vector<UserProfile> users;
  std::size_t n_tx = 2;
  double arrival_prob = 0.3;
  double tau = 1.0;              // reward normalization, in slots
  double slot_seconds = 1e-3;    // converts bits/s into a per-slot budget
  double bandwidth_hz = 10e6;
  double tx_power_dbm = 12.0;
  double noise_dbm = -138.0;
  double alpha_factor = 0.01;    // RZF alpha = alpha_factor * sigma^2 / P_tot
  double channel_corr = 0.0;     // AR(1) coefficient, [0, 1)
  double csi_nmse = 0.0;
  std::uint64_t seed = 1;

  std::size_t n_users() const { return users.size(); }
  void validate() const;
  LinkBudget link() const;
  double rzf_alpha() const;
  std::vector<double> amplitudes() const;
  std::vector<int> deadlines() const;
  double q_scale_bits() const;           // max_i lambda_i in bits
  double offered_bits_per_slot() const;  // PA * sum_i lambda_i in bits
  std::size_t queue_vector_length() const;
  std::size_t feature_length() const;    // 2 sum(D_i) + 2 K N_T
};

struct State {
  Slot slot = 0;
  std::vector<UserQueue> queues;
  ChannelMatrix h;      // true channel, used for realized rates
  ChannelMatrix h_obs;  // estimate seen by the policy and the scheduler
};

/// Exact integer bookkeeping of every bit that entered the system.
struct BitLedger {
  Bits arrived = 0;
  Bits transmitted = 0;
  Bits delivered_original = 0;
  Bits dropped_remaining = 0;
  Bits dropped_transmitted = 0;
  std::int64_t packets_arrived = 0;
  std::int64_t packets_delivered = 0;
  std::int64_t packets_dropped = 0;
};

struct StepResult {
  double reward = 0.0;  // HLC-ET of the served slot, bits/slot
  double cost = 0.0;    // -reward
  SlotOutcome outcome;  // deliveries of this slot, drops at the start of the next
  ScheduleDecision decision;
  std::vector<double> realized_rates;  // on the true channel
  std::vector<Bits> budgets;
};

/// CN(0, amp_i^2) entries per row.
ChannelMatrix draw_channel(std::size_t n_users, std::size_t n_tx, std::span<const double> amplitudes,
                           Rng& rng);

/// Gauss-Markov step H' = rho H + sqrt(1 - rho^2) W.
ChannelMatrix evolve_channel(const ChannelMatrix& h, double rho, std::span<const double> amplitudes,
                             Rng& rng);

/// H + n_e with per-entry noise variance nmse * amp_i^2; exact copy if nmse == 0.
ChannelMatrix observe_csi(const ChannelMatrix& h, double nmse, std::span<const double> amplitudes,
                          Rng& rng);

/// Policy features: [Q / q_scale, Q-bar / q_scale, re/im of h_obs / amp_i].
std::vector<double> encode_state(const State& state, const EnvConfig& config);

/// Single-threaded environment replica. Event order per slot: the state is
/// observed after expiry and arrivals; step() schedules and serves, then
/// advances to the next slot (expire, arrive, evolve channel, observe CSI).
class Environment {
 public:
  explicit Environment(EnvConfig config);

  const State& reset(std::uint64_t seed);
  StepResult step(std::span<const double> weights);

  const State& state() const { return state_; }
  const EnvConfig& config() const { return config_; }
  const BitLedger& ledger() const { return ledger_; }
  const LinkBudget& link() const { return link_; }

  /// Sum of original sizes of packets still queued.
  Bits residual_original_bits() const;
  /// Bits already transmitted from packets still queued.
  Bits residual_transmitted_bits() const;

 private:
  void admit_arrivals();

  EnvConfig config_;
  LinkBudget link_;
  std::vector<double> amplitudes_;
  std::vector<SizeSampler> samplers_;
  Rng traffic_rng_;
  Rng channel_rng_;
  Rng csi_rng_;
  State state_;
  BitLedger ledger_;
};

}  // namespace hrlsched
