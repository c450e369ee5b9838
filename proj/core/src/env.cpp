#include "hrlsched/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hrlsched {

void EnvConfig::validate() const {
  if (users.empty()) throw std::invalid_argument("env: need at least one user");
  if (n_tx == 0) throw std::invalid_argument("env: n_tx must be positive");
  if (!(arrival_prob >= 0.0 && arrival_prob <= 1.0))
    throw std::invalid_argument("env: arrival_prob must lie in [0, 1]");
  if (!(tau > 0.0)) throw std::invalid_argument("env: tau must be positive");
  if (!(slot_seconds > 0.0)) throw std::invalid_argument("env: slot_seconds must be positive");
  if (!(channel_corr >= 0.0 && channel_corr < 1.0))
    throw std::invalid_argument("env: channel_corr must lie in [0, 1)");
  if (!(csi_nmse >= 0.0)) throw std::invalid_argument("env: csi_nmse must be >= 0");
  if (!(alpha_factor >= 0.0)) throw std::invalid_argument("env: alpha_factor must be >= 0");
  for (std::size_t i = 0; i < users.size(); ++i) {
    const auto& u = users[i];
    const std::string who = "env: user " + std::to_string(i);
    if (u.deadline < 1) throw std::invalid_argument(who + " deadline must be >= 1");
    if (!(u.lambda_kbit > 0.0)) throw std::invalid_argument(who + " lambda must be positive");
    if (!(u.path_loss_db > 0.0)) throw std::invalid_argument(who + " path loss must be positive");
  }
  link().validate(users.size());
}

LinkBudget EnvConfig::link() const {
  LinkBudget l;
  l.bandwidth_hz = bandwidth_hz;
  l.total_power_w = dbm_to_watt(tx_power_dbm);
  l.noise_variance_w.assign(users.size(), dbm_to_watt(noise_dbm));
  for (const auto& u : users) l.path_loss_db.push_back(u.path_loss_db);
  return l;
}

double EnvConfig::rzf_alpha() const { return alpha_factor * dbm_to_watt(noise_dbm) / dbm_to_watt(tx_power_dbm); }

std::vector<double> EnvConfig::amplitudes() const {
  std::vector<double> a;
  for (const auto& u : users) a.push_back(path_loss_amplitude(u.path_loss_db));
  return a;
}

std::vector<int> EnvConfig::deadlines() const {
  std::vector<int> d;
  for (const auto& u : users) d.push_back(u.deadline);
  return d;
}

double EnvConfig::q_scale_bits() const {
  double m = 0.0;
  for (const auto& u : users) m = std::max(m, u.lambda_kbit);
  return m * 1000.0;
}

double EnvConfig::offered_bits_per_slot() const {
  double s = 0.0;
  for (const auto& u : users) s += u.lambda_kbit * 1000.0;
  return arrival_prob * s;
}

std::size_t EnvConfig::queue_vector_length() const {
  std::size_t n = 0;
  for (const auto& u : users) n += static_cast<std::size_t>(u.deadline);
  return n;
}

std::size_t EnvConfig::feature_length() const { return 2 * queue_vector_length() + 2 * users.size() * n_tx; }

ChannelMatrix draw_channel(std::size_t n_users, std::size_t n_tx, std::span<const double> amplitudes,
                           Rng& rng) {
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
  ChannelMatrix h(n_users, n_tx);
  for (std::size_t i = 0; i < n_users; ++i)
    for (std::size_t k = 0; k < n_tx; ++k) {
      const double re = gauss(rng);
      const double im = gauss(rng);
      h(i, k) = amplitudes[i] * cplx(re, im);
    }
  return h;
}

ChannelMatrix evolve_channel(const ChannelMatrix& h, double rho, std::span<const double> amplitudes,
                             Rng& rng) {
  const ChannelMatrix w = draw_channel(h.rows(), h.cols(), amplitudes, rng);
  const double innov = std::sqrt(1.0 - rho * rho);
  ChannelMatrix out(h.rows(), h.cols());
  for (std::size_t i = 0; i < h.rows(); ++i)
    for (std::size_t k = 0; k < h.cols(); ++k) out(i, k) = rho * h(i, k) + innov * w(i, k);
  return out;
}

ChannelMatrix observe_csi(const ChannelMatrix& h, double nmse, std::span<const double> amplitudes,
                          Rng& rng) {
  if (nmse == 0.0) return h;
  const ChannelMatrix noise = draw_channel(h.rows(), h.cols(), amplitudes, rng);
  const double s = std::sqrt(nmse);
  ChannelMatrix out = h;
  for (std::size_t i = 0; i < h.rows(); ++i)
    for (std::size_t k = 0; k < h.cols(); ++k) out(i, k) += s * noise(i, k);
  return out;
}

std::vector<double> encode_state(const State& state, const EnvConfig& config) {
  const double q_scale = config.q_scale_bits();
  const QueueVectors qv = queue_state_vectors(state.queues, state.slot);
  std::vector<double> f;
  f.reserve(config.feature_length());
  for (Bits b : qv.remaining) f.push_back(static_cast<double>(b) / q_scale);
  for (Bits b : qv.original) f.push_back(static_cast<double>(b) / q_scale);
  const auto amp = config.amplitudes();
  for (std::size_t i = 0; i < state.h_obs.rows(); ++i)
    for (std::size_t k = 0; k < state.h_obs.cols(); ++k) {
      f.push_back(state.h_obs(i, k).real() / amp[i]);
      f.push_back(state.h_obs(i, k).imag() / amp[i]);
    }
  return f;
}

Environment::Environment(EnvConfig config) : config_(std::move(config)) {
  config_.validate();
  link_ = config_.link();
  amplitudes_ = config_.amplitudes();
  for (const auto& u : config_.users) samplers_.push_back(poisson_kbit(u.lambda_kbit));
  reset(config_.seed);
}

const State& Environment::reset(std::uint64_t seed) {
  traffic_rng_ = seeded_rng(seed, 1);
  channel_rng_ = seeded_rng(seed, 2);
  csi_rng_ = seeded_rng(seed, 3);
  samplers_.clear();
  for (const auto& u : config_.users) samplers_.push_back(poisson_kbit(u.lambda_kbit));
  ledger_ = {};
  state_ = {};
  state_.slot = 0;
  for (std::size_t i = 0; i < config_.users.size(); ++i)
    state_.queues.push_back({i, config_.users[i].deadline, {}});
  state_.h = draw_channel(config_.n_users(), config_.n_tx, amplitudes_, channel_rng_);
  state_.h_obs = observe_csi(state_.h, config_.csi_nmse, amplitudes_, csi_rng_);
  return state_;
}

void Environment::admit_arrivals() {
  for (std::size_t i = 0; i < state_.queues.size(); ++i) {
    if (arrive(state_.queues[i], state_.slot, traffic_rng_, config_.arrival_prob, samplers_[i])) {
      ledger_.arrived += state_.queues[i].packets.back().original_bits;
      ++ledger_.packets_arrived;
    }
  }
}

StepResult Environment::step(std::span<const double> weights) {
  if (weights.size() != config_.n_users()) throw std::invalid_argument("step: action length != K");
  StepResult r;
  GreedyOptions opts;
  opts.alpha = config_.rzf_alpha();
  r.decision = greedy_wsr(state_.h_obs, weights, link_, opts);
  if (r.decision.scheduled.empty()) {
    r.realized_rates.assign(config_.n_users(), 0.0);
  } else {
    r.realized_rates = rates(state_.h, r.decision.scheduled, r.decision.precoder, r.decision.powers, link_);
  }

  const double bits_per_rate = config_.slot_seconds * config_.tau;
  r.budgets.assign(config_.n_users(), 0);
  r.outcome.bits_served.assign(config_.n_users(), 0);
  for (std::size_t i : r.decision.scheduled) {
    const Bits budget = static_cast<Bits>(std::floor(r.realized_rates[i] * bits_per_rate));
    r.budgets[i] = budget;
    ServeResult served = serve_fcfs(state_.queues[i], budget);
    r.outcome.bits_served[i] = served.bits_transmitted;
    ledger_.transmitted += served.bits_transmitted;
    for (auto& d : served.delivered) {
      ledger_.delivered_original += d.packet.original_bits;
      ++ledger_.packets_delivered;
      r.outcome.delivered.push_back(d);
    }
  }
  r.reward = hlc_et_reward(r.outcome, config_.tau);
  r.cost = -r.reward;

  ++state_.slot;
  for (auto& q : state_.queues) {
    for (auto& d : expire(q, state_.slot)) {
      ledger_.dropped_remaining += d.packet.remaining_bits;
      ledger_.dropped_transmitted += d.packet.original_bits - d.packet.remaining_bits;
      ++ledger_.packets_dropped;
      r.outcome.dropped.push_back(d);
    }
  }
  admit_arrivals();
  state_.h = evolve_channel(state_.h, config_.channel_corr, amplitudes_, channel_rng_);
  state_.h_obs = observe_csi(state_.h, config_.csi_nmse, amplitudes_, csi_rng_);
  return r;
}

Bits Environment::residual_original_bits() const {
  Bits s = 0;
  for (const auto& q : state_.queues)
    for (const auto& p : q.packets) s += p.original_bits;
  return s;
}

Bits Environment::residual_transmitted_bits() const {
  Bits s = 0;
  for (const auto& q : state_.queues)
    for (const auto& p : q.packets) s += p.original_bits - p.remaining_bits;
  return s;
}

}  // namespace hrlsched
