#include "hrlsched/ssca_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "hrlsched/baselines.hpp"

namespace hrlsched {

ExperienceBuffer::ExperienceBuffer(std::size_t horizon) : horizon_(horizon) {
  if (horizon == 0) throw std::invalid_argument("ExperienceBuffer: horizon must be positive");
}

void ExperienceBuffer::push(Experience e) {
  if (items_.size() == 2 * horizon_) items_.pop_front();
  items_.push_back(std::move(e));
}

double estimate_J_bar(const ExperienceBuffer& buffer, JBarNorm norm) {
  if (!buffer.full()) throw std::logic_error("estimate_J_bar: buffer not full");
  double s = 0.0;
  for (std::size_t i = 0; i < buffer.size(); ++i) s += buffer[i].cost;
  const double denom = norm == JBarNorm::mean ? static_cast<double>(buffer.size())
                                              : static_cast<double>(buffer.horizon());
  return s / denom;
}

double estimate_Q(const ExperienceBuffer& buffer, std::size_t r, double j_bar) {
  const std::size_t horizon = buffer.horizon();
  if (!buffer.full()) throw std::logic_error("estimate_Q: buffer not full");
  if (r < 1 || r > horizon) throw std::out_of_range("estimate_Q: r must lie in [1, L]");
  double q = 0.0;
  for (std::size_t k = 0; k < horizon; ++k) q += buffer[r - 1 + k].cost - j_bar;
  return q;
}

std::vector<double> estimate_g_bar(const ExperienceBuffer& buffer, const HybridPolicy& policy, double j_bar) {
  if (!buffer.full()) throw std::logic_error("estimate_g_bar: buffer not full");
  const std::size_t horizon = buffer.horizon();
  std::vector<double> g(policy.theta_size(), 0.0);

  // Sliding window sum of centered costs: Q_r = Q_{r-1} - c_{r-2} + c_{r+L-2}.
  double q = estimate_Q(buffer, 1, j_bar);
  const double inv_l = 1.0 / static_cast<double>(horizon);
  for (std::size_t r = 1; r <= horizon; ++r) {
    if (r > 1) q += (buffer[r - 2 + horizon].cost - j_bar) - (buffer[r - 2].cost - j_bar);
    const Experience& e = buffer[r - 1];
    if (q != 0.0) policy.accumulate_grad_log_prob(e.input(), e.action, e.fixed_logs, q * inv_l, g);
  }
  return g;
}

Smoothed smooth(double j_prev, std::span<const double> g_prev, double j_bar, std::span<const double> g_bar,
                double chi) {
  if (g_prev.size() != g_bar.size()) throw std::invalid_argument("smooth: gradient size mismatch");
  Smoothed s;
  s.j = chi * j_bar + (1.0 - chi) * j_prev;
  s.g.resize(g_bar.size());
  for (std::size_t i = 0; i < g_bar.size(); ++i) s.g[i] = chi * g_bar[i] + (1.0 - chi) * g_prev[i];
  return s;
}

void validate_step_exponents(double kappa1, double kappa2) {
  if (!(kappa1 > 0.5 && kappa1 < 1.0)) throw std::invalid_argument("kappa1 must lie in (0.5, 1)");
  if (!(kappa2 > 0.5 && kappa2 <= 1.0)) throw std::invalid_argument("kappa2 must lie in (0.5, 1]");
  if (!(kappa1 < kappa2)) throw std::invalid_argument("kappa1 must be smaller than kappa2");
}

StepSizes step_sizes(std::uint64_t l, double kappa1, double kappa2) {
  if (l == 0) throw std::invalid_argument("step_sizes: iteration index starts at 1");
  const double x = static_cast<double>(l);
  return {std::pow(x, -kappa1), std::pow(x, -kappa2)};
}

std::vector<double> project_simplex(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("project_simplex: empty vector");
  std::vector<double> u(x.begin(), x.end());
  for (double v : u)
    if (!std::isfinite(v)) throw std::invalid_argument("project_simplex: non-finite input");
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0;
  double threshold = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cum += u[j];
    const double t = (cum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) threshold = t;
  }
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::max(x[i] - threshold, 0.0);
  return out;
}

double surrogate_value(std::span<const double> theta, std::span<const double> theta_l, double j,
                       std::span<const double> g, double varsigma) {
  double lin = 0.0;
  double quad = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double d = theta[i] - theta_l[i];
    lin += g[i] * d;
    quad += d * d;
  }
  return j + lin + varsigma * quad;
}

std::vector<double> solve_surrogate(std::span<const double> theta_l, std::size_t n_p, std::span<const double> g,
                                    double varsigma) {
  if (!(varsigma > 0.0)) throw std::invalid_argument("solve_surrogate: varsigma must be positive");
  if (g.size() != theta_l.size() || n_p > theta_l.size())
    throw std::invalid_argument("solve_surrogate: dimension mismatch");
  const double step = 1.0 / (2.0 * varsigma);
  std::vector<double> out(theta_l.size());
  std::vector<double> p(n_p);
  for (std::size_t i = 0; i < n_p; ++i) p[i] = theta_l[i] - step * g[i];
  if (n_p > 0) {
    const auto proj = project_simplex(p);
    std::copy(proj.begin(), proj.end(), out.begin());
  }
  for (std::size_t i = n_p; i < theta_l.size(); ++i)
    out[i] = std::clamp(theta_l[i] - step * g[i], -kParamBox, kParamBox);
  return out;
}

std::vector<double> update_theta(std::span<const double> theta_l, std::span<const double> theta_c, double eta,
                                 std::size_t n_p) {
  if (theta_l.size() != theta_c.size()) throw std::invalid_argument("update_theta: dimension mismatch");
  std::vector<double> out(theta_l.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - eta) * theta_l[i] + eta * theta_c[i];
  if (n_p > 0) {
    auto p = project_simplex(std::span<const double>(out.data(), n_p));
    const double s = std::accumulate(p.begin(), p.end(), 0.0);
    for (std::size_t i = 0; i < n_p; ++i) out[i] = std::clamp(p[i] / s, 0.0, 1.0);
  }
  return out;
}

void TrainerConfig::validate() const {
  if (horizon == 0) throw std::invalid_argument("trainer: horizon L must be positive");
  if (batch_size == 0) throw std::invalid_argument("trainer: batch_size must be positive");
  if (!(varsigma > 0.0)) throw std::invalid_argument("trainer: varsigma must be positive");
  validate_step_exponents(kappa1, kappa2);
  if (!(sigma_dk > 0.0)) throw std::invalid_argument("trainer: sigma_dk must be positive");
  if (!(nu > 0.0)) throw std::invalid_argument("trainer: nu must be positive");
  if (!(cost_scale > 0.0)) throw std::invalid_argument("trainer: cost_scale must be positive");
  if (!(reuse_ema >= 0.0 && reuse_ema < 1.0)) throw std::invalid_argument("trainer: reuse_ema must lie in [0, 1)");
  if (ma_window == 0) throw std::invalid_argument("trainer: ma_window must be positive");
}

void SlotTracker::record(const StepResult& r) {
  rewards_.push_back(r.reward);
  delivered_.push_back(static_cast<std::int64_t>(r.outcome.delivered.size()));
  dropped_.push_back(static_cast<std::int64_t>(r.outcome.dropped.size()));
}

double SlotTracker::moving_average_at(std::uint64_t slot) const {
  slot = std::min<std::uint64_t>(slot, rewards_.size());
  if (slot == 0) return 0.0;
  const std::uint64_t begin = slot > window_ ? slot - window_ : 0;
  double s = 0.0;
  for (std::uint64_t i = begin; i < slot; ++i) s += rewards_[i];
  return s / static_cast<double>(slot - begin);
}

double SlotTracker::moving_average() const { return moving_average_at(rewards_.size()); }

double SlotTracker::drop_probability() const {
  const std::size_t n = rewards_.size();
  const std::size_t begin = n > window_ ? n - window_ : 0;
  std::int64_t del = 0;
  std::int64_t drop = 0;
  for (std::size_t i = begin; i < n; ++i) {
    del += delivered_[i];
    drop += dropped_[i];
  }
  return del + drop == 0 ? 0.0 : static_cast<double>(drop) / static_cast<double>(del + drop);
}

Trainer::Trainer(Environment& env, HybridPolicy policy, TrainerConfig config, std::uint64_t seed)
    : env_(env),
      policy_(std::move(policy)),
      cfg_(std::move(config)),
      rng_(seeded_rng(seed, 0x7ca1)),
      buffer_(cfg_.horizon),
      tracker_(cfg_.ma_window) {
  cfg_.validate();
  if (policy_.fresh().shape().input != env_.config().feature_length())
    throw std::invalid_argument("trainer: policy input size does not match the environment features");
  if (policy_.n_actions() != env_.config().n_users())
    throw std::invalid_argument("trainer: policy action size does not match K");
  if (cfg_.initial_p) {
    if (cfg_.initial_p->size() != policy_.n_components())
      throw std::invalid_argument("trainer: initial_p has the wrong dimension");
    policy_.set_p(project_simplex(*cfg_.initial_p));
  }
  gains_.assign(policy_.n_components(), 0.0);
  g_tilde_.assign(policy_.theta_size(), 0.0);
}

double Trainer::learning_cost(double reward) const {
  const double offered = env_.config().offered_bits_per_slot();
  const double norm = offered > 0.0 ? offered : 1.0;
  return -cfg_.cost_scale * reward / norm;
}

void Trainer::act(std::optional<std::size_t> forced_component) {
  const State& s = env_.state();
  Experience e;
  e.features = encode_state(s, env_.config());
  e.dk_mean = dk_mean(s.queues, env_.config().q_scale_bits());
  const PolicyInput in = e.input();
  if (forced_component) {
    e.component = *forced_component;
    e.action = policy_.sample_component(e.component, in, rng_);
  } else {
    ActionSample a = policy_.sample(in, rng_);
    e.action = std::move(a.action);
    e.component = a.component;
  }
  e.fixed_logs = policy_.fixed_log_densities(in, e.action);
  const std::vector<double> w = action_to_weights(e.action);
  const StepResult r = env_.step(w);
  tracker_.record(r);
  e.cost = learning_cost(r.reward);
  const double ema = cfg_.reuse_ema;
  gains_[e.component] = ema * gains_[e.component] + (1.0 - ema) * (-e.cost / cfg_.cost_scale);
  buffer_.push(std::move(e));
}

void Trainer::warm_start_p() {
  warmed_ = true;
  const std::size_t n = policy_.n_components();
  if (cfg_.initial_p || n == 1 || cfg_.warmup_slots == 0) return;
  std::vector<double> avg(n, 0.0);
  for (std::size_t m = 0; m < n; ++m) {
    double s = 0.0;
    for (std::size_t t = 0; t < cfg_.warmup_slots; ++t) {
      act(m);
      s += -buffer_[buffer_.size() - 1].cost / cfg_.cost_scale;
    }
    avg[m] = s / static_cast<double>(cfg_.warmup_slots);
  }
  gains_ = avg;
  policy_.set_p(heuristic_reuse_probs(avg, cfg_.nu));
}

void Trainer::update() {
  ++iteration_;
  const double j_bar = estimate_J_bar(buffer_, cfg_.j_bar_norm);
  const std::vector<double> g_bar = estimate_g_bar(buffer_, policy_, j_bar);
  const StepSizes steps = step_sizes(iteration_, cfg_.kappa1, cfg_.kappa2);
  const Smoothed sm = smooth(j_tilde_, g_tilde_, j_bar, g_bar, steps.chi);
  j_tilde_ = sm.j;
  g_tilde_ = sm.g;
  if (!std::isfinite(j_tilde_)) throw TrainingDiverged("J-tilde became non-finite at iteration " + std::to_string(iteration_));

  const std::size_t n_p = policy_.n_components();
  const std::vector<double> theta = policy_.theta();
  const std::vector<double> theta_c = solve_surrogate(theta, n_p, g_tilde_, cfg_.varsigma);
  std::vector<double> next = update_theta(theta, theta_c, steps.eta, n_p);
  for (double v : next)
    if (!std::isfinite(v)) throw TrainingDiverged("theta became non-finite at iteration " + std::to_string(iteration_));

  switch (cfg_.reuse_mode) {
    case ReuseMode::ssca:
      break;
    case ReuseMode::heuristic: {
      const auto p = heuristic_reuse_probs(gains_, cfg_.nu);
      std::copy(p.begin(), p.end(), next.begin());
      break;
    }
    case ReuseMode::frozen:
      std::copy(policy_.p().begin(), policy_.p().end(), next.begin());
      break;
  }
  policy_.set_theta(next);
}

void Trainer::run(std::uint64_t total_slots, const MetricsSink& sink) {
  if (!warmed_) warm_start_p();
  while (tracker_.slots() < total_slots) {
    const std::uint64_t start = tracker_.slots();
    const std::uint64_t n = std::min<std::uint64_t>(cfg_.batch_size, total_slots - start);
    for (std::uint64_t t = 0; t < n; ++t) act(std::nullopt);
    if (!buffer_.full()) continue;
    update();
    if (sink) {
      MetricsRow row;
      row.iteration = iteration_;
      row.slot = tracker_.slots();
      double s = 0.0;
      for (std::uint64_t i = start; i < tracker_.slots(); ++i) s += tracker_.rewards()[i];
      row.reward = s / static_cast<double>(tracker_.slots() - start);
      row.ma_reward = tracker_.moving_average();
      row.drop_prob = tracker_.drop_probability();
      row.p.assign(policy_.p().begin(), policy_.p().end());
      row.j_tilde = j_tilde_;
      sink(row);
    }
  }
}

}  // namespace hrlsched
