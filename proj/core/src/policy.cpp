#include "hrlsched/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <stdexcept>

namespace hrlsched {

std::size_t MlpShape::param_count() const {
  const std::size_t out = 2 * n_actions;
  return hidden1 * input + hidden1 + hidden2 * hidden1 + hidden2 + out * hidden2 + out;
}

GaussianPolicy::GaussianPolicy(MlpShape shape) : shape_(shape), params_(shape.param_count(), 0.0) {
  if (shape.input == 0 || shape.hidden1 == 0 || shape.hidden2 == 0 || shape.n_actions == 0)
    throw std::invalid_argument("GaussianPolicy: all layer sizes must be positive");
}

GaussianPolicy GaussianPolicy::random_init(MlpShape shape, Rng& rng, const InitOptions& opts) {
  GaussianPolicy pol(shape);
  auto fill = [&](std::size_t offset, std::size_t fan_out, std::size_t fan_in) {
    const double bound = opts.weight_scale * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t j = 0; j < fan_out * fan_in; ++j) pol.params_[offset + j] = u(rng);
  };
  const auto& s = shape;
  std::size_t off = 0;
  fill(off, s.hidden1, s.input);
  off += s.hidden1 * s.input + s.hidden1;
  fill(off, s.hidden2, s.hidden1);
  off += s.hidden2 * s.hidden1 + s.hidden2;
  fill(off, 2 * s.n_actions, s.hidden2);
  off += 2 * s.n_actions * s.hidden2;
  for (std::size_t k = 0; k < s.n_actions; ++k) {
    pol.params_[off + k] = opts.mean_bias;
    pol.params_[off + s.n_actions + k] = opts.log_std_bias;
  }
  return pol;
}

GaussianPolicy::Trace GaussianPolicy::run(std::span<const double> x) const {
  const auto& s = shape_;
  if (x.size() != s.input)
    throw std::invalid_argument("GaussianPolicy: feature length " + std::to_string(x.size()) +
                                " != network input " + std::to_string(s.input));
  const double* w = params_.data();
  Trace t;
  t.h1.resize(s.hidden1);
  for (std::size_t j = 0; j < s.hidden1; ++j) {
    double acc = w[s.hidden1 * s.input + j];
    const double* row = w + j * s.input;
    for (std::size_t i = 0; i < s.input; ++i) acc += row[i] * x[i];
    t.h1[j] = std::tanh(acc);
  }
  w += s.hidden1 * s.input + s.hidden1;
  t.h2.resize(s.hidden2);
  for (std::size_t j = 0; j < s.hidden2; ++j) {
    double acc = w[s.hidden2 * s.hidden1 + j];
    const double* row = w + j * s.hidden1;
    for (std::size_t i = 0; i < s.hidden1; ++i) acc += row[i] * t.h1[i];
    t.h2[j] = std::tanh(acc);
  }
  w += s.hidden2 * s.hidden1 + s.hidden2;
  const std::size_t n_out = 2 * s.n_actions;
  t.out.resize(n_out);
  for (std::size_t j = 0; j < n_out; ++j) {
    double acc = w[n_out * s.hidden2 + j];
    const double* row = w + j * s.hidden2;
    for (std::size_t i = 0; i < s.hidden2; ++i) acc += row[i] * t.h2[i];
    t.out[j] = acc;
  }
  return t;
}

void GaussianPolicy::backprop_trace(std::span<const double> x, const Trace& t, std::span<const double> d_out,
                                    std::span<double> grad) const {
  const auto& s = shape_;
  if (grad.size() < params_.size()) throw std::invalid_argument("backprop: gradient buffer too small");
  const std::size_t n_out = 2 * s.n_actions;
  const std::size_t off1 = 0;
  const std::size_t off2 = s.hidden1 * s.input + s.hidden1;
  const std::size_t off3 = off2 + s.hidden2 * s.hidden1 + s.hidden2;
  const double* w3 = params_.data() + off3;
  const double* w2 = params_.data() + off2;

  std::vector<double> d_h2(s.hidden2, 0.0);
  for (std::size_t j = 0; j < n_out; ++j) {
    const double g = d_out[j];
    if (g == 0.0) continue;
    double* gw = grad.data() + off3 + j * s.hidden2;
    for (std::size_t i = 0; i < s.hidden2; ++i) {
      gw[i] += g * t.h2[i];
      d_h2[i] += g * w3[j * s.hidden2 + i];
    }
    grad[off3 + n_out * s.hidden2 + j] += g;
  }
  std::vector<double> d_h1(s.hidden1, 0.0);
  for (std::size_t j = 0; j < s.hidden2; ++j) {
    const double g = d_h2[j] * (1.0 - t.h2[j] * t.h2[j]);
    if (g == 0.0) continue;
    double* gw = grad.data() + off2 + j * s.hidden1;
    for (std::size_t i = 0; i < s.hidden1; ++i) {
      gw[i] += g * t.h1[i];
      d_h1[i] += g * w2[j * s.hidden1 + i];
    }
    grad[off2 + s.hidden2 * s.hidden1 + j] += g;
  }
  for (std::size_t j = 0; j < s.hidden1; ++j) {
    const double g = d_h1[j] * (1.0 - t.h1[j] * t.h1[j]);
    if (g == 0.0) continue;
    double* gw = grad.data() + off1 + j * s.input;
    for (std::size_t i = 0; i < s.input; ++i) gw[i] += g * x[i];
    grad[off1 + s.hidden1 * s.input + j] += g;
  }
}

GaussianOutput GaussianPolicy::forward(std::span<const double> features) const {
  const Trace t = run(features);
  const std::size_t k = shape_.n_actions;
  GaussianOutput o;
  o.mean.assign(t.out.begin(), t.out.begin() + static_cast<std::ptrdiff_t>(k));
  o.log_std.resize(k);
  for (std::size_t i = 0; i < k; ++i) o.log_std[i] = std::clamp(t.out[k + i], kLogStdMin, kLogStdMax);
  return o;
}

double diag_gaussian_log_density(std::span<const double> mean, std::span<const double> log_std,
                                 std::span<const double> action) {
  if (mean.size() != action.size() || log_std.size() != action.size())
    throw std::invalid_argument("gaussian log density: dimension mismatch");
  constexpr double half_log_2pi = 0.91893853320467274178;
  double acc = 0.0;
  for (std::size_t i = 0; i < action.size(); ++i) {
    const double z = (action[i] - mean[i]) * std::exp(-log_std[i]);
    acc += -0.5 * z * z - log_std[i] - half_log_2pi;
  }
  return acc;
}

double GaussianPolicy::log_density(std::span<const double> features, std::span<const double> action) const {
  const GaussianOutput o = forward(features);
  return diag_gaussian_log_density(o.mean, o.log_std, action);
}

double GaussianPolicy::accumulate_log_density_grad(std::span<const double> features,
                                                   std::span<const double> action, double scale,
                                                   std::span<double> grad) const {
  const Trace t = run(features);
  const std::size_t k = shape_.n_actions;
  if (action.size() != k) throw std::invalid_argument("log density grad: action length != K");
  std::vector<double> d_out(2 * k, 0.0);
  constexpr double half_log_2pi = 0.91893853320467274178;
  double logp = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double raw = t.out[k + i];
    const double ls = std::clamp(raw, kLogStdMin, kLogStdMax);
    const double inv_var = std::exp(-2.0 * ls);
    const double diff = action[i] - t.out[i];
    logp += -0.5 * diff * diff * inv_var - ls - half_log_2pi;
    d_out[i] = scale * diff * inv_var;
    // Hard clamp: no gradient flows through a saturated log-std.
    if (raw > kLogStdMin && raw < kLogStdMax) d_out[k + i] = scale * (diff * diff * inv_var - 1.0);
  }
  if (scale != 0.0) backprop_trace(features, t, d_out, grad);
  return logp;
}

void GaussianPolicy::backprop(std::span<const double> features, std::span<const double> d_mean,
                              std::span<const double> d_log_std, std::span<double> grad) const {
  const Trace t = run(features);
  const std::size_t k = shape_.n_actions;
  std::vector<double> d_out(2 * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    d_out[i] = d_mean[i];
    const double raw = t.out[k + i];
    if (raw > kLogStdMin && raw < kLogStdMax) d_out[k + i] = d_log_std[i];
  }
  backprop_trace(features, t, d_out, grad);
}

std::vector<double> dk_mean(std::span<const UserQueue> queues, double q_scale_bits) {
  std::vector<double> m;
  m.reserve(queues.size());
  for (const auto& q : queues) m.push_back(static_cast<double>(q.backlog_bits()) / q_scale_bits);
  return m;
}

std::vector<double> action_to_weights(std::span<const double> action) {
  std::vector<double> w(action.begin(), action.end());
  for (auto& x : w) x = std::max(x, kWeightFloor);
  return w;
}

HybridPolicy::HybridPolicy(GaussianPolicy fresh, std::vector<GaussianPolicy> old, bool use_dk, double sigma_dk)
    : fresh_(std::move(fresh)), old_(std::move(old)), use_dk_(use_dk), sigma_dk_(sigma_dk) {
  if (!(sigma_dk >= 0.0)) throw std::invalid_argument("HybridPolicy: sigma_dk must be >= 0");
  for (const auto& o : old_)
    if (!(o.shape() == fresh_.shape()))
      throw std::invalid_argument("HybridPolicy: old policy shape differs from the new policy");
  const std::size_t n = 1 + old_.size() + (use_dk_ ? 1 : 0);
  p_.assign(n, 1.0 / static_cast<double>(n));
}

void HybridPolicy::set_p(std::span<const double> p) {
  if (p.size() != p_.size()) throw std::invalid_argument("set_p: dimension mismatch");
  p_.assign(p.begin(), p.end());
}

std::vector<double> HybridPolicy::theta() const {
  std::vector<double> t(p_);
  t.insert(t.end(), fresh_.params().begin(), fresh_.params().end());
  return t;
}

void HybridPolicy::set_theta(std::span<const double> theta) {
  if (theta.size() != theta_size()) throw std::invalid_argument("set_theta: dimension mismatch");
  std::copy(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(p_.size()), p_.begin());
  std::copy(theta.begin() + static_cast<std::ptrdiff_t>(p_.size()), theta.end(), fresh_.params().begin());
}

std::vector<double> HybridPolicy::fixed_log_densities(const PolicyInput& in,
                                                      std::span<const double> action) const {
  std::vector<double> logs;
  logs.reserve(p_.size() - 1);
  for (const auto& o : old_) logs.push_back(o.log_density(in.features, action));
  if (use_dk_) {
    if (!(sigma_dk_ > 0.0)) throw std::domain_error("log density of a zero-variance DK component");
    const std::vector<double> ls(in.dk_mean.size(), std::log(sigma_dk_));
    logs.push_back(diag_gaussian_log_density(in.dk_mean, ls, action));
  }
  return logs;
}

std::vector<double> HybridPolicy::component_mean(std::size_t m, const PolicyInput& in) const {
  if (m == 0) return fresh_.forward(in.features).mean;
  if (m <= old_.size()) return old_[m - 1].forward(in.features).mean;
  return {in.dk_mean.begin(), in.dk_mean.end()};
}

std::vector<double> HybridPolicy::sample_component(std::size_t m, const PolicyInput& in, Rng& rng) const {
  if (m >= p_.size()) throw std::out_of_range("sample_component: bad component index");
  std::vector<double> mean;
  std::vector<double> log_std;
  if (m == 0 || m <= old_.size()) {
    GaussianOutput o = m == 0 ? fresh_.forward(in.features) : old_[m - 1].forward(in.features);
    mean = std::move(o.mean);
    log_std = std::move(o.log_std);
  } else {
    mean.assign(in.dk_mean.begin(), in.dk_mean.end());
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> a(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double sd = log_std.empty() ? sigma_dk_ : std::exp(log_std[i]);
    a[i] = mean[i] + sd * gauss(rng);
  }
  return a;
}

ActionSample HybridPolicy::sample(const PolicyInput& in, Rng& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double draw = u(rng);
  std::size_t m = 0;
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t n = 0; n < p_.size(); ++n)
    if (p_[n] > 0.0) last_positive = n;
  m = last_positive;
  for (std::size_t n = 0; n < p_.size(); ++n) {
    if (p_[n] <= 0.0) continue;
    cum += p_[n];
    if (draw < cum) {
      m = n;
      break;
    }
  }
  return {sample_component(m, in, rng), m};
}

double HybridPolicy::mixture_log(std::span<const double> comp_logs, std::vector<double>* resp) const {
  // log sum_n p_n exp(l_n), shifted by the largest l_n among nonzero-weight
  // components. Tolerates off-simplex p (finite differences) as long as the
  // weighted sum stays positive.
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < p_.size(); ++n)
    if (p_[n] != 0.0) shift = std::max(shift, comp_logs[n]);
  double s = 0.0;
  for (std::size_t n = 0; n < p_.size(); ++n)
    if (p_[n] != 0.0) s += p_[n] * std::exp(comp_logs[n] - shift);
  double logp = (s > 0.0 && std::isfinite(shift)) ? shift + std::log(s) : kLogProbFloor;
  logp = std::max(logp, kLogProbFloor);
  if (resp) {
    resp->resize(p_.size());
    const double cap = std::log(kMaxDensityRatio);
    for (std::size_t n = 0; n < p_.size(); ++n) (*resp)[n] = std::exp(std::min(comp_logs[n] - logp, cap));
  }
  return logp;
}

double HybridPolicy::accumulate_grad_log_prob(const PolicyInput& in, std::span<const double> action,
                                              std::span<const double> fixed_logs, double scale,
                                              std::span<double> grad) const {
  if (fixed_logs.size() != p_.size() - 1) throw std::invalid_argument("grad_log_prob: fixed log count");
  if (grad.size() != theta_size()) throw std::invalid_argument("grad_log_prob: gradient size");
  std::vector<double> comp_logs(p_.size());
  comp_logs[0] = fresh_.log_density(in.features, action);
  std::copy(fixed_logs.begin(), fixed_logs.end(), comp_logs.begin() + 1);
  std::vector<double> resp;
  const double logp = mixture_log(comp_logs, &resp);
  // d/dp_n log pi = pi_n / pi_theta
  for (std::size_t n = 0; n < p_.size(); ++n) grad[n] += scale * resp[n];
  // d/dgamma_0 log pi = (p_0 pi_0 / pi_theta) d/dgamma_0 log pi_0
  const double w0 = scale * p_[0] * resp[0];
  if (w0 != 0.0)
    fresh_.accumulate_log_density_grad(in.features, action, w0, grad.subspan(p_.size()));
  return logp;
}

double HybridPolicy::log_prob(const PolicyInput& in, std::span<const double> action) const {
  std::vector<double> comp_logs{fresh_.log_density(in.features, action)};
  const auto fixed = fixed_log_densities(in, action);
  comp_logs.insert(comp_logs.end(), fixed.begin(), fixed.end());
  return mixture_log(comp_logs, nullptr);
}

std::vector<double> HybridPolicy::grad_log_prob(const PolicyInput& in, std::span<const double> action) const {
  std::vector<double> g(theta_size(), 0.0);
  accumulate_grad_log_prob(in, action, fixed_log_densities(in, action), 1.0, g);
  return g;
}

namespace {

constexpr char kMagic[8] = {'H', 'R', 'L', 'S', 'P', 'O', 'L', '1'};

template <class T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(buf), std::end(buf));
  out.insert(out.end(), std::begin(buf), std::end(buf));
}

template <class T>
T get_le(std::span<const std::uint8_t> in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw std::runtime_error("load_policy: truncated policy data");
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(buf), std::end(buf));
  pos += sizeof(T);
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

}  // namespace

std::vector<std::uint8_t> save_policy(const GaussianPolicy& policy) {
  const auto& s = policy.shape();
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, kPolicyFormatVersion);
  put_le<std::uint32_t>(out, 3);
  put_le<std::uint64_t>(out, s.input);
  put_le<std::uint64_t>(out, s.hidden1);
  put_le<std::uint64_t>(out, s.hidden2);
  put_le<std::uint64_t>(out, 2 * s.n_actions);
  put_le<std::uint64_t>(out, s.n_actions);
  put_le<std::uint64_t>(out, s.input);
  put_le<std::uint64_t>(out, policy.param_count());
  for (double v : policy.params()) put_le<double>(out, v);
  return out;
}

GaussianPolicy load_policy(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("load_policy: bad magic");
  std::size_t pos = sizeof(kMagic);
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kPolicyFormatVersion)
    throw std::runtime_error("load_policy: unsupported format version " + std::to_string(version));
  if (get_le<std::uint32_t>(bytes, pos) != 3) throw std::runtime_error("load_policy: expected 3 layers");
  MlpShape s;
  s.input = get_le<std::uint64_t>(bytes, pos);
  s.hidden1 = get_le<std::uint64_t>(bytes, pos);
  s.hidden2 = get_le<std::uint64_t>(bytes, pos);
  const auto n_out = get_le<std::uint64_t>(bytes, pos);
  s.n_actions = get_le<std::uint64_t>(bytes, pos);
  const auto feature_len = get_le<std::uint64_t>(bytes, pos);
  const auto n_params = get_le<std::uint64_t>(bytes, pos);
  if (n_out != 2 * s.n_actions || feature_len != s.input || s.input == 0 || s.n_actions == 0 ||
      s.hidden1 == 0 || s.hidden2 == 0)
    throw std::runtime_error("load_policy: inconsistent layer shapes");
  if (n_params != s.param_count()) throw std::runtime_error("load_policy: parameter count mismatch");
  if (bytes.size() - pos != n_params * sizeof(double))
    throw std::runtime_error("load_policy: truncated or oversized parameter block");
  GaussianPolicy pol(s);
  for (auto& v : pol.params()) v = get_le<double>(bytes, pos);
  return pol;
}

void save_policy_file(const GaussianPolicy& policy, const std::string& path) {
  const auto bytes = save_policy(policy);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("failed writing " + path);
}

GaussianPolicy load_policy_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open policy file " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return load_policy(bytes);
}

}  // namespace hrlsched
