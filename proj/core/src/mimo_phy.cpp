#include "hrlsched/mimo_phy.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hrlsched {

void LinkBudget::validate(std::size_t n_users) const {
  if (!(bandwidth_hz > 0.0)) throw std::invalid_argument("link: bandwidth must be positive");
  if (!(total_power_w > 0.0)) throw std::invalid_argument("link: total power must be positive");
  if (noise_variance_w.size() != n_users || path_loss_db.size() != n_users)
    throw std::invalid_argument("link: per-user vectors must have K entries");
  for (std::size_t i = 0; i < n_users; ++i) {
    if (!(noise_variance_w[i] > 0.0))
      throw std::invalid_argument("link: noise variance of user " + std::to_string(i) +
                                  " must be positive");
    if (!(path_loss_db[i] > 0.0))
      throw std::invalid_argument("link: path loss of user " + std::to_string(i) +
                                  " must be positive");
  }
}

double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double path_loss_amplitude(double path_loss_db) { return std::pow(10.0, -path_loss_db / 20.0); }

Precoder rzf_precoder(const ChannelMatrix& h_sched, double alpha) {
  const std::size_t n_sched = h_sched.rows();
  const std::size_t n_tx = h_sched.cols();
  if (n_sched == 0 || n_sched > n_tx)
    throw std::invalid_argument("rzf_precoder: need 1 <= |B| <= N_T");
  if (alpha < 0.0) throw std::invalid_argument("rzf_precoder: alpha must be >= 0");

  const CMatrix h_adj = h_sched.adjoint();
  CMatrix gram = h_sched * h_adj;
  for (std::size_t i = 0; i < n_sched; ++i) gram(i, i) += alpha;

  // V = H^H G^{-1}; solve G X = I rather than forming H^H G^{-1} directly so
  // the only inversion is the small |B| x |B| system.
  const CMatrix g_inv = solve(std::move(gram), CMatrix::identity(n_sched));
  CMatrix v = h_adj * g_inv;

  for (std::size_t c = 0; c < n_sched; ++c) {
    double norm_sq = 0.0;
    for (std::size_t r = 0; r < n_tx; ++r) norm_sq += std::norm(v(r, c));
    if (!(norm_sq > 0.0)) throw std::domain_error("rzf_precoder: zero precoder column");
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (std::size_t r = 0; r < n_tx; ++r) v(r, c) *= inv;
  }
  return {std::move(v), alpha};
}

double equal_power(double total_power_w, std::size_t n_scheduled) {
  if (n_scheduled == 0) throw std::invalid_argument("equal_power: no scheduled users");
  return total_power_w / static_cast<double>(n_scheduled);
}

std::vector<double> rates(const ChannelMatrix& h, std::span<const std::size_t> scheduled,
                          const Precoder& v, std::span<const double> powers,
                          const LinkBudget& link) {
  const std::size_t n_users = h.rows();
  const std::size_t n_tx = h.cols();
  if (v.columns.cols() != scheduled.size() || powers.size() != scheduled.size() ||
      (!scheduled.empty() && v.columns.rows() != n_tx))
    throw std::invalid_argument("rates: precoder/power/scheduled-set mismatch");

  std::vector<double> out(n_users, 0.0);
  for (std::size_t a = 0; a < scheduled.size(); ++a) {
    const std::size_t i = scheduled[a];
    const auto hi = h.row(i);
    double signal = 0.0;
    double interference = 0.0;
    for (std::size_t b = 0; b < scheduled.size(); ++b) {
      cplx gain{};
      for (std::size_t k = 0; k < n_tx; ++k) gain += hi[k] * v.columns(k, b);
      const double p = powers[b] * std::norm(gain);
      if (a == b)
        signal = p;
      else
        interference += p;
    }
    const double sinr = signal / (interference + link.noise_variance_w[i]);
    out[i] = link.bandwidth_hz * std::log2(1.0 + sinr);
  }
  return out;
}

}  // namespace hrlsched
