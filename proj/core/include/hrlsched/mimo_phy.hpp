#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hrlsched/cmatrix.hpp"

namespace hrlsched {

/// K x N_T channel, row i is the (path-loss scaled) channel of user i.
using ChannelMatrix = CMatrix;

/// Normalized precoder: one unit-norm N_T column per scheduled user, columns
/// in the same order as the scheduled set.
struct Precoder {
  CMatrix columns;  // N_T x |B|
  double alpha = 0.0;
};

/// Physical link parameters shared by all users of a cell.
struct LinkBudget {
  double bandwidth_hz = 10e6;
  double total_power_w = 0.0;
  std::vector<double> noise_variance_w;  // per user
  std::vector<double> path_loss_db;      // per user

  void validate(std::size_t n_users) const;
};

double dbm_to_watt(double dbm);

/// Amplitude scale 10^(-PL/20) applied to a unit-variance channel row.
double path_loss_amplitude(double path_loss_db);

/// Regularized zero-forcing V = H_B^H (H_B H_B^H + alpha I)^{-1} lambda^{1/2},
/// lambda chosen so that every column has unit norm.
/// Throws std::domain_error if the Gram matrix cannot be inverted.
Precoder rzf_precoder(const ChannelMatrix& h_sched, double alpha);

/// P_tot / n for each of the n scheduled users.
double equal_power(double total_power_w, std::size_t n_scheduled);

/// Per-user achievable rates (bits/s) for all K users; zero for users not in
/// `scheduled`. `powers` is indexed like `scheduled`.
std::vector<double> rates(const ChannelMatrix& h, std::span<const std::size_t> scheduled,
                          const Precoder& v, std::span<const double> powers,
                          const LinkBudget& link);

}  // namespace hrlsched
