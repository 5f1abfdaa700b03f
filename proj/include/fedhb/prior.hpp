#pragma once

#include "fedhb/types.hpp"

#include <algorithm>
#include <vector>

namespace fedhb {

/// Population-prior state Gamma = (mu, sigma) with inverse-Gamma
/// hyper-parameter xi. sigma holds one entry in scalar mode or d_theta
/// entries in per-weight mode.
struct PriorState {
  Vector mu;
  Vector sigma;
  double xi = 1e-6;
  int d_theta = 0;

  bool per_weight() const { return sigma.size() > 1; }
};

struct SigmaSchedule {
  double init = 0.4;
  int freeze_rounds = 0;
  int lazy_start_round = 0;
  double omega = 0.5;
  double clip_inf = 10.0;

  /// sigma steps are taken only in communication rounds strictly after this.
  int first_update_after() const { return std::max(freeze_rounds, lazy_start_round); }
};

/// R = (1/m) sum_i (2 xi + ||mu - theta_i||^2) / (2 sigma^2) + d_theta log sigma,
/// with the per-weight variant applying the formula coordinatewise
/// (d_theta = 1 per coordinate).
double regularizer_value(const std::vector<Vector>& thetas, const PriorState& prior);

/// Scalar-sigma regularizer from precomputed squared distances; used with
/// non-Euclidean metrics (projected Stiefel distance).
double regularizer_value(const std::vector<double>& dist_sq, double sigma, double xi,
                         int d_theta);

/// Per-client derivative d/dsigma of the local loss: d_theta / sigma -
/// (2 xi + dist_sq) / sigma^3. The server averages these across clients.
double sigma_gradient(double dist_sq, double sigma, double xi, int d_theta);

/// omega * sqrt(2 xi / d_theta); sigma iterates never fall below this once
/// the schedule preconditions hold.
double sigma_lower_bound(double omega, double xi, int d_theta);

/// True iff eta3 <= (1 - omega) 2 xi / d_theta^2 and init >= bound,
/// boundaries included.
bool validate_schedule(double eta3, const SigmaSchedule& sched, double xi, int d_theta);

inline double clamp_sigma(double sigma, double bound) { return std::max(sigma, bound); }

}  // namespace fedhb
