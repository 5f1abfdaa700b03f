#include "fedhb/prior.hpp"

#include <cmath>

namespace fedhb {

namespace {

void check_sigma_positive(const Vector& sigma) {
  require(sigma.size() >= 1 && sigma.minCoeff() > 0.0, "prior: sigma must be positive");
}

}  // namespace

double regularizer_value(const std::vector<Vector>& thetas, const PriorState& prior) {
  require(!thetas.empty(), "regularizer_value: no clients");
  check_sigma_positive(prior.sigma);
  require(prior.xi > 0.0, "regularizer_value: xi must be positive");
  const auto m = static_cast<double>(thetas.size());
  double acc = 0.0;
  if (prior.per_weight()) {
    require(prior.sigma.size() == prior.mu.size(), "regularizer_value: sigma/mu size");
    for (const Vector& theta : thetas) {
      require(theta.size() == prior.mu.size(), "regularizer_value: theta size");
      const Vector diff_sq = (prior.mu - theta).array().square();
      acc += ((2.0 * prior.xi + diff_sq.array()) /
              (2.0 * prior.sigma.array().square()))
                 .sum();
    }
    return acc / m + prior.sigma.array().log().sum();
  }
  const double sigma = prior.sigma(0);
  for (const Vector& theta : thetas) {
    require(theta.size() == prior.mu.size(), "regularizer_value: theta size");
    acc += (2.0 * prior.xi + (prior.mu - theta).squaredNorm()) / (2.0 * sigma * sigma);
  }
  return acc / m + prior.d_theta * std::log(sigma);
}

double regularizer_value(const std::vector<double>& dist_sq, double sigma, double xi,
                         int d_theta) {
  require(sigma > 0.0, "regularizer_value: sigma must be positive");
  require(!dist_sq.empty(), "regularizer_value: no clients");
  double acc = 0.0;
  for (double dsq : dist_sq) acc += (2.0 * xi + dsq) / (2.0 * sigma * sigma);
  return acc / static_cast<double>(dist_sq.size()) + d_theta * std::log(sigma);
}

double sigma_gradient(double dist_sq, double sigma, double xi, int d_theta) {
  require(sigma > 0.0, "sigma_gradient: sigma must be positive");
  return d_theta / sigma - (2.0 * xi + dist_sq) / (sigma * sigma * sigma);
}

double sigma_lower_bound(double omega, double xi, int d_theta) {
  require(omega > 0.0 && omega < 1.0, "sigma_lower_bound: omega must be in (0,1)");
  require(xi > 0.0 && d_theta >= 1, "sigma_lower_bound: need xi > 0, d_theta >= 1");
  return omega * std::sqrt(2.0 * xi / d_theta);
}

bool validate_schedule(double eta3, const SigmaSchedule& sched, double xi, int d_theta) {
  const double bound = sigma_lower_bound(sched.omega, xi, d_theta);
  const double eta3_max =
      (1.0 - sched.omega) * 2.0 * xi / (static_cast<double>(d_theta) * d_theta);
  return eta3 <= eta3_max && sched.init >= bound;
}

}  // namespace fedhb
