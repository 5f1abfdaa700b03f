#include <doctest.h>

#include "fedhb/prior.hpp"

#include <cmath>

using namespace fedhb;

TEST_CASE("regularizer value on hand-computed cases") {
  // m=1, theta=mu, xi=1e-6, sigma=1, d_theta=4 -> 2 xi / 2 + 4 log 1 = 1e-6
  PriorState prior;
  prior.mu = Vector::Ones(4);
  prior.sigma = Vector::Constant(1, 1.0);
  prior.xi = 1e-6;
  prior.d_theta = 4;
  CHECK(regularizer_value({prior.mu}, prior) == doctest::Approx(1e-6));

  // ||mu - theta||^2 = 2, xi = 0, sigma = 1, d_theta = 2 -> 1.0
  CHECK(regularizer_value(std::vector<double>{2.0}, 1.0, 0.0, 2) == doctest::Approx(1.0));

  // the log term dominates for large sigma
  const double r_small = regularizer_value(std::vector<double>{0.0}, 1.0, 1e-6, 4);
  const double r_big = regularizer_value(std::vector<double>{0.0}, 1e8, 1e-6, 4);
  CHECK(r_big > r_small);
  CHECK(r_big == doctest::Approx(4 * std::log(1e8)).epsilon(1e-6));
}

TEST_CASE("regularizer is monotone in each squared distance") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const double sigma = 0.1 + rng.uniform();
    const double xi = rng.uniform();
    std::vector<double> dist{rng.uniform(), rng.uniform(), rng.uniform()};
    const double base = regularizer_value(dist, sigma, xi, 8);
    dist[trial % 3] += 0.5;
    CHECK(regularizer_value(dist, sigma, xi, 8) > base);
  }
}

TEST_CASE("per-weight regularizer applies the formula coordinatewise") {
  PriorState prior;
  prior.mu = Vector::Zero(2);
  prior.sigma = Vector::Constant(2, 2.0);
  prior.xi = 0.5;
  prior.d_theta = 2;
  Vector theta(2);
  theta << 1.0, 3.0;
  // sum_j (2*0.5 + theta_j^2) / (2*4) + 2 log 2 = (1+1)/8 + (1+9)/8 + 2 log 2
  const double expected = 2.0 / 8.0 + 10.0 / 8.0 + 2.0 * std::log(2.0);
  CHECK(regularizer_value({theta}, prior) == doctest::Approx(expected));
}

TEST_CASE("sigma gradient vanishes at the stationary scale and matches plug-ins") {
  const double xi = 0.3;
  const int d_theta = 5;
  const double stationary = std::sqrt(2.0 * xi / d_theta);
  CHECK(sigma_gradient(0.0, stationary, xi, d_theta) == doctest::Approx(0.0).epsilon(1e-12));

  CHECK(sigma_gradient(2.0, 1.0, 0.0, 2) == doctest::Approx(0.0));
  CHECK(sigma_gradient(0.0, 1.0, 0.0, 2) == doctest::Approx(2.0));
  CHECK_THROWS(sigma_gradient(0.0, -1.0, 0.0, 2));
}

TEST_CASE("sigma gradient equals a finite difference of the regularizer") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const double sigma = 0.2 + rng.uniform();
    const double xi = 0.01 + rng.uniform();
    const double dsq = rng.uniform();
    const int d_theta = 1 + rng.uniform_int(0, 9);
    const double h = 1e-6;
    const double fd = (regularizer_value({dsq}, sigma + h, xi, d_theta) -
                       regularizer_value({dsq}, sigma - h, xi, d_theta)) /
                      (2.0 * h);
    CHECK(sigma_gradient(dsq, sigma, xi, d_theta) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("sigma lower bound and schedule validation") {
  CHECK(sigma_lower_bound(0.5, 1e-6, 2000) == doctest::Approx(1.5811e-5).epsilon(1e-4));
  CHECK_THROWS(sigma_lower_bound(0.0, 1e-6, 10));
  CHECK_THROWS(sigma_lower_bound(1.0, 1e-6, 10));

  SigmaSchedule sched;
  sched.omega = 0.5;
  const double xi = 1e-6;
  const int d_theta = 2000;
  sched.init = sigma_lower_bound(sched.omega, xi, d_theta);
  const double eta3_boundary = (1.0 - sched.omega) * 2.0 * xi / (double(d_theta) * d_theta);
  CHECK(validate_schedule(eta3_boundary, sched, xi, d_theta));         // boundary accepted
  CHECK_FALSE(validate_schedule(eta3_boundary * 1.01, sched, xi, d_theta));
  sched.init *= 0.99;
  CHECK_FALSE(validate_schedule(eta3_boundary, sched, xi, d_theta));
}

TEST_CASE("omega near one forces a vanishing step") {
  const double xi = 0.25;
  const int d_theta = 4;
  SigmaSchedule sched;
  sched.omega = 1.0 - 1e-9;
  sched.init = std::sqrt(2.0 * xi / d_theta);
  CHECK(sigma_lower_bound(sched.omega, xi, d_theta) ==
        doctest::Approx(std::sqrt(2.0 * xi / d_theta)));
  CHECK_FALSE(validate_schedule(1e-6, sched, xi, d_theta));
  CHECK(validate_schedule(1e-10 * 2.0 * xi / 16.0, sched, xi, d_theta));
}
