#include <doctest.h>

#include "fedhb/manifold.hpp"

#include <cmath>

using namespace fedhb;

namespace {

Matrix col2(double a, double b) {
  Matrix m(2, 1);
  m << a, b;
  return m;
}

// naive formula evaluation, independent of the library path
Matrix naive_projection(const Matrix& v, const Matrix& u) {
  return u - 0.5 * v * (v.transpose() * u + u.transpose() * v);
}

}  // namespace

TEST_CASE("tangent projection on hand-evaluated 2x1 cases") {
  const StiefelPoint v{col2(1, 0)};

  CHECK(tangent_project(v, col2(1, 0)).mat.norm() == doctest::Approx(0.0).epsilon(1e-14));

  const TangentVector t1 = tangent_project(v, col2(0, 1));
  CHECK(t1.mat(0, 0) == doctest::Approx(0.0));
  CHECK(t1.mat(1, 0) == doctest::Approx(1.0));

  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  const TangentVector t2 = tangent_project(v, col2(inv_sqrt2, inv_sqrt2));
  CHECK(t2.mat(0, 0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(t2.mat(1, 0) == doctest::Approx(inv_sqrt2));
}

TEST_CASE("tangent projection satisfies skew invariant and idempotence") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 3 + rng.uniform_int(0, 5);
    const int r = 1 + rng.uniform_int(0, std::min(3, d - 1));
    const StiefelPoint v = sample_stiefel_uniform(d, r, rng);
    const Matrix u = rng.gaussian_matrix(d, r);

    const TangentVector t = tangent_project(v, u);
    CHECK(t.skew_error() < 1e-10);
    CHECK((t.mat - naive_projection(v.mat, u)).norm() < 1e-12);

    const TangentVector tt = tangent_project(v, t.mat);
    CHECK((tt.mat - t.mat).norm() < 1e-10);
  }
}

TEST_CASE("polar retraction fixes the base point and normalizes 2x1 steps") {
  Rng rng(11);
  const StiefelPoint u = sample_stiefel_uniform(5, 2, rng);
  const StiefelPoint same = polar_retract(u, Matrix::Zero(5, 2));
  CHECK((same.mat - u.mat).norm() < 1e-14);

  const StiefelPoint e1{col2(1, 0)};
  const StiefelPoint moved = polar_retract(e1, col2(0, 1));
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(moved.mat(0, 0) == doctest::Approx(inv_sqrt2));
  CHECK(moved.mat(1, 0) == doctest::Approx(inv_sqrt2));
}

TEST_CASE("polar retraction stays on the manifold for tangent steps") {
  Rng rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = 2 + rng.uniform_int(0, 8);
    const int r = 1 + rng.uniform_int(0, std::min(4, d - 1));
    const StiefelPoint u = sample_stiefel_uniform(d, r, rng);
    Matrix xi = tangent_project(u, rng.gaussian_matrix(d, r)).mat;
    xi *= (2.0 * rng.uniform()) / std::max(xi.norm(), 1e-12);
    CHECK(polar_retract(u, xi).orthonormality_error() < 1e-8);
  }
}

TEST_CASE("polar retraction error is second order in the step") {
  Rng rng(17);
  const StiefelPoint u = sample_stiefel_uniform(8, 3, rng);
  Matrix xi = tangent_project(u, rng.gaussian_matrix(8, 3)).mat;
  xi *= 0.1 / xi.norm();

  double prev_err = 0.0;
  std::vector<double> errors;
  for (double alpha : {1.0, 0.5, 0.25, 0.125}) {
    const Matrix step = alpha * xi;
    errors.push_back((polar_retract(u, step).mat - (u.mat + step)).norm());
  }
  // log-log slope across successive halvings must be 2 +- 0.1
  for (std::size_t k = 0; k + 1 < errors.size(); ++k) {
    const double slope = std::log2(errors[k] / errors[k + 1]);
    CHECK(slope == doctest::Approx(2.0).epsilon(0.05));
  }
  prev_err = errors[0];
  CHECK(errors[1] == doctest::Approx(prev_err / 4.0).epsilon(0.1));
}

TEST_CASE("projected distance matches the spec cases and the naive oracle") {
  const StiefelPoint e1{col2(1, 0)};
  const StiefelPoint e2{col2(0, 1)};
  CHECK(stiefel_distance(e1, e1) == doctest::Approx(0.0));
  CHECK(stiefel_distance(e1, e2) == doctest::Approx(1.0));

  Rng rng(19);
  for (int trial = 0; trial < 50; ++trial) {
    const StiefelPoint v = sample_stiefel_uniform(6, 2, rng);
    const StiefelPoint u = sample_stiefel_uniform(6, 2, rng);
    const double dist = stiefel_distance(v, u);
    CHECK(dist >= 0.0);
    CHECK(dist == doctest::Approx(naive_projection(v.mat, u.mat).norm()).epsilon(1e-12));
  }
}

TEST_CASE("uniform sampling: orthonormal, deterministic, sign cases") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const StiefelPoint p = sample_stiefel_uniform(1, 1, rng);
    CHECK(std::abs(std::abs(p.mat(0, 0)) - 1.0) < 1e-14);
  }

  Rng a(42), b(42);
  const StiefelPoint p1 = sample_stiefel_uniform(3, 2, a);
  const StiefelPoint p2 = sample_stiefel_uniform(3, 2, b);
  CHECK((p1.mat - p2.mat).norm() == 0.0);
  CHECK(p1.orthonormality_error() < 1e-12);
}

TEST_CASE("uniform sampling is centred (Haar symmetry, Monte Carlo)") {
  Rng rng(29);
  Matrix mean = Matrix::Zero(4, 2);
  const int draws = 10000;
  for (int k = 0; k < draws; ++k) mean += sample_stiefel_uniform(4, 2, rng).mat;
  mean /= draws;
  CHECK(mean.cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("make_stiefel validates inputs") {
  CHECK_THROWS(make_stiefel(Matrix::Ones(2, 2)));
  CHECK_THROWS(make_stiefel(Matrix::Identity(2, 3)));
  CHECK_NOTHROW(make_stiefel(Matrix::Identity(3, 2)));
}
