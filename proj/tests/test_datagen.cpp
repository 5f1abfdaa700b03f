#include <doctest.h>

#include "fedhb/datagen.hpp"

#include <cmath>

using namespace fedhb;

TEST_CASE("pca generator: zero perturbation collapses to the global PC") {
  PcaGenConfig cfg;
  cfg.d = 12;
  cfg.r = 3;
  cfg.m = 4;
  cfg.n = 5;
  cfg.sigma_star = 0.0;
  const PcaDataset ds = gen_pca_data(cfg);
  for (const StiefelPoint& u : ds.u_stars) CHECK((u.mat - ds.v_star.mat).norm() < 1e-10);
}

TEST_CASE("pca generator: points orthonormal and byte-reproducible") {
  PcaGenConfig cfg;
  cfg.d = 20;
  cfg.r = 4;
  cfg.m = 3;
  cfg.n = 7;
  cfg.sigma_star = 0.5;
  const PcaDataset a = gen_pca_data(cfg);
  const PcaDataset b = gen_pca_data(cfg);
  CHECK(a.v_star.orthonormality_error() < 1e-10);
  for (int i = 0; i < cfg.m; ++i) {
    CHECK(a.u_stars[i].orthonormality_error() < 1e-10);
    CHECK((a.samples[i] - b.samples[i]).norm() == 0.0);
  }
}

TEST_CASE("pca generator: sample covariance matches its model, Monte Carlo") {
  PcaGenConfig cfg;
  cfg.d = 8;
  cfg.r = 2;
  cfg.m = 1;
  cfg.n = 100000;
  cfg.sigma_star = 0.2;
  cfg.sigma_eps = 0.5;
  const PcaDataset ds = gen_pca_data(cfg);
  const Matrix s = ds.samples[0] * ds.samples[0].transpose() / cfg.n;
  const Matrix expected = ds.u_stars[0].mat * ds.u_stars[0].mat.transpose() +
                          cfg.sigma_eps * cfg.sigma_eps * Matrix::Identity(8, 8);
  CHECK((s - expected).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("ae generator: zero perturbation gives identical decoders; snr formula") {
  AeGenConfig cfg;
  cfg.m = 3;
  cfg.sigma_star = 0.0;
  const AeDataset ds = gen_ae_data(cfg);
  for (const Matrix& w : ds.decoders) CHECK((w - ds.shared_decoder).norm() == 0.0);

  CHECK(snr_db(0.1, 0.05) == doctest::Approx(6.0206).epsilon(1e-4));
  CHECK(snr_db(0.1, 0.01) == doctest::Approx(20.0));
}

TEST_CASE("gaussian population: degenerate variances and pooled moment oracle") {
  GaussianPopulation pop;
  pop.mu_star = Vector::Constant(3, 2.5);
  pop.sigma_star_sq = 0.0;
  pop.sigma0_sq = 0.0;
  pop.m = 4;
  pop.n = 6;
  const GaussianDataset degenerate = gen_gaussian_population(pop, 7);
  for (const Matrix& x : degenerate.samples)
    CHECK((x.colwise() - pop.mu_star).norm() == 0.0);

  pop.sigma_star_sq = 0.3;
  pop.sigma0_sq = 0.7;
  pop.m = 2000;
  pop.n = 50;
  const GaussianDataset ds = gen_gaussian_population(pop, 8);
  double sq = 0.0;
  long count = 0;
  for (const Matrix& x : ds.samples) {
    sq += (x.colwise() - pop.mu_star).squaredNorm();
    count += x.size();
  }
  // law of total variance: Var = sigma_*^2 + sigma_0^2 per coordinate
  CHECK(sq / count == doctest::Approx(1.0).epsilon(0.02));

  const GaussianDataset again = gen_gaussian_population(pop, 8);
  CHECK((again.samples[0] - ds.samples[0]).norm() == 0.0);
}
