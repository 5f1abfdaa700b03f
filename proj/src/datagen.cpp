#include "fedhb/datagen.hpp"

#include <cmath>

namespace fedhb {

PcaDataset gen_pca_data(const PcaGenConfig& cfg) {
  require(cfg.d >= cfg.r && cfg.r >= 1, "gen_pca_data: need d >= r >= 1");
  require(cfg.m >= 1 && cfg.n >= 1, "gen_pca_data: need m, n >= 1");
  require(cfg.sigma_star >= 0.0 && cfg.sigma_eps >= 0.0, "gen_pca_data: negative std");

  PcaDataset out;
  Rng global_rng(derive_seed(cfg.seed, 0xF1));
  out.v_star = sample_stiefel_uniform(cfg.d, cfg.r, global_rng);

  out.u_stars.reserve(cfg.m);
  out.samples.reserve(cfg.m);
  for (int i = 0; i < cfg.m; ++i) {
    Rng rng(derive_seed(cfg.seed, 0xF2, static_cast<std::uint64_t>(i)));
    const Matrix u_hat =
        out.v_star.mat + cfg.sigma_star * rng.gaussian_matrix(cfg.d, cfg.r);
    const StiefelPoint u_star =
        polar_retract(out.v_star, tangent_project(out.v_star, u_hat).mat);
    out.samples.push_back(gen_pca_samples(u_star, cfg.sigma_eps, cfg.n, rng));
    out.u_stars.push_back(u_star);
  }
  return out;
}

Matrix gen_pca_samples(const StiefelPoint& u_star, double sigma_eps, int n, Rng& rng) {
  Matrix x(u_star.d(), n);
  for (int j = 0; j < n; ++j)
    x.col(j) = u_star.mat * rng.gaussian_vector(u_star.r()) +
               sigma_eps * rng.gaussian_vector(u_star.d());
  return x;
}

AeDataset gen_ae_data(const AeGenConfig& cfg) {
  require(cfg.latent_dim >= 1 && cfg.out_dim >= 1, "gen_ae_data: bad dims");
  require(cfg.m >= 1 && cfg.n >= 1, "gen_ae_data: need m, n >= 1");

  AeDataset out;
  Rng global_rng(derive_seed(cfg.seed, 0xA1));
  out.shared_decoder = cfg.sigma_mu * global_rng.gaussian_matrix(cfg.out_dim, cfg.latent_dim);

  out.decoders.reserve(cfg.m);
  out.samples.reserve(cfg.m);
  for (int i = 0; i < cfg.m; ++i) {
    Rng rng(derive_seed(cfg.seed, 0xA2, static_cast<std::uint64_t>(i)));
    Matrix decoder =
        out.shared_decoder +
        cfg.sigma_star * rng.gaussian_matrix(cfg.out_dim, cfg.latent_dim);
    out.samples.push_back(gen_ae_samples(decoder, cfg.noise_std, cfg.n, rng));
    out.decoders.push_back(std::move(decoder));
  }
  return out;
}

Matrix gen_ae_samples(const Matrix& decoder, double noise_std, int n, Rng& rng) {
  Matrix x(decoder.rows(), n);
  for (int j = 0; j < n; ++j)
    x.col(j) = decoder * rng.gaussian_vector(static_cast<int>(decoder.cols())) +
               noise_std * rng.gaussian_vector(static_cast<int>(decoder.rows()));
  return x;
}

double snr_db(double sigma_mu, double sigma_star) {
  require(sigma_mu > 0.0 && sigma_star > 0.0, "snr_db: stds must be positive");
  return 20.0 * std::log10(sigma_mu / sigma_star);
}

GaussianDataset gen_gaussian_population(const GaussianPopulation& pop, std::uint64_t seed) {
  require(pop.sigma_star_sq >= 0.0 && pop.sigma0_sq >= 0.0, "gen_gaussian: negative variance");
  require(pop.n >= 1 && pop.m >= 1, "gen_gaussian: need n, m >= 1");
  const int d = static_cast<int>(pop.mu_star.size());
  require(d >= 1, "gen_gaussian: empty mu_star");

  GaussianDataset out;
  const double sigma_star = std::sqrt(pop.sigma_star_sq);
  const double sigma0 = std::sqrt(pop.sigma0_sq);
  out.thetas.reserve(pop.m);
  out.samples.reserve(pop.m);
  for (int i = 0; i < pop.m; ++i) {
    Rng rng(derive_seed(seed, 0xD1, static_cast<std::uint64_t>(i)));
    Vector theta = pop.mu_star + sigma_star * rng.gaussian_vector(d);
    Matrix x(d, pop.n);
    for (int j = 0; j < pop.n; ++j) x.col(j) = theta + sigma0 * rng.gaussian_vector(d);
    out.thetas.push_back(std::move(theta));
    out.samples.push_back(std::move(x));
  }
  return out;
}

}  // namespace fedhb
