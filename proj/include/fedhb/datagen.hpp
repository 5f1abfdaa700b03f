#pragma once

#include "fedhb/manifold.hpp"

#include <limits>
#include <vector>

namespace fedhb {

// ---------------------------------------------------------------------------
// Linear latent model: x = U_i* z + eps, personalized U_i* perturbed
// around a Haar-uniform global V*.
// ---------------------------------------------------------------------------

struct PcaGenConfig {
  int d = 100;
  int r = 20;
  int m = 10;
  int n = 20;
  double sigma_star = 0.1;   // entrywise std of the perturbation around V*
  double sigma_eps = 0.5;    // observation noise std
  std::uint64_t seed = 1;
};

struct PcaDataset {
  StiefelPoint v_star;
  std::vector<StiefelPoint> u_stars;
  std::vector<Matrix> samples;  // d×n per client
};

/// U_i* = R_{V*}(P_{T_V*}(V* + sigma_star G_i)), then x = U_i* z + eps.
PcaDataset gen_pca_data(const PcaGenConfig& cfg);

/// n fresh draws x = U* z + eps from one client model (held-out sets).
Matrix gen_pca_samples(const StiefelPoint& u_star, double sigma_eps, int n, Rng& rng);

// ---------------------------------------------------------------------------
// Nonlinear latent model with a one-layer decoder: client decoder weights
// are a shared Gaussian draw plus a per-client Gaussian perturbation.
// ---------------------------------------------------------------------------

struct AeGenConfig {
  int latent_dim = 5;
  int out_dim = 64;
  int m = 50;
  int n = 10;
  double sigma_mu = 0.1;     // std of the shared decoder weights
  double sigma_star = 0.01;  // std of the per-client perturbation
  double noise_std = 0.01;   // observation noise in the latent model
  std::uint64_t seed = 1;
};

struct AeDataset {
  Matrix shared_decoder;          // out_dim × latent_dim
  std::vector<Matrix> decoders;   // per client
  std::vector<Matrix> samples;    // out_dim × n per client
};

AeDataset gen_ae_data(const AeGenConfig& cfg);

/// n fresh draws x = W z + eps from one client decoder.
Matrix gen_ae_samples(const Matrix& decoder, double noise_std, int n, Rng& rng);

/// Heterogeneity level in decibels: 20 log10(sigma_mu / sigma_star).
double snr_db(double sigma_mu, double sigma_star);

// ---------------------------------------------------------------------------
// Gaussian population for the diffusion theory: theta_i ~ N(mu*, sigma_*^2 I),
// x_ij ~ N(theta_i, sigma_0^2 I).
// ---------------------------------------------------------------------------

struct GaussianPopulation {
  Vector mu_star;
  double sigma_star_sq = 0.0;
  double sigma0_sq = 1.0;
  int n = 10;
  int m = 50;
  double t_horizon = std::numeric_limits<double>::infinity();
};

struct GaussianDataset {
  std::vector<Vector> thetas;
  std::vector<Matrix> samples;  // d×n per client
};

GaussianDataset gen_gaussian_population(const GaussianPopulation& pop, std::uint64_t seed);

}  // namespace fedhb
