#pragma once

#include "fedhb/datagen.hpp"
#include "fedhb/training.hpp"

namespace fedhb {

/// Per-sample corruption levels: raw draws k uniform in {1,...,gamma},
/// mixed in as alpha = k / gamma in (0, 1].
struct CorruptionDraw {
  std::vector<int> raw;
  int gamma = 1;

  double alpha(int j) const { return static_cast<double>(raw[j]) / gamma; }
  int size() const { return static_cast<int>(raw.size()); }
};

CorruptionDraw sample_corruption(int n, int gamma, Rng& rng);

struct DgmClientData {
  Matrix X;       // d × n training samples
  Matrix X_eval;  // held-out samples for validation metrics
};

/// Denoising term sum_j ||phi(x_j(1-a_j) + z_j a_j; theta, a_j) - x_j||^2.
/// The denoiser conditions on alpha by input concatenation (width d+1);
/// `noise` supplies z_j column-wise.
double dgm_denoise_term(const DenseNet& net, const Matrix& X, const CorruptionDraw& draw,
                        const Matrix& noise);

/// Full corrupted-sample loss: denoise term + (2 xi + ||mu - theta||^2) /
/// (2 sigma^2) + d_theta log sigma (coordinatewise in per-weight mode). The
/// noise draw comes from `rng`.
double dgm_loss(const DenseNet& net, const Vector& mu, const Vector& sigma, double xi,
                const Matrix& X, const CorruptionDraw& draw, Rng& rng);

/// Denoising loss on held-out samples under a corruption/noise draw fixed by
/// the seed, comparable across models.
double denoise_validation_loss(const DenseNet& net, const Matrix& X_eval, int gamma,
                               std::uint64_t seed);

/// Denoiser objective: fresh per-sample corruption draw every local step.
class DgmObjective : public NetObjective {
 public:
  DgmObjective(const std::vector<DgmClientData>& data, int gamma)
      : data_(&data), gamma_(gamma) {}
  int num_clients() const override { return static_cast<int>(data_->size()); }
  Vector grad(int client, const DenseNet& net, double& loss, Rng& rng) const override;
  double loss(int client, const DenseNet& net, Rng& rng) const override;
  std::map<std::string, double> metrics(int client, const DenseNet& net) const override;

 private:
  const std::vector<DgmClientData>* data_;
  int gamma_;
};

/// Same loop contract as run_personalized_ae with the denoising loss
/// substituted; corruption is resampled every local step and the
/// learning-rate decay hook comes from the options.
std::pair<NetTrainState, RoundTrace> run_personalized_dgm(
    const NetTrainState& init, const std::vector<DgmClientData>& data, const NetEtas& etas,
    int iterations, int tau, int gamma, std::uint64_t seed, const NetTrainOptions& options);

/// 3-layer denoiser conditioned on alpha by input concatenation.
std::vector<int> dgm_denoiser_widths(int d, int hidden);

// ---------------------------------------------------------------------------
// Analytic Gaussian-target theory.
// ---------------------------------------------------------------------------

/// Score-function weight alpha = 1/sigma_0^2 - 1/(sigma_0^2 + T); the
/// T -> infinity limit is 1/sigma_0^2.
double score_alpha(double sigma0_sq, double t_horizon);

/// KL of the learned reverse-time process against the target,
/// ||theta - theta_hat + sigma_0^2/(sigma_0^2 + T) theta_hat||^2, as printed.
double gaussian_reverse_kl(const Vector& theta, const Vector& theta_hat, double sigma0_sq,
                           double t_horizon);

struct GaussianFit {
  Vector mu_hat;
  std::vector<Vector> theta_hats;
  double sigma_hat_sq = 0.0;
  double s_sq = 0.0;
  double alpha_score = 0.0;
};

/// Closed-form minimizer of the Gaussian personalized criterion given the
/// client sample means: mu_hat is the grand mean; theta_hat_i interpolates
/// x_bar_i and mu_hat with weight n a s^2-hat/(n a s^2-hat + 1); s^2-hat
/// solves the fixed point s2 = 2 xi/d + s^2 (n a s2/(n a s2 + 1))^2 by
/// bisection on the bracket [2 xi/d, 2 xi/d + s^2] with a Newton polish.
GaussianFit gaussian_personalized_fit(const std::vector<Vector>& xbars, double xi, int d,
                                      int n, double alpha_score);

struct Improvement {
  bool improves = false;
  double factor = 0.0;
};

/// Strict condition sigma_hat^2 > sigma_*^2/2 - sigma_0^2/(2n); the factor is
/// the asymptotic KL improvement over local training, whose average KL is
/// sigma_0^2/n per coordinate.
Improvement collaboration_improvement(double sigma_hat_sq, double sigma_star_sq,
                                      double sigma0_sq, int n);

/// xi >= 3 d sigma_0^2 / (2 n) guarantees strict improvement.
double xi_guarantee(int d, double sigma0_sq, int n);

struct KlEstimate {
  double avg_kl_collab = 0.0;
  double avg_kl_local = 0.0;
  double se_collab = 0.0;  // Monte-Carlo standard errors of the averages
  double se_local = 0.0;
};

/// Simulates m_sim clients from the population, fits the personalized
/// estimators jointly, and averages the per-coordinate reverse KL (the
/// full-norm KL divided by d, matching the per-coordinate asymptotics).
/// Per-client draws use counter-based seeds; sums reduce in index order.
KlEstimate monte_carlo_kl(const GaussianPopulation& pop, double xi, int m_sim,
                          std::uint64_t seed, int threads = 1);

}  // namespace fedhb
