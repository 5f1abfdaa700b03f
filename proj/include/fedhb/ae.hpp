#pragma once

#include "fedhb/training.hpp"

namespace fedhb {

struct AeClientData {
  Matrix X;       // d_x × n training samples
  Matrix X_eval;  // optional held-out samples for energy reporting
  int latent_dim = 0;
};

/// Reconstruction term plus prior coupling for one client:
/// sum_j ||x_j - net(x_j)||^2 + (2 xi + ||mu - theta||^2) / (2 sigma^2);
/// in per-weight mode the prior is applied coordinatewise. The shared
/// log-sigma term is charged at the aggregate.
double ae_local_loss(const DenseNet& net, const Vector& mu, const Vector& sigma, double xi,
                     const AeClientData& data);

/// 100 (1 - ||x - xhat||^2 / ||x||^2); requires ||x|| > 0.
double energy_captured(const Vector& x, const Vector& xhat);

/// Mean energy over samples then clients; uses X_eval when present.
double mean_energy_captured(const std::vector<DenseNet>& nets,
                            const std::vector<AeClientData>& data);

/// Data-fit objective for autoencoders (full local batch per step).
class AeObjective : public NetObjective {
 public:
  explicit AeObjective(const std::vector<AeClientData>& data) : data_(&data) {}
  int num_clients() const override { return static_cast<int>(data_->size()); }
  Vector grad(int client, const DenseNet& net, double& loss, Rng& rng) const override;
  double loss(int client, const DenseNet& net, Rng& rng) const override;
  std::map<std::string, double> metrics(int client, const DenseNet& net) const override;

 private:
  const std::vector<AeClientData>* data_;
};

/// Alternating federated loop over the concatenated encoder/decoder weights;
/// see run_federated_training for the option semantics and trace schema
/// (mean_energy is reported through the objective metrics).
std::pair<NetTrainState, RoundTrace> run_personalized_ae(const NetTrainState& init,
                                                         const std::vector<AeClientData>& data,
                                                         const NetEtas& etas, int iterations,
                                                         int tau, std::uint64_t seed,
                                                         const NetTrainOptions& options);

// ---------------------------------------------------------------------------
// Smoothness constants for the convergence monitor. B bounds the weight
// norms along the run; L_theta has no closed form for nonlinear nets and is
// probed empirically.
// ---------------------------------------------------------------------------

struct AeTheoryConstants {
  double L_mu = 0;        // d_theta / (2 xi omega^2)
  double L_sigma = 0;     // 3 xi d^2/(2 xi^2 w^4) + 3 d^2 B^2/(xi^2 w^4) + d^2/(2 xi w^2)
  double L_sigma_mu = 0;  // B sqrt(d^3) / (w^3 sqrt(2 xi^3))
  double L_theta = 0;
  double B = 0;
  double eta_sigma_schedule_cap = 0;
};

AeTheoryConstants ae_theory_constants(double xi, double omega, int d_theta, double B,
                                      double L_theta);

/// theta: 1/L_theta; sigma: 1/(L_sigma + L_sigma_mu^2); mu: min(1, 1/L_mu).
NetEtas ae_theorem_step_sizes(const AeTheoryConstants& c);

/// max ||grad(theta) - grad(theta')|| / ||theta - theta'|| over random probe
/// pairs around the initial weights, inflated; a larger estimate only
/// shrinks the certified step size.
double estimate_theta_smoothness(const NetObjective& objective, const NetTrainState& state,
                                 int probes, double radius, std::uint64_t seed);

}  // namespace fedhb
