#pragma once

#include "fedhb/fed.hpp"
#include "fedhb/nnet.hpp"
#include "fedhb/prior.hpp"

#include <map>
#include <memory>
#include <string>

namespace fedhb {

/// Data-fit side of a client objective; the prior coupling, sigma dynamics
/// and communication pattern are shared across tasks.
class NetObjective {
 public:
  virtual ~NetObjective() = default;
  virtual int num_clients() const = 0;
  /// Gradient of the data-fit term with its loss value. Stochastic terms
  /// (e.g. corruption draws) must come from `rng` only.
  virtual Vector grad(int client, const DenseNet& net, double& loss, Rng& rng) const = 0;
  virtual double loss(int client, const DenseNet& net, Rng& rng) const = 0;
  /// Extra per-client trace metrics (evaluation quantities).
  virtual std::map<std::string, double> metrics(int client, const DenseNet& net) const {
    return {};
  }
};

struct NetEtas {
  double theta = 0.01;
  double mu = 0.01;
  double sigma = 0.001;
};

struct NetTrainOptions {
  // training variants; all-off reproduces the literal algorithm listing
  bool per_weight_sigma = true;
  bool clip_gradients = true;
  double clip_model = 1.0;
  double clip_sigma = 10.0;
  bool sigma_update_first = true;
  bool global_in_local_iters = true;
  OptimState::Kind theta_optimizer = OptimState::Kind::Momentum;
  double theta_momentum = 0.9;

  bool prior_off = false;  // drop the population prior entirely (local training)
  SigmaSchedule sched;
  double xi = 1e-6;
  int decay_round = 0;  // multiply eta_theta, eta_mu by decay_factor at this round; 0 = off
  double decay_factor = 0.1;
  bool monitor_theory = false;
  int threads = 1;

  static NetTrainOptions literal_listing();
};

struct NetTrainState {
  std::vector<DenseNet> locals;
  Vector mu;
  Vector sigma;  // one entry (scalar mode) or d_theta entries
  int round = 0;
};

/// Independently seeded client nets plus a global model drawn from its own
/// stream; sigma starts at sched-style init in scalar or per-weight shape.
NetTrainState make_net_state(int num_clients, const std::vector<int>& widths,
                             const std::vector<Activation>& acts, double sigma0,
                             bool per_weight_sigma, std::uint64_t seed);

/// Federated loop with tau local steps per communication round. Clients hold
/// (theta_i, mu-copy, sigma-copy); on round starts they adopt the broadcast,
/// every iteration they take a theta step, and depending on the options the
/// sigma/mu steps run at the first local iteration / every local iteration
/// instead of the literal end-of-round position. The server averages in
/// ascending client order. Trace columns: iter, round, comm, mean_loss,
/// grad_theta_msq, grad_mu_sq, grad_sigma_sq, sigma_min, sigma_mean,
/// sigma_max, plus any objective metrics; row 0 is the initial state.
std::pair<NetTrainState, RoundTrace> run_federated_training(
    const NetTrainState& init, const NetObjective& objective, const NetEtas& etas,
    int iterations, int tau, std::uint64_t seed, const NetTrainOptions& options);

// prior pieces shared by the trainers -------------------------------------

/// (2 xi + ||mu - theta||^2) / (2 sigma^2) summed coordinatewise in
/// per-weight mode, plus the shared log term.
double prior_loss_term(const Vector& theta, const Vector& mu, const Vector& sigma, double xi);

/// d(prior)/d(theta) = (theta - mu) / sigma^2, coordinatewise in per-weight mode.
Vector prior_grad_theta(const Vector& theta, const Vector& mu, const Vector& sigma);

/// d(prior)/d(mu) = (mu - theta) / sigma^2.
Vector prior_grad_mu(const Vector& theta, const Vector& mu, const Vector& sigma);

/// Scalar mode: d_theta/sigma - (2 xi + ||mu-theta||^2)/sigma^3 (one entry);
/// per-weight: 1/sigma_j - (2 xi + (mu_j-theta_j)^2)/sigma_j^3.
Vector prior_grad_sigma(const Vector& theta, const Vector& mu, const Vector& sigma, double xi);

}  // namespace fedhb
