#include "fedhb/ae.hpp"

#include <cmath>

namespace fedhb {

double ae_local_loss(const DenseNet& net, const Vector& mu, const Vector& sigma, double xi,
                     const AeClientData& data) {
  require(sigma.minCoeff() > 0.0, "ae_local_loss: sigma must be positive");
  double recon = 0.0;
  for (int j = 0; j < data.X.cols(); ++j)
    recon += (data.X.col(j) - net.forward(data.X.col(j))).squaredNorm();
  const Vector theta = net.flat();
  const double prior = prior_loss_term(theta, mu, sigma, xi);
  // prior_loss_term charges the shared log term; remove it here so the
  // caller can place it once at the aggregate
  const double log_term = sigma.size() > 1 ? sigma.array().log().sum()
                                           : theta.size() * std::log(sigma(0));
  return recon + prior - log_term;
}

double energy_captured(const Vector& x, const Vector& xhat) {
  const double norm_sq = x.squaredNorm();
  require(norm_sq > 0.0, "energy_captured: zero-norm sample");
  return 100.0 * (1.0 - (x - xhat).squaredNorm() / norm_sq);
}

double mean_energy_captured(const std::vector<DenseNet>& nets,
                            const std::vector<AeClientData>& data) {
  require(nets.size() == data.size() && !nets.empty(), "mean_energy_captured: size mismatch");
  double client_acc = 0.0;
  for (std::size_t i = 0; i < nets.size(); ++i) {
    const Matrix& x = data[i].X_eval.size() > 0 ? data[i].X_eval : data[i].X;
    double sample_acc = 0.0;
    for (int j = 0; j < x.cols(); ++j)
      sample_acc += energy_captured(x.col(j), nets[i].forward(x.col(j)));
    client_acc += sample_acc / static_cast<double>(x.cols());
  }
  return client_acc / static_cast<double>(nets.size());
}

Vector AeObjective::grad(int client, const DenseNet& net, double& loss, Rng&) const {
  const Matrix& x = (*data_)[client].X;
  Vector g = Vector::Zero(net.param_count());
  loss = 0.0;
  DenseNet::Cache cache;
  for (int j = 0; j < x.cols(); ++j) {
    const Vector out = net.forward(x.col(j), cache);
    const Vector residual = out - x.col(j);
    loss += residual.squaredNorm();
    g += net.backward(cache, 2.0 * residual);
  }
  return g;
}

double AeObjective::loss(int client, const DenseNet& net, Rng&) const {
  const Matrix& x = (*data_)[client].X;
  double acc = 0.0;
  for (int j = 0; j < x.cols(); ++j)
    acc += (x.col(j) - net.forward(x.col(j))).squaredNorm();
  return acc;
}

std::map<std::string, double> AeObjective::metrics(int client, const DenseNet& net) const {
  const AeClientData& cd = (*data_)[client];
  const Matrix& x = cd.X_eval.size() > 0 ? cd.X_eval : cd.X;
  double acc = 0.0;
  for (int j = 0; j < x.cols(); ++j)
    acc += energy_captured(x.col(j), net.forward(x.col(j)));
  return {{"mean_energy", acc / static_cast<double>(x.cols())}};
}

std::pair<NetTrainState, RoundTrace> run_personalized_ae(const NetTrainState& init,
                                                         const std::vector<AeClientData>& data,
                                                         const NetEtas& etas, int iterations,
                                                         int tau, std::uint64_t seed,
                                                         const NetTrainOptions& options) {
  AeObjective objective(data);
  require(!data.empty() && init.locals.size() == data.size(),
          "run_personalized_ae: client count mismatch");
  require(init.locals.front().input_dim() == data.front().X.rows() &&
              init.locals.front().output_dim() == data.front().X.rows(),
          "run_personalized_ae: net width must match the sample dimension");
  return run_federated_training(init, objective, etas, iterations, tau, seed, options);
}

AeTheoryConstants ae_theory_constants(double xi, double omega, int d_theta, double B,
                                      double L_theta) {
  require(xi > 0.0 && omega > 0.0 && omega < 1.0, "ae_theory_constants: bad xi/omega");
  AeTheoryConstants c;
  const double dt = static_cast<double>(d_theta);
  const double w2 = omega * omega;
  const double w4 = w2 * w2;
  c.L_mu = dt / (2.0 * xi * w2);
  c.L_sigma = 3.0 * xi * dt * dt / (2.0 * xi * xi * w4) + 3.0 * dt * dt * B * B / (xi * xi * w4) +
              dt * dt / (2.0 * xi * w2);
  c.L_sigma_mu = B * std::sqrt(dt * dt * dt) / (w2 * omega * std::sqrt(2.0 * xi * xi * xi));
  c.L_theta = L_theta;
  c.B = B;
  c.eta_sigma_schedule_cap = (1.0 - omega) * 2.0 * xi / (dt * dt);
  return c;
}

NetEtas ae_theorem_step_sizes(const AeTheoryConstants& c) {
  NetEtas etas;
  etas.theta = 1.0 / c.L_theta;
  etas.sigma = std::min(1.0 / (c.L_sigma + c.L_sigma_mu * c.L_sigma_mu),
                        c.eta_sigma_schedule_cap);
  etas.mu = std::min(1.0, 1.0 / c.L_mu);
  return etas;
}

double estimate_theta_smoothness(const NetObjective& objective, const NetTrainState& state,
                                 int probes, double radius, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x15));
  double worst = 0.0;
  const int m = objective.num_clients();
  for (int p = 0; p < probes; ++p) {
    const int i = rng.uniform_int(0, m - 1);
    DenseNet a = state.locals[i];
    DenseNet b = a;
    const Vector theta = a.flat();
    const Vector da = radius * rng.uniform() * rng.gaussian_vector(theta.size()).normalized();
    const Vector db = radius * rng.uniform() * rng.gaussian_vector(theta.size()).normalized();
    a.set_flat(theta + da);
    b.set_flat(theta + db);
    double dummy = 0.0;
    const Vector ga = objective.grad(i, a, dummy, rng);
    const Vector gb = objective.grad(i, b, dummy, rng);
    const double dist = (da - db).norm();
    if (dist > 1e-12) worst = std::max(worst, (ga - gb).norm() / dist);
  }
  return 1.5 * std::max(worst, 1e-8);
}

}  // namespace fedhb
