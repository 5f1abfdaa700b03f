#include "fedhb/baselines.hpp"

#include <cmath>

namespace fedhb {

namespace {

// Riemannian descent on the per-client likelihoods, no coupling.
std::pair<std::vector<StiefelPoint>, RoundTrace> pca_local_training(
    const std::vector<PcaClientData>& data, std::vector<StiefelPoint> locals, double eta,
    int iterations, std::uint64_t seed, int threads) {
  const int m = static_cast<int>(data.size());
  RoundMessage msg;
  msg.mu = Vector::Zero(1);
  msg.sigma = Vector::Ones(1);

  auto step = [&](int i, int, const RoundMessage& in, Rng&) {
    StiefelPoint& u = locals[i];
    const TangentVector g = tangent_project(u, pca_likelihood_grad_u(u, data[i]));
    u = polar_retract(u, -eta * g.mat);
    ClientUpdate up;
    up.mu_i = in.mu;
    up.sigma_i = in.sigma;
    up.metrics["grad_U_msq"] = g.mat.squaredNorm();
    up.metrics["loss"] = pca_local_loss(u, u, 1.0, 0.0, data[i]);
    return up;
  };
  auto [out_msg, trace] = run_rounds(m, msg, RoundSchedule{iterations, 1}, seed, step,
                                     aggregate_mean, nullptr, EngineOptions{threads});
  (void)out_msg;
  return {std::move(locals), std::move(trace)};
}

// Single shared point; average of projected likelihood gradients, retracted.
std::pair<StiefelPoint, RoundTrace> pca_global_training(
    const std::vector<PcaClientData>& data, StiefelPoint global, double eta, int iterations,
    std::uint64_t seed, int threads) {
  const int m = static_cast<int>(data.size());
  const int rows = global.d(), cols = global.r();
  const int width = rows * cols;

  RoundMessage msg;
  msg.mu = Eigen::Map<const Vector>(global.mat.data(), width);
  msg.sigma = Vector::Ones(1);

  auto step = [&](int i, int, const RoundMessage& in, Rng&) {
    const StiefelPoint v{Eigen::Map<const Matrix>(in.mu.data(), rows, cols)};
    const TangentVector g = tangent_project(v, pca_likelihood_grad_u(v, data[i]));
    ClientUpdate up;
    up.mu_i = in.mu;
    up.sigma_i = in.sigma;
    up.extra = Eigen::Map<const Vector>(g.mat.data(), width);
    up.metrics["loss"] = pca_local_loss(v, v, 1.0, 0.0, data[i]);
    return up;
  };
  auto aggregate = [&](const RoundMessage& prev, const std::vector<ClientUpdate>& ups) {
    Vector g_mean = Vector::Zero(width);
    for (const ClientUpdate& u : ups) g_mean += u.extra;
    g_mean /= static_cast<double>(ups.size());
    const StiefelPoint v{Eigen::Map<const Matrix>(prev.mu.data(), rows, cols)};
    const StiefelPoint next =
        polar_retract(v, -eta * Eigen::Map<const Matrix>(g_mean.data(), rows, cols));
    RoundMessage out;
    out.mu = Eigen::Map<const Vector>(next.mat.data(), width);
    out.sigma = prev.sigma;
    return out;
  };
  auto [out_msg, trace] = run_rounds(m, msg, RoundSchedule{iterations, 1}, seed, step,
                                     aggregate, nullptr, EngineOptions{threads});
  StiefelPoint final_v{Eigen::Map<const Matrix>(out_msg.mu.data(), rows, cols)};
  return {std::move(final_v), std::move(trace)};
}

}  // namespace

PcaBaselineResult run_pca_baseline(BaselineKind kind, const std::vector<PcaClientData>& data,
                                   const std::vector<StiefelPoint>& init_locals,
                                   const StiefelPoint& init_global, double eta,
                                   int iterations, int finetune_iterations,
                                   std::uint64_t seed, int threads) {
  require(!data.empty(), "run_pca_baseline: no clients");
  PcaBaselineResult result;
  switch (kind) {
    case BaselineKind::Local: {
      require(init_locals.size() == data.size(), "run_pca_baseline: local init mismatch");
      auto [models, trace] =
          pca_local_training(data, init_locals, eta, iterations, seed, threads);
      result.models = std::move(models);
      result.trace = std::move(trace);
      return result;
    }
    case BaselineKind::GlobalFedAvg: {
      auto [model, trace] =
          pca_global_training(data, init_global, eta, iterations, seed, threads);
      result.models.assign(data.size(), model);
      result.trace = std::move(trace);
      return result;
    }
    case BaselineKind::FedAvgFinetune: {
      auto [model, trace] =
          pca_global_training(data, init_global, eta, iterations, seed, threads);
      std::vector<StiefelPoint> start(data.size(), model);
      auto [models, ft_trace] = pca_local_training(data, std::move(start), eta,
                                                   finetune_iterations, seed + 1, threads);
      result.models = std::move(models);
      result.trace = std::move(ft_trace);
      return result;
    }
  }
  throw std::invalid_argument("run_pca_baseline: unknown kind");
}

double reconstruction_error(const std::vector<StiefelPoint>& models,
                            const std::vector<Matrix>& eval_samples) {
  require(models.size() == eval_samples.size() && !models.empty(),
          "reconstruction_error: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const Matrix& x = eval_samples[i];
    const Matrix projected = models[i].mat * (models[i].mat.transpose() * x);
    acc += (x - projected).squaredNorm() / static_cast<double>(x.cols());
  }
  return acc / static_cast<double>(models.size());
}

double reconstruction_error_ratio(const std::vector<StiefelPoint>& models,
                                  const std::vector<StiefelPoint>& true_models,
                                  const std::vector<Matrix>& eval_samples) {
  const double truth = reconstruction_error(true_models, eval_samples);
  require(truth > 0.0, "reconstruction_error_ratio: degenerate true error");
  return reconstruction_error(models, eval_samples) / truth;
}

namespace {

// FedAvg: one shared parameter vector, tau local steps per round, ordered
// weight averaging; optimizer state resets at round starts.
NetBaselineResult run_fedavg(const NetObjective& objective, const NetTrainState& init,
                             double eta_theta, int iterations, int tau, std::uint64_t seed,
                             const NetTrainOptions& options) {
  const int m = objective.num_clients();
  std::vector<DenseNet> nets = init.locals;
  std::vector<OptimState> optims(m);
  for (OptimState& o : optims) {
    o.kind = options.theta_optimizer;
    o.momentum = options.theta_momentum;
  }

  RoundMessage msg;
  msg.mu = init.mu;
  msg.sigma = Vector::Ones(1);

  auto step = [&](int i, int t, const RoundMessage& in, Rng& rng) {
    const int round = (t - 1) / tau + 1;
    double eta = eta_theta;
    if (options.decay_round > 0 && round > options.decay_round) eta *= options.decay_factor;
    if ((t - 1) % tau == 0) {
      nets[i].set_flat(in.mu);
      optims[i].reset();
    }
    double loss = 0.0;
    Vector g = objective.grad(i, nets[i], loss, rng);
    const double grad_sq = g.squaredNorm();
    if (options.clip_gradients) g = clip_inf(std::move(g), options.clip_model);
    Vector theta = nets[i].flat();
    optims[i].step(theta, g, eta);
    nets[i].set_flat(theta);

    ClientUpdate up;
    up.mu_i = theta;
    up.sigma_i = in.sigma;
    up.metrics["grad_theta_sq"] = grad_sq;
    return up;
  };

  auto server_metrics = [&](int t, const RoundMessage&, const std::vector<ClientUpdate>& ups) {
    Rng eval_rng(derive_seed(seed, 0x78, static_cast<std::uint64_t>(t)));
    std::map<std::string, double> row;
    double loss = 0.0, grad = 0.0;
    std::map<std::string, double> extra;
    for (int i = 0; i < m; ++i) {
      loss += objective.loss(i, nets[i], eval_rng);
      for (const auto& [key, value] : objective.metrics(i, nets[i])) extra[key] += value;
    }
    for (const ClientUpdate& u : ups) grad += u.metrics.at("grad_theta_sq");
    row["mean_loss"] = loss / m;
    row["grad_theta_msq"] = grad / m;
    for (const auto& [key, value] : extra) row[key] = value / m;
    row["round"] = (t - 1) / tau + 1;
    row["comm"] = t % tau == 0 ? 1.0 : 0.0;
    return row;
  };

  auto [out_msg, trace] = run_rounds(m, msg, RoundSchedule{iterations, tau}, seed, step,
                                     aggregate_mean, server_metrics,
                                     EngineOptions{options.threads});
  NetBaselineResult result;
  for (DenseNet& net : nets) net.set_flat(out_msg.mu);
  result.models = std::move(nets);
  result.trace = std::move(trace);
  return result;
}

}  // namespace

NetBaselineResult run_net_baseline(BaselineKind kind, const NetObjective& objective,
                                   const NetTrainState& init, double eta_theta,
                                   int iterations, int tau, int finetune_rounds,
                                   std::uint64_t seed, const NetTrainOptions& options) {
  require(finetune_rounds >= 1 || kind != BaselineKind::FedAvgFinetune,
          "run_net_baseline: finetune_rounds must be >= 1");
  NetTrainOptions local_options = options;
  local_options.prior_off = true;
  NetEtas local_etas;
  local_etas.theta = eta_theta;
  local_etas.mu = 0.0;
  local_etas.sigma = 0.0;

  switch (kind) {
    case BaselineKind::Local: {
      auto [state, trace] = run_federated_training(init, objective, local_etas, iterations,
                                                   tau, seed, local_options);
      return NetBaselineResult{std::move(state.locals), std::move(trace)};
    }
    case BaselineKind::GlobalFedAvg:
      return run_fedavg(objective, init, eta_theta, iterations, tau, seed, options);
    case BaselineKind::FedAvgFinetune: {
      NetBaselineResult global =
          run_fedavg(objective, init, eta_theta, iterations, tau, seed, options);
      NetTrainState start = init;
      start.locals = global.models;
      auto [state, trace] = run_federated_training(start, objective, local_etas,
                                                   finetune_rounds * tau, tau, seed + 1,
                                                   local_options);
      return NetBaselineResult{std::move(state.locals), std::move(trace)};
    }
  }
  throw std::invalid_argument("run_net_baseline: unknown kind");
}

}  // namespace fedhb
