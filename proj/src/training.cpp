#include "fedhb/training.hpp"

#include <cmath>
#include <stdexcept>

namespace fedhb {

NetTrainOptions NetTrainOptions::literal_listing() {
  NetTrainOptions o;
  o.per_weight_sigma = false;
  o.clip_gradients = false;
  o.sigma_update_first = false;
  o.global_in_local_iters = false;
  o.theta_optimizer = OptimState::Kind::Sgd;
  return o;
}

NetTrainState make_net_state(int num_clients, const std::vector<int>& widths,
                             const std::vector<Activation>& acts, double sigma0,
                             bool per_weight_sigma, std::uint64_t seed) {
  require(num_clients >= 1, "make_net_state: need at least one client");
  NetTrainState state;
  state.locals.reserve(num_clients);
  for (int i = 0; i < num_clients; ++i) {
    Rng rng(derive_seed(seed, 0xE0, static_cast<std::uint64_t>(i)));
    state.locals.push_back(make_mlp(widths, acts, rng));
  }
  Rng rng(derive_seed(seed, 0xE0, static_cast<std::uint64_t>(num_clients)));
  state.mu = make_mlp(widths, acts, rng).flat();
  const int d_theta = state.locals.front().param_count();
  state.sigma = per_weight_sigma ? Vector::Constant(d_theta, sigma0)
                                 : Vector::Constant(1, sigma0);
  return state;
}

double prior_loss_term(const Vector& theta, const Vector& mu, const Vector& sigma, double xi) {
  if (sigma.size() > 1) {
    const Eigen::ArrayXd diff_sq = (mu - theta).array().square();
    return ((2.0 * xi + diff_sq) / (2.0 * sigma.array().square())).sum() +
           sigma.array().log().sum();
  }
  const double s = sigma(0);
  return (2.0 * xi + (mu - theta).squaredNorm()) / (2.0 * s * s) +
         theta.size() * std::log(s);
}

Vector prior_grad_theta(const Vector& theta, const Vector& mu, const Vector& sigma) {
  if (sigma.size() > 1) return ((theta - mu).array() / sigma.array().square()).matrix();
  return (theta - mu) / (sigma(0) * sigma(0));
}

Vector prior_grad_mu(const Vector& theta, const Vector& mu, const Vector& sigma) {
  if (sigma.size() > 1) return ((mu - theta).array() / sigma.array().square()).matrix();
  return (mu - theta) / (sigma(0) * sigma(0));
}

Vector prior_grad_sigma(const Vector& theta, const Vector& mu, const Vector& sigma, double xi) {
  if (sigma.size() > 1) {
    const Eigen::ArrayXd s = sigma.array();
    const Eigen::ArrayXd diff_sq = (mu - theta).array().square();
    return (1.0 / s - (2.0 * xi + diff_sq) / s.cube()).matrix();
  }
  const double s = sigma(0);
  return Vector::Constant(
      1, theta.size() / s - (2.0 * xi + (mu - theta).squaredNorm()) / (s * s * s));
}

namespace {

struct ClientSlot {
  Vector mu_copy;
  Vector sigma_copy;
  OptimState optimizer;
};

void check_finite(const Vector& v, const std::string& what, int client, int iter) {
  if (!v.allFinite())
    throw std::runtime_error("non-finite " + what + " for client " + std::to_string(client) +
                             " at iteration " + std::to_string(iter));
}

}  // namespace

std::pair<NetTrainState, RoundTrace> run_federated_training(
    const NetTrainState& init, const NetObjective& objective, const NetEtas& etas,
    int iterations, int tau, std::uint64_t seed, const NetTrainOptions& options) {
  const int m = objective.num_clients();
  require(static_cast<int>(init.locals.size()) == m && m >= 1,
          "run_federated_training: client count mismatch");
  require(tau >= 1, "run_federated_training: tau must be >= 1");
  const int d_theta = init.locals.front().param_count();
  require(init.mu.size() == d_theta, "run_federated_training: mu width mismatch");
  const bool per_weight = init.sigma.size() > 1;
  const int bound_dim = per_weight ? 1 : d_theta;
  const double bound = sigma_lower_bound(options.sched.omega, options.xi, bound_dim);
  if (options.monitor_theory && !options.prior_off)
    require(validate_schedule(etas.sigma, options.sched, options.xi, bound_dim),
            "run_federated_training: schedule violates sigma lower-bound preconditions");

  NetTrainState state = init;
  std::vector<ClientSlot> slots(m);
  for (ClientSlot& slot : slots) {
    slot.mu_copy = state.mu;
    slot.sigma_copy = state.sigma;
    slot.optimizer.kind = options.theta_optimizer;
    slot.optimizer.momentum = options.theta_momentum;
  }

  RoundMessage msg;
  msg.mu = state.mu;
  msg.sigma = state.sigma;

  auto round_of = [tau](int t) { return (t - 1) / tau + 1; };

  auto client_step = [&](int i, int t, const RoundMessage& in, Rng& rng) -> ClientUpdate {
    ClientSlot& slot = slots[i];
    DenseNet& net = state.locals[i];
    const int round = round_of(t);
    const bool round_start = (t - 1) % tau == 0;
    const bool comm = t % tau == 0;
    const bool sigma_allowed =
        !options.prior_off && round > options.sched.first_update_after();

    double eta_theta = etas.theta;
    double eta_mu = etas.mu;
    if (options.decay_round > 0 && round > options.decay_round) {
      eta_theta *= options.decay_factor;
      eta_mu *= options.decay_factor;
    }

    if (round_start) {
      slot.mu_copy = in.mu;
      slot.sigma_copy = in.sigma;
      if (options.sigma_update_first && sigma_allowed) {
        Vector g = prior_grad_sigma(net.flat(), slot.mu_copy, slot.sigma_copy, options.xi);
        if (options.clip_gradients) g = clip_inf(std::move(g), options.clip_sigma);
        slot.sigma_copy -= etas.sigma * g;
        slot.sigma_copy = slot.sigma_copy.cwiseMax(bound);
      }
    }

    // theta step on the full local batch
    double data_loss = 0.0;
    Vector g_theta = objective.grad(i, net, data_loss, rng);
    Vector theta = net.flat();
    if (!options.prior_off) g_theta += prior_grad_theta(theta, slot.mu_copy, slot.sigma_copy);
    const double grad_theta_sq = g_theta.squaredNorm();
    if (options.clip_gradients) g_theta = clip_inf(std::move(g_theta), options.clip_model);
    slot.optimizer.step(theta, g_theta, eta_theta);
    check_finite(theta, "theta", i, t);
    net.set_flat(theta);

    if (options.global_in_local_iters && !options.prior_off) {
      Vector g_mu = prior_grad_mu(theta, slot.mu_copy, slot.sigma_copy);
      if (options.clip_gradients) g_mu = clip_inf(std::move(g_mu), options.clip_model);
      slot.mu_copy -= eta_mu * g_mu;
      check_finite(slot.mu_copy, "mu", i, t);
    }

    ClientUpdate up;
    if (comm) {
      if (!options.prior_off) {
        if (!options.global_in_local_iters) {
          Vector g_mu = prior_grad_mu(theta, in.mu, slot.sigma_copy);
          if (options.clip_gradients) g_mu = clip_inf(std::move(g_mu), options.clip_model);
          slot.mu_copy = in.mu - eta_mu * g_mu;
          check_finite(slot.mu_copy, "mu", i, t);
        }
        if (!options.sigma_update_first && sigma_allowed) {
          Vector g = prior_grad_sigma(theta, in.mu, in.sigma, options.xi);
          if (options.clip_gradients) g = clip_inf(std::move(g), options.clip_sigma);
          slot.sigma_copy = in.sigma - etas.sigma * g;
          slot.sigma_copy = slot.sigma_copy.cwiseMax(bound);
        }
      }
      up.mu_i = slot.mu_copy;
      up.sigma_i = slot.sigma_copy;
      // raw gradients at (theta_t, mu_{t-1}, sigma_{t-1}) for the G_t trace
      if (!options.prior_off) {
        Vector extra(in.mu.size() + in.sigma.size());
        extra.head(in.mu.size()) = prior_grad_mu(theta, in.mu, in.sigma);
        extra.tail(in.sigma.size()) = prior_grad_sigma(theta, in.mu, in.sigma, options.xi);
        up.extra = std::move(extra);
      } else {
        up.extra = Vector::Zero(in.mu.size() + in.sigma.size());
      }
    } else {
      up.mu_i = in.mu;
      up.sigma_i = in.sigma;
    }
    up.metrics["grad_theta_sq"] = grad_theta_sq;
    up.metrics["data_loss"] = data_loss;
    return up;
  };

  auto server_aggregate = [&](const RoundMessage& prev,
                              const std::vector<ClientUpdate>& updates) -> RoundMessage {
    RoundMessage out = aggregate_mean(prev, updates);
    out.sigma = out.sigma.cwiseMax(bound);
    return out;
  };

  const int mu_width = static_cast<int>(init.mu.size());
  const int sigma_width = static_cast<int>(init.sigma.size());

  auto trace_metrics = [&](const Vector& mu_now, const Vector& sigma_now, int t)
      -> std::map<std::string, double> {
    Rng eval_rng(derive_seed(seed, 0x77, static_cast<std::uint64_t>(t)));
    double mean_loss = 0.0;
    std::map<std::string, double> extra_metrics;
    for (int i = 0; i < m; ++i) {
      double l = objective.loss(i, state.locals[i], eval_rng);
      if (!options.prior_off) l += prior_loss_term(state.locals[i].flat(), mu_now, sigma_now,
                                                   options.xi);
      mean_loss += l;
      for (const auto& [key, value] : objective.metrics(i, state.locals[i]))
        extra_metrics[key] += value;
    }
    std::map<std::string, double> out;
    out["mean_loss"] = mean_loss / m;
    for (const auto& [key, value] : extra_metrics) out[key] = value / m;
    out["sigma_min"] = sigma_now.minCoeff();
    out["sigma_mean"] = sigma_now.mean();
    out["sigma_max"] = sigma_now.maxCoeff();
    return out;
  };

  auto server_metrics = [&](int t, const RoundMessage& now,
                            const std::vector<ClientUpdate>& updates) {
    if (options.monitor_theory && now.sigma.minCoeff() < bound - 1e-12)
      throw std::runtime_error("sigma lower bound violated at iteration " + std::to_string(t));
    check_finite(now.mu, "aggregated mu", -1, t);

    std::map<std::string, double> row = trace_metrics(now.mu, now.sigma, t);
    double grad_theta_msq = 0.0;
    for (const ClientUpdate& u : updates) grad_theta_msq += u.metrics.at("grad_theta_sq");
    row["grad_theta_msq"] = grad_theta_msq / m;

    const bool comm = t % tau == 0;
    double grad_mu_sq = 0.0, grad_sigma_sq = 0.0;
    if (comm) {
      Vector g_mu = Vector::Zero(mu_width);
      Vector g_sigma = Vector::Zero(sigma_width);
      for (const ClientUpdate& u : updates) {
        g_mu += u.extra.head(mu_width);
        g_sigma += u.extra.tail(sigma_width);
      }
      grad_mu_sq = (g_mu / m).squaredNorm();
      grad_sigma_sq = (g_sigma / m).squaredNorm();
    }
    row["grad_mu_sq"] = grad_mu_sq;
    row["grad_sigma_sq"] = grad_sigma_sq;
    row["comm"] = comm ? 1.0 : 0.0;
    row["round"] = round_of(t);
    return row;
  };

  RoundSchedule schedule{iterations, tau};
  auto [final_msg, trace] = run_rounds(m, msg, schedule, seed, client_step, server_aggregate,
                                       server_metrics, EngineOptions{options.threads});

  // initial row
  {
    std::map<std::string, double> row0 = trace_metrics(init.mu, init.sigma, 0);
    row0["grad_theta_msq"] = 0.0;
    row0["grad_mu_sq"] = 0.0;
    row0["grad_sigma_sq"] = 0.0;
    row0["comm"] = 0.0;
    row0["round"] = 0.0;
    if (trace.columns().empty()) {
      std::vector<std::string> columns{"iter"};
      for (const auto& [key, _] : row0) columns.push_back(key);
      trace = RoundTrace(std::move(columns));
    }
    std::vector<double> row(trace.columns().size(), 0.0);
    for (const auto& [key, value] : row0) row[trace.column_index(key)] = value;
    trace.prepend(std::move(row));
  }

  state.mu = final_msg.mu;
  state.sigma = final_msg.sigma;
  state.round = final_msg.round / tau;
  return {std::move(state), std::move(trace)};
}

}  // namespace fedhb
