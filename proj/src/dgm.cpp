#include "fedhb/dgm.hpp"

#include <cmath>
#include <thread>

namespace fedhb {

CorruptionDraw sample_corruption(int n, int gamma, Rng& rng) {
  require(n >= 1 && gamma >= 1, "sample_corruption: need n, gamma >= 1");
  CorruptionDraw draw;
  draw.gamma = gamma;
  draw.raw.resize(n);
  for (int j = 0; j < n; ++j) draw.raw[j] = rng.uniform_int(1, gamma);
  return draw;
}

namespace {

Vector conditioned_input(const Vector& x_corrupt, double alpha) {
  Vector in(x_corrupt.size() + 1);
  in.head(x_corrupt.size()) = x_corrupt;
  in(x_corrupt.size()) = alpha;
  return in;
}

}  // namespace

double dgm_denoise_term(const DenseNet& net, const Matrix& X, const CorruptionDraw& draw,
                        const Matrix& noise) {
  require(draw.size() == X.cols() && noise.cols() == X.cols() && noise.rows() == X.rows(),
          "dgm_denoise_term: shape mismatch");
  double acc = 0.0;
  for (int j = 0; j < X.cols(); ++j) {
    const double a = draw.alpha(j);
    const Vector corrupted = X.col(j) * (1.0 - a) + noise.col(j) * a;
    acc += (net.forward(conditioned_input(corrupted, a)) - X.col(j)).squaredNorm();
  }
  return acc;
}

double dgm_loss(const DenseNet& net, const Vector& mu, const Vector& sigma, double xi,
                const Matrix& X, const CorruptionDraw& draw, Rng& rng) {
  require(sigma.minCoeff() > 0.0, "dgm_loss: sigma must be positive");
  const Matrix noise = rng.gaussian_matrix(static_cast<int>(X.rows()),
                                           static_cast<int>(X.cols()));
  return dgm_denoise_term(net, X, draw, noise) + prior_loss_term(net.flat(), mu, sigma, xi);
}

double denoise_validation_loss(const DenseNet& net, const Matrix& X_eval, int gamma,
                               std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x7A));
  const CorruptionDraw draw = sample_corruption(static_cast<int>(X_eval.cols()), gamma, rng);
  const Matrix noise = rng.gaussian_matrix(static_cast<int>(X_eval.rows()),
                                           static_cast<int>(X_eval.cols()));
  return dgm_denoise_term(net, X_eval, draw, noise) / static_cast<double>(X_eval.cols());
}

Vector DgmObjective::grad(int client, const DenseNet& net, double& loss, Rng& rng) const {
  const Matrix& x = (*data_)[client].X;
  const CorruptionDraw draw = sample_corruption(static_cast<int>(x.cols()), gamma_, rng);
  Vector g = Vector::Zero(net.param_count());
  loss = 0.0;
  DenseNet::Cache cache;
  for (int j = 0; j < x.cols(); ++j) {
    const double a = draw.alpha(j);
    const Vector z = rng.gaussian_vector(static_cast<int>(x.rows()));
    const Vector corrupted = x.col(j) * (1.0 - a) + z * a;
    const Vector out = net.forward(conditioned_input(corrupted, a), cache);
    const Vector residual = out - x.col(j);
    loss += residual.squaredNorm();
    g += net.backward(cache, 2.0 * residual);
  }
  return g;
}

double DgmObjective::loss(int client, const DenseNet& net, Rng& rng) const {
  const Matrix& x = (*data_)[client].X;
  const CorruptionDraw draw = sample_corruption(static_cast<int>(x.cols()), gamma_, rng);
  const Matrix noise =
      rng.gaussian_matrix(static_cast<int>(x.rows()), static_cast<int>(x.cols()));
  return dgm_denoise_term(net, x, draw, noise);
}

std::map<std::string, double> DgmObjective::metrics(int client, const DenseNet& net) const {
  const DgmClientData& cd = (*data_)[client];
  if (cd.X_eval.size() == 0) return {};
  return {{"val_denoise",
           denoise_validation_loss(net, cd.X_eval, gamma_, 0x5EED + client)}};
}

std::pair<NetTrainState, RoundTrace> run_personalized_dgm(
    const NetTrainState& init, const std::vector<DgmClientData>& data, const NetEtas& etas,
    int iterations, int tau, int gamma, std::uint64_t seed, const NetTrainOptions& options) {
  require(!data.empty() && init.locals.size() == data.size(),
          "run_personalized_dgm: client count mismatch");
  require(init.locals.front().input_dim() == data.front().X.rows() + 1,
          "run_personalized_dgm: denoiser input must be sample dim + 1 (alpha channel)");
  DgmObjective objective(data, gamma);
  return run_federated_training(init, objective, etas, iterations, tau, seed, options);
}

std::vector<int> dgm_denoiser_widths(int d, int hidden) {
  return {d + 1, hidden, hidden, d};
}

// ---------------------------------------------------------------------------

double score_alpha(double sigma0_sq, double t_horizon) {
  require(sigma0_sq > 0.0, "score_alpha: sigma0_sq must be positive");
  if (std::isinf(t_horizon)) return 1.0 / sigma0_sq;
  return 1.0 / sigma0_sq - 1.0 / (sigma0_sq + t_horizon);
}

double gaussian_reverse_kl(const Vector& theta, const Vector& theta_hat, double sigma0_sq,
                           double t_horizon) {
  require(sigma0_sq > 0.0, "gaussian_reverse_kl: sigma0_sq must be positive");
  const double bias = std::isinf(t_horizon) ? 0.0 : sigma0_sq / (sigma0_sq + t_horizon);
  return (theta - theta_hat + bias * theta_hat).squaredNorm();
}

GaussianFit gaussian_personalized_fit(const std::vector<Vector>& xbars, double xi, int d,
                                      int n, double alpha_score) {
  require(!xbars.empty(), "gaussian_personalized_fit: no clients");
  require(xi >= 0.0 && d >= 1 && n >= 1 && alpha_score > 0.0,
          "gaussian_personalized_fit: bad parameters");
  const int m = static_cast<int>(xbars.size());

  GaussianFit fit;
  fit.alpha_score = alpha_score;
  fit.mu_hat = Vector::Zero(d);
  for (const Vector& xb : xbars) fit.mu_hat += xb;
  fit.mu_hat /= static_cast<double>(m);

  double s_sq = 0.0;
  for (const Vector& xb : xbars) s_sq += (fit.mu_hat - xb).squaredNorm();
  s_sq /= static_cast<double>(m) * d;
  fit.s_sq = s_sq;

  const double na = static_cast<double>(n) * alpha_score;
  const double lo0 = 2.0 * xi / d;
  auto rhs = [&](double v) {
    const double w = na * v / (na * v + 1.0);
    return lo0 + s_sq * w * w;
  };
  auto residual = [&](double v) { return v - rhs(v); };

  // root bracketed in [2 xi / d, 2 xi / d + s^2]; residual(lo) <= 0 <= residual(hi)
  double lo = lo0, hi = lo0 + s_sq;
  if (s_sq == 0.0 || residual(hi) <= 0.0) {
    fit.sigma_hat_sq = hi;
  } else {
    for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      (residual(mid) <= 0.0 ? lo : hi) = mid;
    }
    double v = 0.5 * (lo + hi);
    // Newton polish drives the fixed-point residual to machine level
    for (int it = 0; it < 4; ++it) {
      const double w = na * v / (na * v + 1.0);
      const double dw = na / ((na * v + 1.0) * (na * v + 1.0));
      const double deriv = 1.0 - 2.0 * s_sq * w * dw;
      if (std::abs(deriv) < 1e-14) break;
      const double next = v - residual(v) / deriv;
      if (next >= lo0 && next <= lo0 + s_sq) v = next;
    }
    fit.sigma_hat_sq = v;
  }

  const double weight = na * fit.sigma_hat_sq / (na * fit.sigma_hat_sq + 1.0);
  fit.theta_hats.reserve(m);
  for (const Vector& xb : xbars)
    fit.theta_hats.push_back(weight * xb + (1.0 - weight) * fit.mu_hat);
  return fit;
}

Improvement collaboration_improvement(double sigma_hat_sq, double sigma_star_sq,
                                      double sigma0_sq, int n) {
  require(sigma_hat_sq >= 0.0 && sigma_star_sq >= 0.0 && sigma0_sq >= 0.0 && n >= 1,
          "collaboration_improvement: bad parameters");
  Improvement result;
  const double noise = sigma0_sq / n;
  const double denom = sigma_hat_sq + noise;
  result.factor =
      ((2.0 * sigma_hat_sq + noise - sigma_star_sq) / denom) * (noise / denom) * noise;
  result.improves = sigma_hat_sq > 0.5 * sigma_star_sq - 0.5 * noise;
  return result;
}

double xi_guarantee(int d, double sigma0_sq, int n) {
  require(d >= 1 && n >= 1 && sigma0_sq >= 0.0, "xi_guarantee: bad parameters");
  return 3.0 * d * sigma0_sq / (2.0 * n);
}

KlEstimate monte_carlo_kl(const GaussianPopulation& pop, double xi, int m_sim,
                          std::uint64_t seed, int threads) {
  require(m_sim >= 2, "monte_carlo_kl: need at least two simulated clients");
  const int d = static_cast<int>(pop.mu_star.size());
  const double mean_noise_std = std::sqrt(pop.sigma0_sq / pop.n);
  const double pop_std = std::sqrt(pop.sigma_star_sq);
  const double alpha = score_alpha(pop.sigma0_sq, pop.t_horizon);

  // pass 1: simulate (theta_i, x_bar_i) with counter-based per-client seeds
  std::vector<Vector> thetas(m_sim), xbars(m_sim);
  const int workers = std::max(1, threads);
  auto simulate = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      Rng rng(derive_seed(seed, 0xC1, static_cast<std::uint64_t>(i)));
      thetas[i] = pop.mu_star + pop_std * rng.gaussian_vector(d);
      xbars[i] = thetas[i] + mean_noise_std * rng.gaussian_vector(d);
    }
  };
  if (workers == 1) {
    simulate(0, m_sim);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (m_sim + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int begin = w * chunk;
      const int end = std::min(m_sim, begin + chunk);
      if (begin < end) pool.emplace_back(simulate, begin, end);
    }
    for (auto& t : pool) t.join();
  }

  const GaussianFit fit = gaussian_personalized_fit(xbars, xi, d, pop.n, alpha);

  // pass 2: per-coordinate KL averages, reduced in index order
  double sum_c = 0.0, sum_sq_c = 0.0, sum_l = 0.0, sum_sq_l = 0.0;
  for (int i = 0; i < m_sim; ++i) {
    const double kl_c =
        gaussian_reverse_kl(thetas[i], fit.theta_hats[i], pop.sigma0_sq, pop.t_horizon) / d;
    const double kl_l =
        gaussian_reverse_kl(thetas[i], xbars[i], pop.sigma0_sq, pop.t_horizon) / d;
    sum_c += kl_c;
    sum_sq_c += kl_c * kl_c;
    sum_l += kl_l;
    sum_sq_l += kl_l * kl_l;
  }
  KlEstimate est;
  est.avg_kl_collab = sum_c / m_sim;
  est.avg_kl_local = sum_l / m_sim;
  est.se_collab =
      std::sqrt(std::max(0.0, sum_sq_c / m_sim - est.avg_kl_collab * est.avg_kl_collab) /
                m_sim);
  est.se_local = std::sqrt(
      std::max(0.0, sum_sq_l / m_sim - est.avg_kl_local * est.avg_kl_local) / m_sim);
  return est;
}

}  // namespace fedhb
