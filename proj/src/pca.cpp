#include "fedhb/pca.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace fedhb {

PcaClientData make_pca_client_data(const Matrix& samples, double sigma_eps) {
  require(samples.cols() >= 1, "make_pca_client_data: no samples");
  require(sigma_eps > 0.0, "make_pca_client_data: sigma_eps must be positive");
  PcaClientData d;
  d.n = static_cast<int>(samples.cols());
  d.S = samples * samples.transpose() / static_cast<double>(d.n);
  d.sigma_eps = sigma_eps;
  return d;
}

namespace {

double log_det_w(int d, int r, double sigma_eps) {
  const double s2 = sigma_eps * sigma_eps;
  return r * std::log1p(s2) + (d - r) * std::log(s2);
}

// W^{-1} x = s^{-2} (x - U (U^T x) / (1 + s^2))
Matrix w_inverse_apply(const StiefelPoint& u, const Matrix& x, double sigma_eps) {
  const double s2 = sigma_eps * sigma_eps;
  return (x - u.mat * (u.mat.transpose() * x) / (1.0 + s2)) / s2;
}

}  // namespace

double pca_local_loss(const StiefelPoint& u, const StiefelPoint& v, double sigma, double xi,
                      const PcaClientData& data) {
  require(sigma > 0.0, "pca_local_loss: sigma must be positive");
  const int d = u.d();
  const int r = u.r();
  const double s2 = data.sigma_eps * data.sigma_eps;
  const double tr_winv_s =
      (data.S.trace() - (u.mat.transpose() * data.S * u.mat).trace() / (1.0 + s2)) / s2;
  const double likelihood = 0.5 * data.n * (log_det_w(d, r, data.sigma_eps) + tr_winv_s);
  const double dist = stiefel_distance(v, u);
  return likelihood + (2.0 * xi + dist * dist) / (2.0 * sigma * sigma);
}

double pca_aggregate_loss(const std::vector<StiefelPoint>& us, const StiefelPoint& v,
                          double sigma, double xi, const std::vector<PcaClientData>& data) {
  require(us.size() == data.size() && !us.empty(), "pca_aggregate_loss: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < us.size(); ++i)
    acc += pca_local_loss(us[i], v, sigma, xi, data[i]);
  const int d_theta = v.d() * v.r();
  return acc / static_cast<double>(us.size()) + d_theta * std::log(sigma);
}

Matrix pca_likelihood_grad_u(const StiefelPoint& u, const PcaClientData& data) {
  const double s2 = data.sigma_eps * data.sigma_eps;
  const Matrix winv_u = u.mat / (1.0 + s2);
  const Matrix winv_s_winv_u = w_inverse_apply(u, data.S * winv_u, data.sigma_eps);
  // d/dU (n/2)(log|W| + tr(W^-1 S)) = -n (W^-1 S W^-1 U - W^-1 U)
  return -static_cast<double>(data.n) * (winv_s_winv_u - winv_u);
}

PcaGradients pca_gradients(const StiefelPoint& u, const StiefelPoint& v, double sigma,
                           double xi, const PcaClientData& data) {
  require(sigma > 0.0, "pca_gradients: sigma must be positive");
  const double sigma_sq = sigma * sigma;
  const TangentVector proj_u_at_v = tangent_project(v, u.mat);

  const Matrix grad_u_ambient = pca_likelihood_grad_u(u, data) + proj_u_at_v.mat / sigma_sq;
  const Matrix sym = u.mat.transpose() * v.mat + v.mat.transpose() * u.mat;
  const Matrix grad_v_ambient = -proj_u_at_v.mat * sym / (2.0 * sigma_sq);

  PcaGradients g;
  g.u = tangent_project(u, grad_u_ambient);
  g.v = tangent_project(v, grad_v_ambient);
  const double dist = proj_u_at_v.norm();
  g.sigma = sigma_gradient(dist * dist, sigma, xi, u.d() * u.r());
  return g;
}

namespace {

void check_finite(const Matrix& m, const std::string& what, int iter) {
  if (!m.allFinite())
    throw std::runtime_error("non-finite " + what + " at iteration " + std::to_string(iter));
}

}  // namespace

std::pair<PcaState, RoundTrace> run_personalized_pca(const PcaState& init,
                                                     const std::vector<PcaClientData>& data,
                                                     const PcaEtas& etas, int iterations,
                                                     std::uint64_t seed,
                                                     const PcaRunOptions& options) {
  const int m = static_cast<int>(data.size());
  require(m >= 1 && init.locals.size() == data.size(), "run_personalized_pca: size mismatch");
  const int d = init.global_v.d();
  const int r = init.global_v.r();
  const int d_theta = d * r;
  const double bound = sigma_lower_bound(options.sched.omega, options.xi, d_theta);
  if (options.monitor_theory)
    require(validate_schedule(etas.sigma, options.sched, options.xi, d_theta),
            "run_personalized_pca: schedule violates the sigma lower-bound preconditions");

  PcaState state = init;
  const int rows = static_cast<int>(init.global_v.mat.rows());
  const int cols = static_cast<int>(init.global_v.mat.cols());

  RoundMessage msg;
  msg.mu = Eigen::Map<const Vector>(init.global_v.mat.data(), d_theta);
  msg.sigma = Vector::Constant(1, init.sigma);

  auto client_step = [&](int i, int t, const RoundMessage& in, Rng&) -> ClientUpdate {
    const StiefelPoint v_prev{
        Eigen::Map<const Matrix>(in.mu.data(), rows, cols)};
    const double sigma_prev = in.sigma(0);
    StiefelPoint& u_i = state.locals[i];

    // sigma step at (U_{t-1}, V_{t-1}); per-client result is averaged later.
    const double dist_prev = stiefel_distance(v_prev, u_i);
    const double g_sigma =
        sigma_gradient(dist_prev * dist_prev, sigma_prev, options.xi, d_theta);
    const double sigma_i = sigma_prev - etas.sigma * g_sigma;

    PcaGradients g = pca_gradients(u_i, v_prev, sigma_prev, options.xi, data[i]);
    const double grad_u_sq = g.u.mat.squaredNorm();
    u_i = polar_retract(u_i, -etas.u * g.u.mat);
    check_finite(u_i.mat, "U update (client " + std::to_string(i) + ")", t);

    // V gradient at the already-updated U_i (Algorithm line ordering).
    const TangentVector g_v =
        pca_gradients(u_i, v_prev, sigma_prev, options.xi, data[i]).v;
    const Matrix v_i = v_prev.mat - etas.v * g_v.mat;
    check_finite(v_i, "V update (client " + std::to_string(i) + ")", t);

    ClientUpdate up;
    up.mu_i = Eigen::Map<const Vector>(v_i.data(), d_theta);
    up.sigma_i = Vector::Constant(1, sigma_i);
    up.extra = Eigen::Map<const Vector>(g_v.mat.data(), d_theta);
    up.metrics["grad_u_sq"] = grad_u_sq;
    up.metrics["grad_sigma"] = g_sigma;
    return up;
  };

  auto server_aggregate = [&](const RoundMessage& prev,
                              const std::vector<ClientUpdate>& updates) -> RoundMessage {
    RoundMessage mean = aggregate_mean(prev, updates);
    const StiefelPoint v_prev{Eigen::Map<const Matrix>(prev.mu.data(), rows, cols)};
    const Matrix v_mean = Eigen::Map<const Matrix>(mean.mu.data(), rows, cols);
    const StiefelPoint v_next = polar_retract(v_prev, v_mean - v_prev.mat);
    RoundMessage out;
    out.mu = Eigen::Map<const Vector>(v_next.mat.data(), d_theta);
    out.sigma = Vector::Constant(1, clamp_sigma(mean.sigma(0), bound));
    return out;
  };

  auto server_metrics = [&](int t, const RoundMessage& now,
                            const std::vector<ClientUpdate>& updates) {
    check_finite(now.mu, "aggregated V", t);
    if (!std::isfinite(now.sigma(0)))
      throw std::runtime_error("non-finite sigma at iteration " + std::to_string(t));

    double grad_u_msq = 0.0, g_sigma_mean = 0.0;
    Vector g_v_mean = Vector::Zero(d_theta);
    for (const ClientUpdate& u : updates) {
      grad_u_msq += u.metrics.at("grad_u_sq");
      g_sigma_mean += u.metrics.at("grad_sigma");
      g_v_mean += u.extra;
    }
    grad_u_msq /= m;
    g_sigma_mean /= m;
    g_v_mean /= m;

    const StiefelPoint v_now{Eigen::Map<const Matrix>(now.mu.data(), rows, cols)};
    const double sigma_now = now.sigma(0);
    const double loss =
        pca_aggregate_loss(state.locals, v_now, sigma_now, options.xi, data);
    if (options.monitor_theory && sigma_now < bound - 1e-12)
      throw std::runtime_error("sigma lower bound violated at iteration " +
                               std::to_string(t));
    return std::map<std::string, double>{{"loss", loss},
                                         {"grad_U_msq", grad_u_msq},
                                         {"grad_V_sq", g_v_mean.squaredNorm()},
                                         {"grad_sigma_sq", g_sigma_mean * g_sigma_mean},
                                         {"sigma", sigma_now}};
  };

  RoundSchedule sched{iterations, 1};
  auto [final_msg, trace] = run_rounds(m, msg, sched, seed, client_step, server_aggregate,
                                       server_metrics, EngineOptions{options.threads});

  const double initial_loss =
      pca_aggregate_loss(init.locals, init.global_v, init.sigma, options.xi, data);
  if (trace.columns().empty())
    trace = RoundTrace({"iter", "grad_U_msq", "grad_V_sq", "grad_sigma_sq", "loss", "sigma"});
  std::vector<double> row0(trace.columns().size(), 0.0);
  row0[trace.column_index("loss")] = initial_loss;
  row0[trace.column_index("sigma")] = init.sigma;
  trace.prepend(std::move(row0));

  if (iterations > 0) {
    state.global_v =
        StiefelPoint{Eigen::Map<const Matrix>(final_msg.mu.data(), rows, cols)};
    state.sigma = final_msg.sigma(0);
  }
  return {std::move(state), std::move(trace)};
}

PcaTheoryConstants pca_theory_constants(const std::vector<PcaClientData>& data, int d, int r,
                                        double omega, double xi, double c1, double c2) {
  require(!data.empty(), "pca_theory_constants: no data");
  require(omega > 0.0 && omega < 1.0 && xi > 0.0, "pca_theory_constants: bad omega/xi");
  PcaTheoryConstants c;
  c.C1 = c1;
  c.C2 = c2;
  double n_max = 0.0;
  double s_eps_min = data.front().sigma_eps;
  for (const PcaClientData& cd : data) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cd.S, Eigen::EigenvaluesOnly);
    c.G_max_op = std::max(c.G_max_op, eig.eigenvalues().cwiseAbs().maxCoeff());
    c.G_max_F = std::max(c.G_max_F, cd.S.norm());
    n_max = std::max(n_max, static_cast<double>(cd.n));
    s_eps_min = std::min(s_eps_min, cd.sigma_eps);
  }

  const double dt = static_cast<double>(d) * r;  // dimension symbol = d_theta
  const double w2 = omega * omega;
  const double w4 = w2 * w2;
  const double se2 = s_eps_min * s_eps_min;
  const double se4 = se2 * se2;

  c.L_sigma = dt * dt / (2.0 * xi * w2) + 3.0 * dt * dt / (2.0 * xi * w4) +
              3.0 * dt * dt / (xi * xi * w4);
  c.L_U = 0.5 * n_max *
              (1.0 / se2 + c.G_max_op / se4 + (1.0 + 2.0 * c.G_max_op / se2) * 2.0 / se4) +
          dt / (xi * w2);
  c.G_U = 0.5 * n_max * (c.G_max_op / se4 + 1.0 / se2) + dt / (xi * w2);
  c.L_V = 12.0 * dt / (xi * w2);
  c.G_V = 3.0 * dt / (xi * w2);
  c.L_U_sigma = std::sqrt(2.0 * dt * dt * dt) / (omega * omega * omega * std::sqrt(xi * xi * xi));
  c.L_V_sigma =
      2.0 * std::sqrt(dt * dt * dt) / (omega * omega * omega * std::sqrt(2.0 * xi * xi * xi));
  c.G1 = 2.0 * c.G_U * std::sqrt(dt);
  c.G2 = 2.0 * c.G_V * std::sqrt(dt);
  c.C_eta1 = c1 * c.G1 + (c.L_U + c.G_U) * (c1 * c1 * c.G1 * c.G1 + 1.0) / 2.0;
  c.C_eta2 = c2 * c.G2 + (c.L_V + c.G_V) * (c2 * c2 * c.G2 * c.G2 + 1.0) / 2.0;
  c.eta3_schedule_cap = (1.0 - omega) * 2.0 * xi / (dt * dt);
  return c;
}

PcaEtas pca_theorem_step_sizes(const PcaTheoryConstants& c) {
  PcaEtas etas;
  etas.u = std::min(1.0 / (3.0 * c.C_eta1), 1.0);
  etas.v = std::min(1.0 / (3.0 * c.C_eta2), 1.0);
  etas.sigma = std::min(etas.u / (3.0 * c.L_U_sigma * c.L_U_sigma),
                        std::min(etas.v / (3.0 * c.L_V_sigma * c.L_V_sigma),
                                 1.0 / (6.0 * c.L_sigma)));
  // the sigma lower-bound lemma additionally caps eta_3
  if (c.eta3_schedule_cap > 0.0) etas.sigma = std::min(etas.sigma, c.eta3_schedule_cap);
  return etas;
}

bool check_sufficient_decrease(const RoundTrace& trace, const PcaEtas& etas, double tol) {
  const double factor = etas.min() / 3.0;
  for (int t = 1; t < trace.num_rows(); ++t) {
    const double decrease = trace.at(t, "loss") - trace.at(t - 1, "loss");
    const double gt = trace.at(t, "grad_U_msq") + trace.at(t, "grad_V_sq") +
                      trace.at(t, "grad_sigma_sq");
    if (decrease > -factor * gt + tol) return false;
  }
  return true;
}

bool check_convergence_bound(const RoundTrace& trace, const PcaEtas& etas) {
  const int T = trace.num_rows() - 1;
  if (T <= 0) return true;
  double sum_gt = 0.0;
  for (int t = 1; t <= T; ++t)
    sum_gt += trace.at(t, "grad_U_msq") + trace.at(t, "grad_V_sq") +
              trace.at(t, "grad_sigma_sq");
  const double delta = trace.at(0, "loss") - trace.at(T, "loss");
  return sum_gt / T <= 3.0 * delta / (T * etas.min()) + 1e-12;
}

double estimate_retraction_constant(int d, int r, Rng& rng) {
  double c_max = 0.0;
  for (int trial = 0; trial < 24; ++trial) {
    const StiefelPoint u = sample_stiefel_uniform(d, r, rng);
    const Matrix ambient = rng.gaussian_matrix(d, r);
    Matrix xi = tangent_project(u, ambient).mat;
    xi *= (0.01 + 0.99 * rng.uniform()) / xi.norm();
    const StiefelPoint retracted = polar_retract(u, xi);
    const double err = (retracted.mat - (u.mat + xi)).norm();
    c_max = std::max(c_max, err / xi.squaredNorm());
  }
  // inflate: a larger constant only shrinks the certified step sizes
  return 1.5 * std::max(c_max, 0.5);
}

}  // namespace fedhb
