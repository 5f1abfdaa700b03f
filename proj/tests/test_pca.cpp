#include <doctest.h>

#include "fedhb/datagen.hpp"
#include "fedhb/pca.hpp"

#include <cmath>

using namespace fedhb;

namespace {

PcaClientData random_client(Rng& rng, int d, int n, double sigma_eps) {
  Matrix x(d, n);
  const StiefelPoint u = sample_stiefel_uniform(d, std::max(1, d / 3), rng);
  for (int j = 0; j < n; ++j)
    x.col(j) = u.mat * rng.gaussian_vector(u.r()) + sigma_eps * rng.gaussian_vector(d);
  return make_pca_client_data(x, sigma_eps);
}

// dense log-det / inverse evaluation of the likelihood, no Woodbury identities
double dense_loss_oracle(const StiefelPoint& u, const StiefelPoint& v, double sigma,
                         double xi, const PcaClientData& data) {
  const int d = u.d();
  const Matrix w = u.mat * u.mat.transpose() +
                   data.sigma_eps * data.sigma_eps * Matrix::Identity(d, d);
  const double logdet = std::log(w.determinant());
  const double trace = (w.inverse() * data.S).trace();
  const double dist = stiefel_distance(v, u);
  return 0.5 * data.n * (logdet + trace) + (2.0 * xi + dist * dist) / (2.0 * sigma * sigma);
}

}  // namespace

TEST_CASE("loss: matched covariance gives tr(W^-1 S) = d") {
  Rng rng(201);
  const int d = 6, r = 2;
  const StiefelPoint u = sample_stiefel_uniform(d, r, rng);
  PcaClientData data;
  data.n = 10;
  data.sigma_eps = 0.7;
  data.S = u.mat * u.mat.transpose() +
           data.sigma_eps * data.sigma_eps * Matrix::Identity(d, d);  // infinite-n limit
  const double loss = pca_local_loss(u, u, 1.0, 0.0, data);
  const double logdet = r * std::log1p(0.49) + (d - r) * std::log(0.49);
  CHECK(loss == doctest::Approx(0.5 * data.n * (logdet + d)).epsilon(1e-12));
}

TEST_CASE("loss: log-determinant closed form for d=3, r=1, sigma_eps=1") {
  Rng rng(203);
  const StiefelPoint u = sample_stiefel_uniform(3, 1, rng);
  PcaClientData data;
  data.n = 2;
  data.sigma_eps = 1.0;
  data.S = Matrix::Zero(3, 3);  // isolates the log-det term
  const double loss = pca_local_loss(u, u, 1.0, 0.0, data);
  CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));  // (n/2) log|W| with n=2
}

TEST_CASE("loss: closed form equals dense linear-algebra oracle") {
  Rng rng(207);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 4 + rng.uniform_int(0, 26);
    const int r = 1 + rng.uniform_int(0, std::min(4, d - 1));
    const double sigma_eps = 0.3 + rng.uniform();
    const PcaClientData data = random_client(rng, d, 3 * d, sigma_eps);
    const StiefelPoint u = sample_stiefel_uniform(d, r, rng);
    const StiefelPoint v = sample_stiefel_uniform(d, r, rng);
    const double sigma = 0.2 + rng.uniform();
    const double xi = rng.uniform();
    CHECK(pca_local_loss(u, v, sigma, xi, data) ==
          doctest::Approx(dense_loss_oracle(u, v, sigma, xi, data)).epsilon(1e-8));
  }
}

TEST_CASE("gradients: prior contribution vanishes when U = V") {
  Rng rng(211);
  const StiefelPoint u = sample_stiefel_uniform(5, 2, rng);
  const PcaClientData data = random_client(rng, 5, 40, 0.8);
  const PcaGradients g = pca_gradients(u, u, 0.5, 1.0, data);
  // P_T_U(U) = 0, so grad_V = 0 and grad_sigma sees distance 0
  CHECK(g.v.norm() < 1e-12);
  CHECK(g.sigma == doctest::Approx(sigma_gradient(0.0, 0.5, 1.0, 10)));
  CHECK(g.u.skew_error() < 1e-10);
}

TEST_CASE("gradients: sigma derivative vanishes at the stationary scale") {
  Rng rng(213);
  const StiefelPoint u = sample_stiefel_uniform(4, 2, rng);
  const PcaClientData data = random_client(rng, 4, 10, 1.0);
  const double xi = 0.7;
  const double sigma = std::sqrt(2.0 * xi / 8.0);
  CHECK(pca_gradients(u, u, sigma, xi, data).sigma == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("gradients match finite differences along random tangent directions") {
  Rng rng(217);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 4 + rng.uniform_int(0, 6);
    const int r = 1 + rng.uniform_int(0, std::min(3, d - 1));
    const double sigma_eps = 0.4 + rng.uniform();
    const PcaClientData data = random_client(rng, d, 20 + rng.uniform_int(0, 30), sigma_eps);
    const StiefelPoint u = sample_stiefel_uniform(d, r, rng);
    const StiefelPoint v = sample_stiefel_uniform(d, r, rng);
    const double sigma = 0.3 + rng.uniform();
    const double xi = 0.1 + rng.uniform();
    const int d_theta = d * r;

    const PcaGradients g = pca_gradients(u, v, sigma, xi, data);
    const double h = 1e-5;

    for (int dir = 0; dir < 5; ++dir) {
      Matrix xi_u = tangent_project(u, rng.gaussian_matrix(d, r)).mat;
      xi_u /= xi_u.norm();
      const double fd_u = (pca_local_loss(polar_retract(u, h * xi_u), v, sigma, xi, data) -
                           pca_local_loss(polar_retract(u, -h * xi_u), v, sigma, xi, data)) /
                          (2.0 * h);
      const double ip_u = (g.u.mat.array() * xi_u.array()).sum();
      CHECK(std::abs(fd_u - ip_u) <= 1e-5 * std::max(1.0, std::abs(ip_u)));

      Matrix xi_v = tangent_project(v, rng.gaussian_matrix(d, r)).mat;
      xi_v /= xi_v.norm();
      const double fd_v = (pca_local_loss(u, polar_retract(v, h * xi_v), sigma, xi, data) -
                           pca_local_loss(u, polar_retract(v, -h * xi_v), sigma, xi, data)) /
                          (2.0 * h);
      const double ip_v = (g.v.mat.array() * xi_v.array()).sum();
      CHECK(std::abs(fd_v - ip_v) <= 1e-5 * std::max(1.0, std::abs(ip_v)));
    }

    // per-client sigma derivative charges the shared log term once
    const double fd_sigma =
        (pca_local_loss(u, v, sigma + h, xi, data) + d_theta * std::log(sigma + h) -
         pca_local_loss(u, v, sigma - h, xi, data) - d_theta * std::log(sigma - h)) /
        (2.0 * h);
    CHECK(g.sigma == doctest::Approx(fd_sigma).epsilon(1e-5));
  }
}

TEST_CASE("run: zero iterations returns the initial state") {
  Rng rng(219);
  std::vector<PcaClientData> data{random_client(rng, 5, 20, 0.8)};
  PcaState init;
  init.locals.push_back(sample_stiefel_uniform(5, 2, rng));
  init.global_v = sample_stiefel_uniform(5, 2, rng);
  init.sigma = 0.7;
  auto [state, trace] = run_personalized_pca(init, data, PcaEtas{0.1, 0.1, 0.01}, 0, 1, {});
  CHECK((state.global_v.mat - init.global_v.mat).norm() == 0.0);
  CHECK((state.locals[0].mat - init.locals[0].mat).norm() == 0.0);
  CHECK(state.sigma == init.sigma);
  CHECK(trace.num_rows() == 1);  // initial row only
}

TEST_CASE("run: single client with prior off is descent on the likelihood") {
  Rng rng(223);
  std::vector<PcaClientData> data{random_client(rng, 8, 60, 0.7)};
  PcaState init;
  init.locals.push_back(sample_stiefel_uniform(8, 2, rng));
  init.global_v = init.locals[0];
  init.sigma = 1e4;  // prior weight ~ 0

  PcaRunOptions options;
  options.xi = 1e-8;
  options.sched.omega = 0.5;
  options.sched.init = init.sigma;
  PcaEtas etas{2e-3 / data[0].n, 0.1, 0.0};
  auto [state, trace] = run_personalized_pca(init, data, etas, 60, 5, options);
  for (int t = 1; t < trace.num_rows(); ++t)
    CHECK(trace.at(t, "loss") <= trace.at(t - 1, "loss") + 1e-9);
  CHECK(trace.at(trace.num_rows() - 1, "loss") < trace.at(0, "loss"));
}

TEST_CASE("run: iterates stay on the manifold") {
  Rng rng(227);
  PcaGenConfig cfg;
  cfg.d = 10;
  cfg.r = 3;
  cfg.m = 4;
  cfg.n = 30;
  cfg.sigma_star = 0.3;
  cfg.sigma_eps = 0.6;
  const PcaDataset ds = gen_pca_data(cfg);
  std::vector<PcaClientData> data;
  for (const Matrix& x : ds.samples) data.push_back(make_pca_client_data(x, cfg.sigma_eps));

  PcaState state;
  for (int i = 0; i < cfg.m; ++i) state.locals.push_back(sample_stiefel_uniform(10, 3, rng));
  state.global_v = sample_stiefel_uniform(10, 3, rng);
  state.sigma = 0.5;

  PcaRunOptions options;
  options.xi = 1e-4;
  options.sched.init = 0.5;
  const PcaEtas etas{1e-3, 1e-2, 1e-4};
  for (int rep = 0; rep < 20; ++rep) {
    state = run_personalized_pca(state, data, etas, 1, 1000 + rep, options).first;
    CHECK(state.global_v.orthonormality_error() < 1e-8);
    for (const StiefelPoint& u : state.locals) CHECK(u.orthonormality_error() < 1e-8);
  }
}

TEST_CASE("theory constants: closed-form spot checks") {
  Rng rng(229);
  std::vector<PcaClientData> data{random_client(rng, 4, 10, 1.0)};

  // dimension symbol 4, xi = 1, omega = 0.5 -> L_V = 12*4/(1*0.25) = 192
  PcaTheoryConstants c = pca_theory_constants(data, 4, 1, 0.5, 1.0, 1.0, 1.0);
  CHECK(c.L_V == doctest::Approx(192.0));
  CHECK(c.G_V == doctest::Approx(48.0));
  CHECK(c.G1 == doctest::Approx(2.0 * c.G_U * 2.0));

  // omega -> 1 limit: L_V -> 12 d / xi
  PcaTheoryConstants limit = pca_theory_constants(data, 4, 1, 1.0 - 1e-12, 1.0, 1.0, 1.0);
  CHECK(limit.L_V == doctest::Approx(12.0 * 4.0).epsilon(1e-6));

  // theorem step sizes respect the schedule cap
  const PcaEtas etas = pca_theorem_step_sizes(c);
  CHECK(etas.u <= 1.0);
  CHECK(etas.u == doctest::Approx(std::min(1.0, 1.0 / (3.0 * c.C_eta1))));
  CHECK(etas.sigma <= 1.0 / (6.0 * c.L_sigma) + 1e-18);
}

TEST_CASE("theorem step sizes give sufficient decrease and the averaged bound") {
  Rng rng(233);
  for (int instance = 0; instance < 10; ++instance) {
    const int d = 4 + rng.uniform_int(0, 3);
    const int r = 1 + rng.uniform_int(0, 1);
    const int m = 2 + rng.uniform_int(0, 2);
    const double sigma_eps = 0.6 + 0.5 * rng.uniform();
    const double xi = 0.5 + rng.uniform();
    const double omega = 0.5;
    const int d_theta = d * r;

    std::vector<PcaClientData> data;
    for (int i = 0; i < m; ++i) data.push_back(random_client(rng, d, 20, sigma_eps));

    const double c_retract = estimate_retraction_constant(d, r, rng);
    const PcaTheoryConstants consts =
        pca_theory_constants(data, d, r, omega, xi, c_retract, c_retract);
    const PcaEtas etas = pca_theorem_step_sizes(consts);

    PcaRunOptions options;
    options.xi = xi;
    options.sched.omega = omega;
    options.sched.init = std::max(1.0, sigma_lower_bound(omega, xi, d_theta));
    options.monitor_theory = true;
    REQUIRE(validate_schedule(etas.sigma, options.sched, xi, d_theta));

    PcaState state;
    for (int i = 0; i < m; ++i) state.locals.push_back(sample_stiefel_uniform(d, r, rng));
    state.global_v = sample_stiefel_uniform(d, r, rng);
    state.sigma = options.sched.init;

    auto [final_state, trace] = run_personalized_pca(state, data, etas, 50, instance, options);
    CHECK(check_sufficient_decrease(trace, etas));
    CHECK(check_convergence_bound(trace, etas));
    const double bound = sigma_lower_bound(omega, xi, d_theta);
    for (int t = 0; t < trace.num_rows(); ++t)
      CHECK(trace.at(t, "sigma") >= bound - 1e-12);
  }
}
