#pragma once

#include "fedhb/fed.hpp"
#include "fedhb/manifold.hpp"
#include "fedhb/prior.hpp"

#include <vector>

namespace fedhb {

/// Per-client sufficient statistics for the probabilistic PCA likelihood
/// N(0, U U^T + sigma_eps^2 I).
struct PcaClientData {
  Matrix S;          // d×d sample covariance X X^T / n
  int n = 0;         // sample count behind S
  double sigma_eps = 1.0;
};

/// Builds the covariance statistic from a d×n sample matrix.
PcaClientData make_pca_client_data(const Matrix& samples, double sigma_eps);

struct PcaState {
  std::vector<StiefelPoint> locals;  // U_i
  StiefelPoint global_v;             // V
  double sigma = 1.0;
};

/// Per-client term: (n/2)(log|W| + tr(W^{-1} S)) + (2 xi + d^2(V,U)) / (2 sigma^2),
/// W = U U^T + sigma_eps^2 I. log|W| and W^{-1} are evaluated in closed form
/// using U^T U = I:
///   log|W| = r log(1 + sigma_eps^2) + (d - r) log(sigma_eps^2)
///   W^{-1} = sigma_eps^{-2} (I - U U^T / (1 + sigma_eps^2))
/// The shared d_theta log sigma term is charged once at the aggregate.
double pca_local_loss(const StiefelPoint& u, const StiefelPoint& v, double sigma, double xi,
                      const PcaClientData& data);

/// (1/m) sum_i local_i + d_theta log sigma, d_theta = d * r.
double pca_aggregate_loss(const std::vector<StiefelPoint>& us, const StiefelPoint& v,
                          double sigma, double xi, const std::vector<PcaClientData>& data);

/// Likelihood part of the U gradient, -n (W^{-1} S W^{-1} U - W^{-1} U),
/// before any tangent projection.
Matrix pca_likelihood_grad_u(const StiefelPoint& u, const PcaClientData& data);

struct PcaGradients {
  TangentVector u;      // P_T_U(grad_U f_i)
  TangentVector v;      // P_T_V(grad_V f_i)
  double sigma = 0.0;   // d f_i / d sigma
};

PcaGradients pca_gradients(const StiefelPoint& u, const StiefelPoint& v, double sigma,
                           double xi, const PcaClientData& data);

struct PcaEtas {
  double u = 0.0;      // eta_1
  double v = 0.0;      // eta_2
  double sigma = 0.0;  // eta_3
  double min() const { return std::min(u, std::min(v, sigma)); }
};

struct PcaRunOptions {
  double xi = 1e-6;
  SigmaSchedule sched;
  bool monitor_theory = false;
  int threads = 1;
};

/// Alternating federated loop: per iteration each client steps sigma, then
/// U_i by retraction, then its copy of V; the server retracts the averaged
/// V displacement and averages sigma. Trace columns:
///   iter, loss, grad_U_msq, grad_V_sq, grad_sigma_sq, sigma
/// where row 0 holds the initial loss. Any NaN/Inf aborts with a diagnostic.
std::pair<PcaState, RoundTrace> run_personalized_pca(const PcaState& init,
                                                     const std::vector<PcaClientData>& data,
                                                     const PcaEtas& etas, int iterations,
                                                     std::uint64_t seed,
                                                     const PcaRunOptions& options);

// ---------------------------------------------------------------------------
// Convergence-theory constants and monitors.
// ---------------------------------------------------------------------------

struct PcaTheoryConstants {
  double L_sigma = 0, L_U = 0, G_U = 0, L_V = 0, G_V = 0;
  double L_U_sigma = 0, L_V_sigma = 0;
  double C_eta1 = 0, C_eta2 = 0, G1 = 0, G2 = 0;
  double G_max_op = 0, G_max_F = 0;    // data-derived covariance bounds
  double C1 = 0, C2 = 0;               // retraction constants (empirical)
  double eta3_schedule_cap = 0;        // (1 - omega) 2 xi / d_theta^2
};

/// Smoothness/bound constants from the data; d_theta = d * r substitutes for
/// the dimension symbol throughout.
PcaTheoryConstants pca_theory_constants(const std::vector<PcaClientData>& data, int d, int r,
                                        double omega, double xi, double c1, double c2);

/// eta_1 = min(1/(3 C_eta1), 1), eta_2 = min(1/(3 C_eta2), 1),
/// eta_3 = min(eta_1 / (3 L_U_sigma^2), eta_2 / (3 L_V_sigma^2), 1/(6 L_sigma)).
PcaEtas pca_theorem_step_sizes(const PcaTheoryConstants& c);

/// True iff every iteration satisfies
///   f(t) - f(t-1) <= -(min eta / 3) G_t + tol.
bool check_sufficient_decrease(const RoundTrace& trace, const PcaEtas& etas,
                               double tol = 1e-9);

/// (1/T) sum G_t <= 3 (f(0) - f(T)) / (T min eta).
bool check_convergence_bound(const RoundTrace& trace, const PcaEtas& etas);

/// Empirical fit of the retraction's quadratic error constant, inflated for
/// safe use in step-size denominators; monitoring only.
double estimate_retraction_constant(int d, int r, Rng& rng);

}  // namespace fedhb
