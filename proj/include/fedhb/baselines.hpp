#pragma once

#include "fedhb/pca.hpp"
#include "fedhb/training.hpp"

namespace fedhb {

enum class BaselineKind { Local, GlobalFedAvg, FedAvgFinetune };

// ---------------------------------------------------------------------------
// PCA baselines. Local training runs independent Riemannian descent on each
// client's likelihood; global training keeps a single point and retracts the
// average of the clients' projected likelihood gradients every iteration;
// fine-tuning appends per-client local iterations after the global phase.
// ---------------------------------------------------------------------------

struct PcaBaselineResult {
  std::vector<StiefelPoint> models;  // one per client (global is replicated)
  RoundTrace trace;
};

PcaBaselineResult run_pca_baseline(BaselineKind kind, const std::vector<PcaClientData>& data,
                                   const std::vector<StiefelPoint>& init_locals,
                                   const StiefelPoint& init_global, double eta,
                                   int iterations, int finetune_iterations,
                                   std::uint64_t seed, int threads = 1);

/// mean_i mean_x ||x - U_i U_i^T x||^2 on held-out data.
double reconstruction_error(const std::vector<StiefelPoint>& models,
                            const std::vector<Matrix>& eval_samples);

/// Method error divided by the true models' error on the same data.
double reconstruction_error_ratio(const std::vector<StiefelPoint>& models,
                                  const std::vector<StiefelPoint>& true_models,
                                  const std::vector<Matrix>& eval_samples);

// ---------------------------------------------------------------------------
// Network baselines over any NetObjective (autoencoder or denoiser).
// Local = per-client training with the prior off; FedAvg = one shared model,
// tau local steps then weight averaging, client optimizers reset per round;
// fine-tuning appends finetune_rounds x tau local steps per client.
// ---------------------------------------------------------------------------

struct NetBaselineResult {
  std::vector<DenseNet> models;
  RoundTrace trace;
};

NetBaselineResult run_net_baseline(BaselineKind kind, const NetObjective& objective,
                                   const NetTrainState& init, double eta_theta,
                                   int iterations, int tau, int finetune_rounds,
                                   std::uint64_t seed, const NetTrainOptions& options);

}  // namespace fedhb
