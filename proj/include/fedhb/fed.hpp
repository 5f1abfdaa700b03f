#pragma once

#include "fedhb/types.hpp"

#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace fedhb {

/// Server-to-client broadcast payload.
struct RoundMessage {
  Vector mu;
  Vector sigma;
  int round = 0;
};

/// Client-to-server payload plus scalar metrics for the trace. `extra`
/// carries algorithm-specific vectors (e.g. a projected gradient) that the
/// server hook reduces itself.
struct ClientUpdate {
  int client_id = -1;
  Vector mu_i;
  Vector sigma_i;
  Vector extra;
  std::map<std::string, double> metrics;
};

/// Column-oriented per-iteration log with deterministic CSV output.
class RoundTrace {
 public:
  RoundTrace() = default;
  explicit RoundTrace(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  void append(std::vector<double> row);
  void prepend(std::vector<double> row);
  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<std::vector<double>>& rows() const { return rows_; }
  int num_rows() const { return static_cast<int>(rows_.size()); }
  double at(int row, const std::string& column) const;
  int column_index(const std::string& column) const;
  void write_csv(std::ostream& os) const;
  /// Writes only the named columns, in the given order.
  void write_csv(std::ostream& os, const std::vector<std::string>& column_order) const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<double>> rows_;
};

/// Stream seed for (client, round); independent of execution order.
inline std::uint64_t substream_seed(std::uint64_t root, std::uint64_t client_id,
                                    std::uint64_t round) {
  return derive_seed(root, client_id, round);
}

struct RoundSchedule {
  int iterations = 1;   // T
  int local_steps = 1;  // tau: communication happens when tau | t
};

struct EngineOptions {
  int threads = 1;
};

using ClientStep =
    std::function<ClientUpdate(int client_id, int iter, const RoundMessage&, Rng&)>;
using ServerAggregate =
    std::function<RoundMessage(const RoundMessage& prev, const std::vector<ClientUpdate>&)>;
using ServerMetrics = std::function<std::map<std::string, double>(
    int iter, const RoundMessage&, const std::vector<ClientUpdate>&)>;

/// Exact arithmetic mean of (mu_i, sigma_i), summed in ascending client order.
RoundMessage aggregate_mean(const RoundMessage& prev, const std::vector<ClientUpdate>& updates);

/// Synchronous full-participation round engine. Every iteration t in 1..T
/// runs each client's step with an RNG seeded by (root, client, t); when
/// tau divides t, updates are aggregated in ascending client order. Client
/// fan-out may use threads; results are identical for any thread count.
/// Exceptions from a client step are rethrown with the client id attached.
std::pair<RoundMessage, RoundTrace> run_rounds(int num_clients, const RoundMessage& init,
                                               const RoundSchedule& schedule,
                                               std::uint64_t root_seed,
                                               const ClientStep& step,
                                               const ServerAggregate& aggregate,
                                               const ServerMetrics& server_metrics = nullptr,
                                               const EngineOptions& options = {});

}  // namespace fedhb
