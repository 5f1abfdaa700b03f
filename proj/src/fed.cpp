#include "fedhb/fed.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <stdexcept>
#include <thread>

namespace fedhb {

void RoundTrace::append(std::vector<double> row) {
  require(row.size() == columns_.size(), "RoundTrace: row width mismatch");
  rows_.push_back(std::move(row));
}

void RoundTrace::prepend(std::vector<double> row) {
  require(row.size() == columns_.size(), "RoundTrace: row width mismatch");
  rows_.insert(rows_.begin(), std::move(row));
}

int RoundTrace::column_index(const std::string& column) const {
  const auto it = std::find(columns_.begin(), columns_.end(), column);
  require(it != columns_.end(), "RoundTrace: unknown column " + column);
  return static_cast<int>(it - columns_.begin());
}

double RoundTrace::at(int row, const std::string& column) const {
  return rows_.at(row).at(column_index(column));
}

void RoundTrace::write_csv(std::ostream& os) const { write_csv(os, columns_); }

void RoundTrace::write_csv(std::ostream& os, const std::vector<std::string>& column_order) const {
  std::vector<int> idx;
  idx.reserve(column_order.size());
  for (const auto& name : column_order) idx.push_back(column_index(name));
  for (std::size_t c = 0; c < column_order.size(); ++c)
    os << (c ? "," : "") << column_order[c];
  os << "\n";
  char buf[64];
  for (const auto& row : rows_) {
    for (std::size_t c = 0; c < idx.size(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", row[idx[c]]);
      os << (c ? "," : "") << buf;
    }
    os << "\n";
  }
}

RoundMessage aggregate_mean(const RoundMessage& prev, const std::vector<ClientUpdate>& updates) {
  require(!updates.empty(), "aggregate_mean: empty update set");
  Vector mu = Vector::Zero(updates.front().mu_i.size());
  Vector sigma = Vector::Zero(updates.front().sigma_i.size());
  for (const ClientUpdate& u : updates) {
    require(u.mu_i.size() == mu.size() && u.sigma_i.size() == sigma.size(),
            "aggregate_mean: heterogeneous shapes");
    mu += u.mu_i;
    sigma += u.sigma_i;
  }
  const double inv_m = 1.0 / static_cast<double>(updates.size());
  RoundMessage out;
  out.mu = mu * inv_m;
  out.sigma = sigma * inv_m;
  out.round = prev.round;
  return out;
}

namespace {

void run_clients(int num_clients, int iter, const RoundMessage& msg, std::uint64_t root_seed,
                 const ClientStep& step, int threads, std::vector<ClientUpdate>& out) {
  out.assign(num_clients, ClientUpdate{});
  const int workers = std::max(1, std::min(threads, num_clients));
  std::vector<std::exception_ptr> errors(num_clients);

  auto work = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      try {
        Rng rng(substream_seed(root_seed, static_cast<std::uint64_t>(i),
                               static_cast<std::uint64_t>(iter)));
        out[i] = step(i, iter, msg, rng);
        out[i].client_id = i;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  if (workers == 1) {
    work(0, num_clients);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (num_clients + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int begin = w * chunk;
      const int end = std::min(num_clients, begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
    for (auto& t : pool) t.join();
  }

  for (int i = 0; i < num_clients; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      throw std::runtime_error("client " + std::to_string(i) + ": " + e.what());
    }
  }
}

}  // namespace

std::pair<RoundMessage, RoundTrace> run_rounds(int num_clients, const RoundMessage& init,
                                               const RoundSchedule& schedule,
                                               std::uint64_t root_seed, const ClientStep& step,
                                               const ServerAggregate& aggregate,
                                               const ServerMetrics& server_metrics,
                                               const EngineOptions& options) {
  require(num_clients >= 1, "run_rounds: need at least one client");
  require(schedule.iterations >= 0 && schedule.local_steps >= 1, "run_rounds: bad schedule");

  RoundMessage msg = init;
  RoundTrace trace;
  std::vector<ClientUpdate> updates;

  for (int t = 1; t <= schedule.iterations; ++t) {
    run_clients(num_clients, t, msg, root_seed, step, options.threads, updates);

    if (t % schedule.local_steps == 0) {
      msg = aggregate(msg, updates);
      msg.round = t;
    }

    // A server hook owns the whole row; otherwise rows are client-metric
    // means reduced in ascending client order.
    std::map<std::string, double> row_map;
    if (server_metrics) {
      row_map = server_metrics(t, msg, updates);
    } else {
      for (const ClientUpdate& u : updates)
        for (const auto& [key, value] : u.metrics) row_map[key] += value;
      for (auto& [key, value] : row_map) value /= static_cast<double>(num_clients);
    }

    if (trace.columns().empty()) {
      std::vector<std::string> columns{"iter"};
      for (const auto& [key, _] : row_map) columns.push_back(key);
      trace = RoundTrace(std::move(columns));
    }
    std::vector<double> row{static_cast<double>(t)};
    for (const auto& [_, value] : row_map) row.push_back(value);
    trace.append(std::move(row));
  }
  return {msg, trace};
}

}  // namespace fedhb
