#include <doctest.h>

#include "fedhb/fed.hpp"

#include <sstream>

using namespace fedhb;

namespace {

RoundMessage scalar_msg(double mu, double sigma) {
  RoundMessage m;
  m.mu = Vector::Constant(1, mu);
  m.sigma = Vector::Constant(1, sigma);
  return m;
}

}  // namespace

TEST_CASE("aggregate_mean: single update, pair average, tree-reduction oracle") {
  RoundMessage prev = scalar_msg(0, 1);

  std::vector<ClientUpdate> one(1);
  one[0].mu_i = Vector::Constant(1, 3.5);
  one[0].sigma_i = Vector::Constant(1, 0.25);
  const RoundMessage same = aggregate_mean(prev, one);
  CHECK(same.mu(0) == 3.5);
  CHECK(same.sigma(0) == 0.25);

  std::vector<ClientUpdate> two(2);
  two[0].mu_i = Vector::Constant(1, 0.0);
  two[1].mu_i = Vector::Constant(1, 2.0);
  two[0].sigma_i = two[1].sigma_i = Vector::Constant(1, 1.0);
  CHECK(aggregate_mean(prev, two).mu(0) == doctest::Approx(1.0));

  Rng rng(31);
  std::vector<ClientUpdate> many(50);
  for (auto& u : many) {
    u.mu_i = rng.gaussian_vector(4);
    u.sigma_i = Vector::Constant(1, rng.uniform());
  }
  const RoundMessage mean = aggregate_mean(prev, many);
  // pairwise-tree reduction as an alternative summation order
  std::vector<Vector> level;
  for (const auto& u : many) level.push_back(u.mu_i);
  while (level.size() > 1) {
    std::vector<Vector> next;
    for (std::size_t k = 0; k + 1 < level.size(); k += 2) next.push_back(level[k] + level[k + 1]);
    if (level.size() % 2) next.push_back(level.back());
    level = std::move(next);
  }
  CHECK((mean.mu - level[0] / 50.0).norm() < 1e-12);

  CHECK_THROWS(aggregate_mean(prev, {}));
}

TEST_CASE("engine: one client, one iteration") {
  int calls = 0;
  auto step = [&](int, int, const RoundMessage& msg, Rng&) {
    ++calls;
    ClientUpdate u;
    u.mu_i = msg.mu;
    u.sigma_i = msg.sigma;
    u.metrics["x"] = 1.0;
    return u;
  };
  auto [msg, trace] = run_rounds(1, scalar_msg(5, 1), RoundSchedule{1, 1}, 99, step,
                                 aggregate_mean);
  CHECK(calls == 1);
  CHECK(msg.mu(0) == 5.0);
  CHECK(trace.num_rows() == 1);
  CHECK(trace.at(0, "x") == 1.0);
}

TEST_CASE("engine: communication happens exactly when tau divides t") {
  std::vector<int> comm_iters;
  auto step = [](int, int, const RoundMessage& msg, Rng&) {
    ClientUpdate u;
    u.mu_i = msg.mu;
    u.sigma_i = msg.sigma;
    return u;
  };
  auto agg = [&](const RoundMessage& prev, const std::vector<ClientUpdate>& ups) {
    comm_iters.push_back(prev.round);  // called once per communication
    return aggregate_mean(prev, ups);
  };
  run_rounds(2, scalar_msg(0, 1), RoundSchedule{10, 3}, 1, step, agg);
  CHECK(comm_iters.size() == 3);  // floor(10 / 3)
}

TEST_CASE("engine: trace is identical for any worker count") {
  auto step = [](int client, int iter, const RoundMessage& msg, Rng& rng) {
    ClientUpdate u;
    u.mu_i = msg.mu + Vector::Constant(1, 0.01 * rng.normal());
    u.sigma_i = msg.sigma;
    u.metrics["noise"] = rng.normal();
    u.metrics["id"] = client + iter;
    return u;
  };
  std::ostringstream csv1, csv4;
  auto [m1, t1] = run_rounds(7, scalar_msg(0, 1), RoundSchedule{12, 2}, 77, step,
                             aggregate_mean, nullptr, EngineOptions{1});
  auto [m4, t4] = run_rounds(7, scalar_msg(0, 1), RoundSchedule{12, 2}, 77, step,
                             aggregate_mean, nullptr, EngineOptions{4});
  t1.write_csv(csv1);
  t4.write_csv(csv4);
  CHECK(csv1.str() == csv4.str());
  CHECK(m1.mu(0) == m4.mu(0));
}

TEST_CASE("engine: substream seeds are scheduling independent") {
  CHECK(substream_seed(1, 2, 3) == substream_seed(1, 2, 3));
  CHECK(substream_seed(1, 2, 3) != substream_seed(1, 3, 2));
  CHECK(substream_seed(1, 2, 3) != substream_seed(2, 2, 3));
}

TEST_CASE("engine: client failure carries the client id") {
  auto step = [](int client, int, const RoundMessage& msg, Rng&) -> ClientUpdate {
    if (client == 3) throw std::runtime_error("boom");
    ClientUpdate u;
    u.mu_i = msg.mu;
    u.sigma_i = msg.sigma;
    return u;
  };
  CHECK_THROWS_WITH_AS(run_rounds(5, scalar_msg(0, 1), RoundSchedule{1, 1}, 1, step,
                                  aggregate_mean),
                       "client 3: boom", std::runtime_error);
}

TEST_CASE("trace csv uses full precision and honors column selection") {
  RoundTrace trace({"iter", "a", "b"});
  trace.append({1.0, 1.0 / 3.0, 2.0});
  std::ostringstream all, ordered;
  trace.write_csv(all);
  CHECK(all.str().find("0.33333333333333331") != std::string::npos);
  trace.write_csv(ordered, {"b", "iter"});
  CHECK(ordered.str() == "b,iter\n2,1\n");
}
