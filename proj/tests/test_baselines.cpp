#include <doctest.h>

#include <cmath>
#include <memory>

#include "amml/baselines.hpp"
#include "amml/error.hpp"
#include "amml/oracle.hpp"

using namespace amml;

namespace {

using Models = std::vector<std::shared_ptr<const BaseModel>>;

std::shared_ptr<const BaseModel> tiny_model(ProblemKind kind, std::uint64_t seed, double lambda = 0.1) {
  const Graph g(3, {{0, 1}, {1, 2}});
  const auto pool = synthetic_pool(kind, {2, 200, 0.3, 0.3}, seed);
  auto inst = std::make_shared<ProblemInstance>(sample_instance(pool, g, 18, lambda, kind, seed, "b"));
  label_instance(*inst);
  return std::make_shared<BaseModel>(inst, std::make_shared<Graph>(g));
}

std::shared_ptr<const BaseModel> two_node_average() {
  auto inst = std::make_shared<ProblemInstance>();
  inst->dim = 1;
  for (double b : {1.0, 3.0}) {
    LocalObjective o;
    o.features = Mat::Ones(1, 1);
    o.labels = Vec::Constant(1, b);
    inst->nodes.push_back(o);
  }
  inst->x_star = Vec::Constant(1, 2.0);
  return std::make_shared<BaseModel>(inst, std::make_shared<Graph>(2, std::vector<std::pair<int, int>>{{0, 1}}));
}

}  // namespace

TEST_CASE("fixed policy traces") {
  const auto model = tiny_model(ProblemKind::kLeastSquaresLasso, 1);
  const ActionTriple a(5, 5, 5);
  const auto t1 = run_fixed_policy(*model, a, 30);
  const auto t2 = run_fixed_policy(*model, a, 30);
  REQUIRE(t1.metrics.size() == 30);
  CHECK_FALSE(t1.diverged);
  std::vector<Metrics> ref;
  model->run_round(model->init_network(), a, 30, nullptr, &ref);
  for (int k = 0; k < 30; ++k) {
    CHECK(t1.metrics[k].mse == t2.metrics[k].mse);
    CHECK(t1.metrics[k].mse == ref[k].mse);
    CHECK(t1.metrics[k].consensus_error == ref[k].consensus_error);
  }
  CHECK(final_mse(t1) == t1.metrics.back().mse);

  const auto blown = run_fixed_policy(*model, a, 30, 1e-30);
  CHECK(blown.diverged);
  CHECK(blown.metrics.size() == 1);
  CHECK(std::isinf(final_mse(blown)));
  CHECK_THROWS_AS(run_fixed_policy(*model, a, 0), Error);
}

TEST_CASE("fixed policy converges on tiny instances") {
  for (auto kind : {ProblemKind::kLeastSquaresLasso, ProblemKind::kLogistic, ProblemKind::kL1Lasso}) {
    const auto model = tiny_model(kind, 2);
    const auto t = run_fixed_policy(*model, ActionTriple(1, 1, 1), 5000);
    CHECK_FALSE(t.diverged);
    CHECK(final_mse(t) <= 1e-6);
  }
}

TEST_CASE("tuning rules") {
  const Models val{tiny_model(ProblemKind::kLeastSquaresLasso, 3), tiny_model(ProblemKind::kLeastSquaresLasso, 4)};
  const ActionTriple good(5, 5, 5), other(1, 2, 1);

  const auto single = tune_fixed_policy(val, {other}, 20);
  CHECK(single.index == 0);
  CHECK(single.scores.size() == 1);

  // A tiny beta with a large rho oscillates out of control.
  const ActionTriple wild(0, 1e-3, 20);
  CHECK(run_fixed_policy(*val[0], wild, 20).diverged);
  const auto pick = tune_fixed_policy(val, {wild, good}, 20);
  CHECK(pick.index == 1);
  CHECK(std::isinf(pick.scores[0]));

  const auto tie = tune_fixed_policy(val, {other, good, good}, 20);
  CHECK(tie.scores[1] == tie.scores[2]);
  CHECK(tie.index == (tie.scores[0] <= tie.scores[1] ? 0u : 1u));

  CHECK_THROWS_AS(tune_fixed_policy(val, {}, 20), Error);
  CHECK(default_fixed_grid(ProblemKind::kLogistic).size() == 216);
  CHECK(default_fixed_grid(ProblemKind::kL1Lasso).size() == 36);
  for (const auto& a : default_fixed_grid(ProblemKind::kL1Lasso)) CHECK(a.alpha() == 0.0);
}

TEST_CASE("PG-EXTRA on two-node averaging") {
  const auto model = two_node_average();
  const auto t = run_pg_extra(*model, 0.5, 200);
  CHECK_FALSE(t.diverged);
  REQUIRE(t.metrics.size() == 200);
  CHECK(final_mse(t) <= 1e-12);
  CHECK(t.metrics.back().consensus_error <= 1e-12);
  CHECK(run_pg_extra(*model, 50.0, 200).diverged);
}

TEST_CASE("PG-EXTRA without a regularizer is EXTRA") {
  const auto model = tiny_model(ProblemKind::kLeastSquaresLasso, 5, 0.0);
  const auto& inst = model->instance();
  const double step = 0.2;
  const auto t = run_pg_extra(*model, step, 40);

  const Mat w = mixing_matrix(model->weights());
  const Mat w_tilde = 0.5 * (Mat::Identity(3, 3) + w);
  auto grad = [&](const Mat& x) {
    Mat g(x.rows(), x.cols());
    for (int i = 0; i < 3; ++i) g.col(i) = smooth_value_grad(inst.nodes[i], x.col(i)).grad;
    return g;
  };
  Mat x0 = Mat::Zero(2, 3);
  Mat x1 = x0 * w - step * grad(x0);
  for (int k = 0; k < 40; ++k) {
    NetworkState s;
    for (int i = 0; i < 3; ++i) s.nodes.push_back({x1.col(i), Vec::Zero(2)});
    CHECK(std::abs(compute_metrics(s, inst).mse - t.metrics[k].mse) <= 1e-12 * (1 + t.metrics[k].mse));
    const Mat x2 = x1 * (Mat::Identity(3, 3) + w) - x0 * w_tilde - step * (grad(x1) - grad(x0));
    x0 = x1;
    x1 = x2;
  }
}

TEST_CASE("PG-EXTRA tuned steps reach consensus; oversized steps diverge") {
  for (auto kind : {ProblemKind::kLeastSquaresLasso, ProblemKind::kLogistic}) {
    const auto model = tiny_model(kind, 6);
    const auto tuned = tune_pg_extra({model}, default_step_grid(), 300);
    REQUIRE(std::isfinite(tuned.score));
    const double step = default_step_grid()[tuned.index];
    const auto t = run_pg_extra(*model, step, 3000);
    CHECK_FALSE(t.diverged);
    CHECK(t.metrics.back().consensus_error <= 1e-10);
    CHECK(final_mse(t) <= 1e-8);
    CHECK(run_pg_extra(*model, 100 * step, 3000).diverged);
  }
}

TEST_CASE("PG-EXTRA on l1-regression") {
  const auto model = tiny_model(ProblemKind::kL1Lasso, 7);
  const auto t = run_pg_extra(*model, 0.05, 400);
  CHECK_FALSE(t.diverged);
  CHECK(t.metrics.back().mse < t.metrics.front().mse);
  CHECK_THROWS_AS(run_pg_extra(*model, -1.0, 10), Error);
}

TEST_CASE("base model with alpha = 0, beta = 1/s, rho = 1/(2s) retraces PG-EXTRA with step s") {
  for (auto kind : {ProblemKind::kLeastSquaresLasso, ProblemKind::kLogistic, ProblemKind::kL1Lasso}) {
    CAPTURE(kind_name(kind));
    const Graph g = generate_graph(5, 6, 3);
    const auto pool = synthetic_pool(kind, {3, 200, 0.3, 0.3}, 4);
    auto inst = std::make_shared<ProblemInstance>(sample_instance(pool, g, 30, 0.1, kind, 5, "e"));
    label_instance(*inst);
    const BaseModel model(inst, std::make_shared<Graph>(g));
    for (double s : {0.1, 0.3}) {
      const auto a = run_fixed_policy(model, ActionTriple(0, 1 / s, 0.5 / s), 60);
      const auto b = run_pg_extra(model, s, 60);
      REQUIRE(a.metrics.size() == b.metrics.size());
      for (std::size_t k = 0; k < a.metrics.size(); ++k)
        CHECK(std::abs(a.metrics[k].mse - b.metrics[k].mse) <= 1e-6 * b.metrics[k].mse + 1e-14);
    }
  }
}
