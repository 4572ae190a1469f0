#include <doctest.h>

#include <cmath>
#include <memory>

#include "amml/engine.hpp"
#include "amml/error.hpp"
#include "amml/oracle.hpp"
#include "amml/rng.hpp"

using namespace amml;

namespace {

std::shared_ptr<const Graph> path3() { return std::make_shared<Graph>(3, std::vector<std::pair<int, int>>{{0, 1}, {1, 2}}); }

// s_i(x) = 1/2 (x - b_i)^2 on every node, no regularization.
std::shared_ptr<ProblemInstance> scalar_average(const std::vector<double>& targets) {
  auto inst = std::make_shared<ProblemInstance>();
  inst->kind = ProblemKind::kLeastSquaresLasso;
  inst->dim = 1;
  inst->lambda = 0.0;
  for (double b : targets) {
    LocalObjective o;
    o.kind = inst->kind;
    o.features = Mat::Ones(1, 1);
    o.labels = Vec::Constant(1, b);
    inst->nodes.push_back(o);
  }
  return inst;
}

std::shared_ptr<ProblemInstance> tiny_instance(ProblemKind kind, std::uint64_t seed, int nodes = 3, int dim = 2) {
  const Graph g = nodes == 3 ? Graph(3, {{0, 1}, {1, 2}}) : generate_graph(nodes, nodes + 1, seed);
  const auto pool = synthetic_pool(kind, {dim, 200, 0.2, 0.3}, seed);
  auto inst = std::make_shared<ProblemInstance>(sample_instance(pool, g, nodes * 6, 0.1, kind, seed, "tiny"));
  label_instance(*inst);
  return inst;
}

Vec dual_sum(const NetworkState& s) {
  Vec sum = Vec::Zero(s.nodes.front().q.size());
  for (const auto& n : s.nodes) sum += n.q;
  return sum;
}

}  // namespace

TEST_CASE("ActionTriple bounds") {
  CHECK_NOTHROW(ActionTriple(5, 5, 5));
  CHECK_THROWS_AS(ActionTriple(5, 5, 0.0), Error);
  CHECK_THROWS_AS(ActionTriple(-1, 5, 5), Error);
  CHECK_THROWS_AS(ActionTriple(1, 0.0, 5), Error);
  CHECK_THROWS_AS(ActionTriple(21, 5, 5), Error);
  Vec raw(3);
  raw << -3, 100, 0;
  const auto a = ActionTriple::clipped(raw, {});
  CHECK(a.alpha() == 0.0);
  CHECK(a.beta() == 20.0);
  CHECK(a.rho() == 1e-3);
  const auto two = ActionTriple::clipped(Vec::Constant(2, 4.0), {});
  CHECK(two.alpha() == 0.0);
  CHECK(two.beta() == 4.0);
}

TEST_CASE("init_network") {
  auto inst = tiny_instance(ProblemKind::kLeastSquaresLasso, 1);
  BaseModel model(inst, path3());
  const auto s = model.init_network();
  CHECK(s.nodes.size() == 3);
  CHECK(s.iteration == 0);
  CHECK(dual_sum(s).isZero(0.0));
  for (const auto& n : s.nodes) CHECK(n.x.size() == 2);

  auto big = std::make_shared<ProblemInstance>();
  big->kind = ProblemKind::kLogistic;
  big->dim = 10;
  big->nodes.resize(10);
  for (auto& n : big->nodes) {
    n.kind = ProblemKind::kLogistic;
    n.features = Mat::Ones(2, 10);
    n.labels = Vec::Zero(2);
  }
  BaseModel ten(big, std::make_shared<Graph>(generate_graph(10, 30, 0)));
  const auto s10 = ten.init_network();
  CHECK(s10.nodes.size() == 10);
  CHECK(s10.nodes[3].x.size() == 10);
}

TEST_CASE("local_consensus") {
  BaseModel model(scalar_average({0, 0, 0}), path3());
  auto s = model.init_network();
  for (auto& n : s.nodes) n.x = Vec::Constant(1, 4.2);
  for (int i = 0; i < 3; ++i) CHECK(model.local_consensus(s, i)[0] == 0.0);

  s.nodes[1].x[0] = 3.0;
  s.nodes[0].x[0] = 0.0;
  s.nodes[2].x[0] = 0.0;
  CHECK(model.local_consensus(s, 1)[0] == doctest::Approx(2.0));

  auto g = std::make_shared<Graph>(5, std::vector<std::pair<int, int>>{{0, 1}, {1, 2}, {2, 3}, {3, 4}});
  BaseModel line(scalar_average({0, 0, 0, 0, 0}), g);
  auto a = line.init_network();
  auto b = a;
  b.nodes[4].x[0] = 7.0;
  CHECK(line.local_consensus(a, 1)[0] == line.local_consensus(b, 1)[0]);
  CHECK(line.local_consensus(a, 3)[0] != line.local_consensus(b, 3)[0]);
}

TEST_CASE("step: two-node averaging converges to the mean") {
  auto inst = scalar_average({0.0, 4.0});
  inst->x_star = Vec::Constant(1, 2.0);
  BaseModel model(inst, std::make_shared<Graph>(2, std::vector<std::pair<int, int>>{{0, 1}}));
  auto s = model.init_network();
  const ActionTriple a(1.0, 1.0, 1.0);
  CHECK(convexity_safeguard(a, 1.0, model.lambda_max_weights()));
  int k = 0;
  for (; k < 2000 && model.metrics(s).mse > 1e-6; ++k) s = model.step(s, a);
  CHECK(model.metrics(s).mse <= 1e-6);
  CHECK(s.iteration == k);
  CHECK(dual_sum(s).norm() <= 1e-9);
}

TEST_CASE("run_round: counters and observation blocks") {
  auto inst = tiny_instance(ProblemKind::kLogistic, 2);
  BaseModel model(inst, path3());
  const ActionTriple a(5, 5, 5);
  RoundObservation obs;
  const auto s = model.run_round(model.init_network(), a, 10, &obs);
  CHECK(s.iteration == 10);
  REQUIRE(obs.size() == 3);
  for (const auto& per_node : obs) CHECK(per_node.size() == 10);
  CHECK(obs[0][9].sigma == model.observe(s, 0).sigma);

  const auto one = model.run_round(model.init_network(), a, 1);
  const auto stepped = model.step(model.init_network(), a);
  for (int i = 0; i < 3; ++i) CHECK(one.nodes[i].x == stepped.nodes[i].x);
  CHECK_THROWS_AS(model.run_round(s, a, 0), Error);
}

TEST_CASE("metrics") {
  auto inst = scalar_average({1.0, 3.0});
  inst->x_star = Vec::Constant(1, 2.0);
  BaseModel model(inst, std::make_shared<Graph>(2, std::vector<std::pair<int, int>>{{0, 1}}));
  auto s = model.init_network();
  s.nodes[0].x[0] = 1.0;
  s.nodes[1].x[0] = 3.0;
  const auto m = model.metrics(s);
  CHECK(m.mse == doctest::Approx(1.0));
  CHECK(m.consensus_error == doctest::Approx(2.0));
  CHECK(m.objective_error >= 0.0);

  for (auto& n : s.nodes) n.x = *inst->x_star;
  const auto zero = model.metrics(s);
  CHECK(zero.mse == 0.0);
  CHECK(zero.objective_error == 0.0);
  CHECK(zero.consensus_error == 0.0);

  auto unlabeled = scalar_average({1.0});
  CHECK_THROWS_AS(compute_metrics(s, *unlabeled), Error);
}

TEST_CASE("convexity_safeguard") {
  CHECK(convexity_safeguard(ActionTriple(0, 5, 5), 0.0, 1.0));
  CHECK_FALSE(convexity_safeguard(ActionTriple(0, 0.1, 5), 0.0, 1.0));
  CHECK(convexity_safeguard(ActionTriple(0, 1e-6, 1e-3), 0.0, 1e-3));
}

TEST_CASE("dual sum is conserved under random actions on every kind") {
  Rng rng(3);
  for (auto kind : {ProblemKind::kLeastSquaresLasso, ProblemKind::kLogistic, ProblemKind::kL1Lasso}) {
    auto inst = tiny_instance(kind, 4, 5, 3);
    BaseModel model(inst, std::make_shared<Graph>(generate_graph(5, 6, 4)), {1e-10, 5000});
    auto s = model.init_network();
    for (int k = 0; k < 200; ++k) {
      const double rho = rng.uniform(1e-3, 10.0);
      const ActionTriple a(rng.uniform(0.0, 20.0), std::min(20.0, rho * model.lambda_max_weights() + rng.uniform(0.0, 10.0)), rho);
      s = model.step(s, a);
      CHECK(dual_sum(s).norm() <= 1e-9);
    }
  }
}

TEST_CASE("node updates only read neighbour state") {
  for (auto kind : {ProblemKind::kLeastSquaresLasso, ProblemKind::kLogistic, ProblemKind::kL1Lasso}) {
    auto inst = tiny_instance(kind, 5, 5, 3);
    auto g = std::make_shared<Graph>(5, std::vector<std::pair<int, int>>{{0, 1}, {1, 2}, {2, 3}, {3, 4}});
    BaseModel model(inst, g);
    auto s = model.run_round(model.init_network(), ActionTriple(5, 5, 5), 3);
    auto perturbed = s;
    perturbed.nodes[4].x += Vec::Constant(3, 0.75);
    perturbed.nodes[4].q += Vec::Constant(3, -0.5);
    const auto a = model.step(s, ActionTriple(5, 5, 5));
    const auto b = model.step(perturbed, ActionTriple(5, 5, 5));
    CHECK(a.nodes[0].x == b.nodes[0].x);
    CHECK(a.nodes[1].x == b.nodes[1].x);
    CHECK(a.nodes[0].q == b.nodes[0].q);
    CHECK(a.nodes[3].x != b.nodes[3].x);
  }
}

TEST_CASE("fixed action drives tiny instances to the optimum; the optimum is a fixed point") {
  for (auto kind : {ProblemKind::kLeastSquaresLasso, ProblemKind::kLogistic, ProblemKind::kL1Lasso}) {
    CAPTURE(kind_name(kind));
    auto inst = tiny_instance(kind, 6);
    BaseModel model(inst, path3(), {1e-10, 5000});
    const ActionTriple a(1.0, 2.0, 1.0);
    double eig_min = 1e300;
    for (const auto& n : inst->nodes) eig_min = std::min(eig_min, hessian_eigenvalues(smooth_hessian(n, *inst->x_star))[0]);
    CHECK(convexity_safeguard(a, eig_min, model.lambda_max_weights()));
    auto s = model.init_network();
    int k = 0;
    for (; k < 5000 && model.metrics(s).mse > 1e-6; ++k) s = model.step(s, a);
    CHECK(model.metrics(s).mse <= 1e-6);
    for (; k < 5000 && model.metrics(s).mse > 1e-20; ++k) s = model.step(s, a);
    auto pinned = s;
    for (auto& n : pinned.nodes) n.x = *inst->x_star;
    const auto next = model.step(pinned, a);
    for (int i = 0; i < 3; ++i) CHECK((next.nodes[i].x - *inst->x_star).norm() <= 1e-8);
  }
}
