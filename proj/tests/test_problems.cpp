#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "amml/error.hpp"
#include "amml/problems.hpp"
#include "amml/rng.hpp"
#include "amml/topology.hpp"

using namespace amml;

namespace {

LocalObjective single(ProblemKind kind, Vec a, double b, double lambda) {
  LocalObjective o;
  o.kind = kind;
  o.features = a.transpose();
  o.labels = Vec::Constant(1, b);
  o.lambda = lambda;
  return o;
}

LocalObjective random_objective(ProblemKind kind, int m, int d, Rng& rng) {
  LocalObjective o;
  o.kind = kind;
  o.lambda = 0.1;
  o.features.resize(m, d);
  o.labels.resize(m);
  for (int j = 0; j < m; ++j) {
    for (int k = 0; k < d; ++k) o.features(j, k) = rng.normal();
    o.labels[j] = kind == ProblemKind::kLogistic ? (rng.uniform() < 0.5 ? 0.0 : 1.0) : rng.normal();
  }
  return o;
}

Vec random_vec(int d, Rng& rng, double scale = 1.0) {
  Vec v(d);
  for (int k = 0; k < d; ++k) v[k] = scale * rng.normal();
  return v;
}

std::string write_temp(const std::string& name, const std::string& body) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path) << body;
  return path.string();
}

}  // namespace

TEST_CASE("smooth_value_grad: hand-computed values") {
  const auto logistic = single(ProblemKind::kLogistic, Vec::Unit(2, 0), 1.0, 0.0);
  const auto lg = smooth_value_grad(logistic, Vec::Zero(2));
  CHECK(lg.value == doctest::Approx(std::log(2.0)));
  CHECK(lg.grad[0] == doctest::Approx(-0.5));
  CHECK(lg.grad[1] == 0.0);

  const auto ls1 = single(ProblemKind::kLeastSquaresLasso, Vec::Constant(1, 1.0), 2.0, 0.3);
  const auto v1 = smooth_value_grad(ls1, Vec::Constant(1, 2.0));
  CHECK(v1.value == 0.0);
  CHECK(v1.grad[0] == 0.0);

  const auto ls2 = single(ProblemKind::kLeastSquaresLasso, Vec::Ones(2), 0.0, 0.0);
  const auto v2 = smooth_value_grad(ls2, Vec::Ones(2));
  CHECK(v2.value == doctest::Approx(2.0));
  CHECK(v2.grad[0] == doctest::Approx(2.0));
  CHECK(v2.grad[1] == doctest::Approx(2.0));

  const auto l1 = single(ProblemKind::kL1Lasso, Vec::Ones(2), 3.0, 1.0);
  const auto v3 = smooth_value_grad(l1, Vec::Ones(2));
  CHECK(v3.value == 0.0);
  CHECK(v3.grad.isZero(0.0));
}

TEST_CASE("smooth_hessian: closed forms") {
  const auto ls = single(ProblemKind::kLeastSquaresLasso, Vec::Unit(2, 0), 0.0, 0.0);
  const Mat h = smooth_hessian(ls, Vec::Zero(2));
  CHECK(h(0, 0) == 1.0);
  CHECK(h(0, 1) == 0.0);
  CHECK(h(1, 1) == 0.0);

  const auto lg = single(ProblemKind::kLogistic, Vec::Constant(1, 2.0), 1.0, 0.0);
  CHECK(smooth_hessian(lg, Vec::Zero(1))(0, 0) == doctest::Approx(1.0));

  const auto l1 = single(ProblemKind::kL1Lasso, Vec::Ones(3), 0.0, 0.5);
  CHECK(smooth_hessian(l1, Vec::Ones(3)).isZero(0.0));
}

TEST_CASE("hessian_eigenvalues: ascending spectra") {
  Mat a(2, 2);
  a << 3, 0, 0, 1;
  const Vec e1 = hessian_eigenvalues(a);
  CHECK(e1[0] == doctest::Approx(1.0));
  CHECK(e1[1] == doctest::Approx(3.0));

  a << 1, 0, 0, 0;
  const Vec e2 = hessian_eigenvalues(a);
  CHECK(e2[0] == doctest::Approx(0.0));
  CHECK(e2[1] == doctest::Approx(1.0));

  const Vec v = Vec::Ones(2);
  const Vec e3 = hessian_eigenvalues(0.5 * (v * v.transpose() + v * v.transpose()));
  CHECK(std::abs(e3[0]) <= 1e-14);
  CHECK(e3[1] == doctest::Approx(2.0));
}

TEST_CASE("gradient and Hessian agree with central finite differences") {
  Rng rng(11);
  for (auto kind : {ProblemKind::kLeastSquaresLasso, ProblemKind::kLogistic}) {
    for (int trial = 0; trial < 10; ++trial) {
      const int d = 4;
      const auto obj = random_objective(kind, 7, d, rng);
      const Vec x = random_vec(d, rng);
      const auto se = smooth_value_grad(obj, x);
      const Mat h = smooth_hessian(obj, x);
      const double eps = 1e-5;
      Vec fd_grad(d);
      Mat fd_hess(d, d);
      for (int k = 0; k < d; ++k) {
        Vec xp = x, xm = x;
        xp[k] += eps;
        xm[k] -= eps;
        fd_grad[k] = (smooth_value_grad(obj, xp).value - smooth_value_grad(obj, xm).value) / (2 * eps);
        fd_hess.col(k) = (smooth_value_grad(obj, xp).grad - smooth_value_grad(obj, xm).grad) / (2 * eps);
      }
      CHECK((fd_grad - se.grad).norm() / std::max(se.grad.norm(), 1e-8) <= 1e-6);
      CHECK((fd_hess - h).norm() / std::max(h.norm(), 1e-8) <= 1e-5);
    }
  }
}

TEST_CASE("smooth parts are convex along random chords") {
  Rng rng(12);
  for (auto kind : {ProblemKind::kLeastSquaresLasso, ProblemKind::kLogistic}) {
    const auto obj = random_objective(kind, 9, 3, rng);
    for (int trial = 0; trial < 50; ++trial) {
      const Vec x = random_vec(3, rng, 3.0), y = random_vec(3, rng, 3.0);
      const double t = rng.uniform();
      const double lhs = smooth_value_grad(obj, t * x + (1 - t) * y).value;
      const double rhs = t * smooth_value_grad(obj, x).value + (1 - t) * smooth_value_grad(obj, y).value;
      CHECK(lhs <= rhs + 1e-9);
    }
  }
}

TEST_CASE("full_objective") {
  ProblemInstance inst;
  inst.kind = ProblemKind::kL1Lasso;
  inst.dim = 1;
  inst.lambda = 1.0;
  inst.nodes.push_back(single(ProblemKind::kL1Lasso, Vec::Ones(1), 1.0, 1.0));
  CHECK(full_objective(inst, Vec::Zero(1)) == doctest::Approx(1.0));
  CHECK_THROWS_AS(full_objective(inst, Vec::Zero(2)), Error);

  ProblemInstance lg;
  lg.kind = ProblemKind::kLogistic;
  lg.dim = 2;
  Rng rng(1);
  for (int i = 0; i < 4; ++i) lg.nodes.push_back(random_objective(ProblemKind::kLogistic, 5, 2, rng));
  CHECK(full_objective(lg, Vec::Zero(2)) == doctest::Approx(4.0 * std::log(2.0)));
}

TEST_CASE("load_uci_dataset: abalone layout") {
  const auto path = write_temp("amml_abalone.data",
                               "M,0.455,0.365,0.095,0.514,0.2245,0.101,0.15,15\n"
                               "M,0.35,0.265,0.09,0.2255,0.0995,0.0485,0.07,7\n"
                               "F,0.53,0.42,0.135,0.677,0.2565,0.1415,0.21,9\n"
                               "I,0.33,0.255,0.08,0.205,0.0895,0.0395,0.055,7\n");
  const auto samples = load_uci_dataset(path, DatasetFormat::kAbalone);
  REQUIRE(samples.size() == 4);
  CHECK(samples[0].features.size() == 10);
  CHECK(samples[0].label == 15.0);
  CHECK(samples[2].label == 9.0);
  // Standardized columns: zero mean, unit population variance.
  for (int k = 0; k < 10; ++k) {
    double mean = 0, sq = 0;
    for (const auto& s : samples) mean += s.features[k];
    mean /= 4;
    for (const auto& s : samples) sq += (s.features[k] - mean) * (s.features[k] - mean);
    CHECK(std::abs(mean) <= 1e-9);
    CHECK(std::abs(std::sqrt(sq / 4) - 1.0) <= 1e-9);
  }
  // The male indicator is the first one-hot column.
  CHECK(samples[0].features[0] > 0);
  CHECK(samples[2].features[0] < 0);
}

TEST_CASE("load_uci_dataset: breast cancer drops missing rows") {
  const auto path = write_temp("amml_bcw.data",
                               "1000025,5,1,1,1,2,1,3,1,1,2\n"
                               "1002945,5,4,4,5,7,10,3,2,1,2\n"
                               "1057013,8,4,5,1,2,?,7,3,1,4\n"
                               "1017122,8,10,10,8,7,10,9,7,1,4\n");
  const auto samples = load_uci_dataset(path, DatasetFormat::kBreastCancerWisconsin);
  REQUIRE(samples.size() == 3);
  CHECK(samples[0].features.size() == 9);
  CHECK(samples[0].label == 0.0);
  CHECK(samples[2].label == 1.0);
  // Column 8 (mitoses) is constant in what remains and maps to zero.
  for (const auto& s : samples) CHECK(s.features[8] == 0.0);
}

TEST_CASE("load_uci_dataset: errors") {
  CHECK_THROWS_AS(load_uci_dataset(write_temp("amml_empty.data", ""), DatasetFormat::kAbalone), Error);
  CHECK_THROWS_AS(load_uci_dataset("/nonexistent/abalone.data", DatasetFormat::kAbalone), Error);
  CHECK_THROWS_AS(load_uci_dataset(write_temp("amml_short.data", "M,0.1,0.2\n"), DatasetFormat::kAbalone), Error);
  CHECK_THROWS_AS(load_uci_dataset(write_temp("amml_nan.data", "M,x,0.3,0.1,0.5,0.2,0.1,0.1,9\n"),
                                   DatasetFormat::kAbalone),
                  Error);
}

// The published files are not vendored; point AMML_ABALONE / AMML_BREAST_CANCER
// at local copies to check the row counts.
TEST_CASE("load_uci_dataset: published files" * doctest::skip(std::getenv("AMML_ABALONE") == nullptr)) {
  const auto abalone = load_uci_dataset(std::getenv("AMML_ABALONE"), DatasetFormat::kAbalone);
  CHECK(abalone.size() == 4177);
  CHECK(abalone.front().features.size() == 10);
  if (const char* bcw = std::getenv("AMML_BREAST_CANCER")) {
    CHECK(load_uci_dataset(bcw, DatasetFormat::kBreastCancerWisconsin).size() == 683);
  }
}

TEST_CASE("sample_instance: even split, determinism, errors") {
  const auto pool = synthetic_pool(ProblemKind::kLeastSquaresLasso, {10, 4177, 0.3, 0.1}, 1);
  const Graph g = generate_graph(10, 30, 0);
  const auto inst = sample_instance(pool, g, 100, 0.1, ProblemKind::kLeastSquaresLasso, 9, "a");
  CHECK(inst.node_count() == 10);
  for (const auto& node : inst.nodes) CHECK(node.sample_count() == 10);
  CHECK_FALSE(inst.x_star.has_value());

  const auto again = sample_instance(pool, g, 100, 0.1, ProblemKind::kLeastSquaresLasso, 9, "a");
  for (int i = 0; i < 10; ++i) CHECK(inst.nodes[i].features == again.nodes[i].features);

  CHECK_THROWS_AS(sample_instance(pool, g, 5, 0.1, ProblemKind::kLeastSquaresLasso, 9), Error);
  CHECK_THROWS_AS(sample_instance(pool, g, 105, 0.1, ProblemKind::kLeastSquaresLasso, 9), Error);
  const std::vector<Sample> tiny(pool.begin(), pool.begin() + 50);
  CHECK_THROWS_AS(sample_instance(tiny, g, 100, 0.1, ProblemKind::kLeastSquaresLasso, 9), Error);
}

TEST_CASE("instance serialization round trip") {
  const auto pool = synthetic_pool(ProblemKind::kLogistic, {3, 60, 0.0, 0.1}, 2);
  const Graph g = generate_graph(3, 3, 0);
  auto inst = sample_instance(pool, g, 30, 0.25, ProblemKind::kLogistic, 4, "inst-7");
  inst.x_star = Vec::LinSpaced(3, -1.0 / 3.0, 0.1);
  const auto path = (std::filesystem::temp_directory_path() / "amml_inst.json").string();
  save_instance(path, inst);
  const auto back = load_instance(path);
  CHECK(back.instance_id == "inst-7");
  CHECK(back.kind == ProblemKind::kLogistic);
  CHECK(back.lambda == 0.25);
  REQUIRE(back.x_star.has_value());
  CHECK(*back.x_star == *inst.x_star);
  for (int i = 0; i < 3; ++i) {
    CHECK(back.nodes[i].features == inst.nodes[i].features);
    CHECK(back.nodes[i].labels == inst.nodes[i].labels);
  }
  std::ofstream(path) << "{\"format\": \"amml-instance\"";
  CHECK_THROWS_AS(load_instance(path), Error);
}
