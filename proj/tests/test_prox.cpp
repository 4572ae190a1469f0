#include <doctest.h>

#include <cmath>
#include <functional>

#include "amml/error.hpp"
#include "amml/prox.hpp"
#include "amml/rng.hpp"

using namespace amml;

namespace {

// Coarse-to-fine grid search for a convex function on a box around `center`.
Vec grid_minimize(const std::function<double(const Vec&)>& f, Vec center, double radius, int levels = 30) {
  const int d = static_cast<int>(center.size());
  const int per_axis = 21;
  for (int level = 0; level < levels; ++level) {
    Vec best = center;
    double best_val = f(center);
    const int total = d == 1 ? per_axis : per_axis * per_axis;
    for (int idx = 0; idx < total; ++idx) {
      Vec p = center;
      p[0] += radius * (2.0 * (idx % per_axis) / (per_axis - 1) - 1.0);
      if (d == 2) p[1] += radius * (2.0 * (idx / per_axis) / (per_axis - 1) - 1.0);
      const double v = f(p);
      if (v < best_val) {
        best_val = v;
        best = p;
      }
    }
    center = best;
    radius *= 0.5;
  }
  return center;
}

// Independent subgradient distance for 1/2 x'Mx + c'x + lambda |x|_1.
double lasso_kkt(const Mat& m, const Vec& c, double lambda, const Vec& x) {
  const Vec g = m * x + c;
  double acc = 0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    double r;
    if (x[k] > 0) r = g[k] + lambda;
    else if (x[k] < 0) r = g[k] - lambda;
    else r = std::max(0.0, std::abs(g[k]) - lambda);
    acc += r * r;
  }
  return std::sqrt(acc);
}

Mat random_spd(int d, Rng& rng, double shift) {
  Mat a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
  Mat m = a * a.transpose() / d;
  m.diagonal().array() += shift;
  return m;
}

Vec random_vec(int d, Rng& rng, double scale = 1.0) {
  Vec v(d);
  for (int k = 0; k < d; ++k) v[k] = scale * rng.normal();
  return v;
}

LocalObjective random_l1(int m, int d, double lambda, Rng& rng) {
  LocalObjective o;
  o.kind = ProblemKind::kL1Lasso;
  o.lambda = lambda;
  o.features.resize(m, d);
  o.labels.resize(m);
  for (int j = 0; j < m; ++j) {
    for (int k = 0; k < d; ++k) o.features(j, k) = rng.normal();
    o.labels[j] = rng.normal();
  }
  return o;
}

double nonsmooth_objective(double beta, const Vec& linear, const LocalObjective& obj, const Vec& x) {
  return 0.5 * beta * x.squaredNorm() + linear.dot(x) + nonsmooth_value(obj, x);
}

}  // namespace

TEST_CASE("soft_threshold") {
  CHECK(soft_threshold(3.0, 1.0) == 2.0);
  CHECK(soft_threshold(0.5, 1.0) == 0.0);
  CHECK(soft_threshold(-3.0, 1.0) == -2.0);
  Vec v(3);
  v << 3.0, 0.5, -3.0;
  const Vec out = soft_threshold(v, 1.0);
  CHECK(out[0] == 2.0);
  CHECK(out[1] == 0.0);
  CHECK(out[2] == -2.0);
  CHECK_THROWS_AS(soft_threshold(v, -1.0), Error);
}

TEST_CASE("solve_smooth") {
  QuadraticTerm q{2.0 * Mat::Identity(2, 2), Vec(2)};
  q.linear << 4, -2;
  auto r = solve_smooth(q);
  CHECK(r.x[0] == doctest::Approx(-2.0));
  CHECK(r.x[1] == doctest::Approx(1.0));

  QuadraticTerm id{Mat::Identity(3, 3), Vec::Zero(3)};
  CHECK(solve_smooth(id).x.isZero(0.0));

  Mat m(2, 2);
  m << 2, 1, 1, 2;
  QuadraticTerm q2{m, Vec::Constant(2, -3.0)};
  r = solve_smooth(q2);
  CHECK(r.x[0] == doctest::Approx(1.0));
  CHECK(r.x[1] == doctest::Approx(1.0));
  CHECK(r.residual <= 1e-12);

  Mat indefinite(2, 2);
  indefinite << 1, 0, 0, -1;
  try {
    solve_smooth({indefinite, Vec::Zero(2)});
    FAIL("expected degenerate-parameter error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerateParameter);
  }
}

TEST_CASE("solve_lasso_quadratic: closed-form and reduction cases") {
  QuadraticTerm diag{2.0 * Mat::Identity(2, 2), Vec(2)};
  diag.linear << -3, 0.5;
  auto r = solve_lasso_quadratic(diag, 1.0, {});
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.x[1] == 0.0);

  QuadraticTerm tiny{Mat::Identity(1, 1), Vec::Constant(1, -0.3)};
  CHECK(solve_lasso_quadratic(tiny, 1.0, {}).x[0] == 0.0);

  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    QuadraticTerm q{random_spd(4, rng, 0.5), random_vec(4, rng)};
    const auto lasso = solve_lasso_quadratic(q, 0.0, {});
    const auto smooth = solve_smooth(q);
    CHECK((lasso.x - smooth.x).norm() <= 1e-9);
  }
}

TEST_CASE("solve_lasso_quadratic: diagonal matrices match the per-coordinate formula") {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + trial % 6;
    Vec diag(d);
    for (int k = 0; k < d; ++k) diag[k] = rng.uniform(0.1, 5.0);
    const Vec c = random_vec(d, rng, 2.0);
    const double lambda = rng.uniform(0.0, 1.5);
    const auto r = solve_lasso_quadratic({diag.asDiagonal().toDenseMatrix(), c}, lambda, {});
    for (int k = 0; k < d; ++k) CHECK(std::abs(r.x[k] - soft_threshold(-c[k], lambda) / diag[k]) <= 1e-8);
  }
}

TEST_CASE("solve_lasso_quadratic: certified residual, uniqueness, restart monotonicity") {
  Rng rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const int d = 2 + trial % 8;
    QuadraticTerm q{random_spd(d, rng, trial % 2 ? 1e-2 : 1.0), random_vec(d, rng, 3.0)};
    const double lambda = rng.uniform(0.0, 2.0);
    const InnerOptions opts{1e-10, 5000};
    std::vector<double> restarts;
    const auto a = solve_lasso_quadratic(q, lambda, opts, nullptr, &restarts);
    CHECK(a.residual <= opts.tol);
    CHECK(lasso_kkt(q.matrix, q.linear, lambda, a.x) <= 10 * opts.tol);
    const Vec start = random_vec(d, rng, 10.0);
    const auto b = solve_lasso_quadratic(q, lambda, opts, &start);
    CHECK((a.x - b.x).norm() <= 10 * opts.tol / std::max(1e-2, symmetric_eigenvalues(q.matrix)[0]));
    for (std::size_t k = 1; k < restarts.size(); ++k) CHECK(restarts[k] <= restarts[k - 1]);
  }
}

TEST_CASE("solve_lasso_quadratic: iteration cap yields nonconverged error with best iterate") {
  Rng rng(8);
  QuadraticTerm q{random_spd(8, rng, 1e-3), Vec::Constant(8, 5.0)};
  try {
    solve_lasso_quadratic(q, 0.1, {1e-10, 3});
    FAIL("expected nonconverged error");
  } catch (const NonconvergedError& e) {
    CHECK(e.code() == ErrorCode::kNonconverged);
    CHECK(e.best().size() == 8);
    CHECK(e.residual() > 1e-10);
  }
}

TEST_CASE("solve_nonsmooth: one-dimensional cases") {
  LocalObjective obj;
  obj.kind = ProblemKind::kL1Lasso;
  obj.features = Mat::Ones(1, 1);
  obj.labels = Vec::Constant(1, 2.0);
  obj.lambda = 0.0;
  auto r = solve_nonsmooth(1.0, Vec::Zero(1), obj, {});
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-10));

  obj.lambda = 1e6;
  r = solve_nonsmooth(1.0, Vec::Constant(1, 0.7), obj, {});
  CHECK(r.x[0] == 0.0);

  CHECK_THROWS_AS(solve_nonsmooth(0.0, Vec::Zero(1), obj, {}), Error);
}

TEST_CASE("solve_nonsmooth: matches grid search in 1-D and 2-D") {
  Rng rng(9);
  for (int trial = 0; trial < 60; ++trial) {
    const int d = 1 + trial % 2;
    const auto obj = random_l1(1 + trial % 5, d, rng.uniform(0.0, 0.5), rng);
    const double beta = rng.uniform(0.05, 3.0);
    const Vec linear = random_vec(d, rng);
    const auto r = solve_nonsmooth(beta, linear, obj, {});
    CHECK(r.residual <= 1e-10);
    auto f = [&](const Vec& x) { return nonsmooth_objective(beta, linear, obj, x); };
    const Vec grid = grid_minimize(f, Vec::Zero(d), 20.0);
    // Axis grids can stall on a kink ridge in 2-D, so only the value is compared there.
    if (d == 1) CHECK((r.x - grid).norm() <= 1e-3);
    CHECK(f(r.x) <= f(grid) + 1e-9);
  }
}

TEST_CASE("solve_nonsmooth: residual certificate and warm-start agreement") {
  Rng rng(10);
  for (int trial = 0; trial < 40; ++trial) {
    const int d = 2 + trial % 4;
    const auto obj = random_l1(10, d, 0.1, rng);
    const double beta = rng.uniform(0.1, 10.0);
    const Vec linear = random_vec(d, rng, 2.0);
    const InnerOptions opts{1e-10, 5000};
    const auto a = solve_nonsmooth(beta, linear, obj, opts);
    CHECK(composite_residual(a.x, beta * a.x + linear, abs_loss_of(obj), obj.lambda) <= 10 * opts.tol);
    const Vec start = random_vec(d, rng, 5.0);
    const auto b = solve_nonsmooth(beta, linear, obj, opts, &start);
    CHECK((a.x - b.x).norm() <= 10 * opts.tol / beta + 1e-12);
    // Random probes never beat the solution.
    const double fa = nonsmooth_objective(beta, linear, obj, a.x);
    for (int p = 0; p < 20; ++p) CHECK(fa <= nonsmooth_objective(beta, linear, obj, a.x + random_vec(d, rng, 1e-3)) + 1e-12);
  }
}

TEST_CASE("composite_residual is positive away from the optimum") {
  Rng rng(13);
  const auto obj = random_l1(6, 3, 0.2, rng);
  const Vec linear = random_vec(3, rng);
  const auto r = solve_nonsmooth(1.0, linear, obj, {});
  const Vec off = r.x + Vec::Constant(3, 0.5);
  CHECK(composite_residual(off, off + linear, abs_loss_of(obj), obj.lambda) > 1e-3);
}
