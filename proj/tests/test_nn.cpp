#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "amml/error.hpp"
#include "amml/nn.hpp"

using namespace amml;

namespace {

Mat random_mat(int r, int c, Rng& rng) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

std::string temp_path(const std::string& name) { return (std::filesystem::temp_directory_path() / name).string(); }

}  // namespace

TEST_CASE("forward: trivial nets") {
  Mlp net(3, 4, 5, 2);
  net.layers()[2].bias << 0.5, -1.5;
  Vec x(3);
  x << 1, 2, 3;
  const Vec y = net.forward(x);
  CHECK(y[0] == 0.5);
  CHECK(y[1] == -1.5);

  Rng rng(1);
  Mlp random(3, 4, 5, 2, rng);
  for (auto& l : random.layers()) l.bias.setZero();
  CHECK(random.forward(Vec::Zero(3)).isZero(0.0));
  CHECK_THROWS_AS(random.forward(Vec::Zero(4)), Error);
}

TEST_CASE("forward_batch agrees with forward") {
  Rng rng(2);
  Mlp net(6, 8, 7, 3, rng);
  const Mat x = random_mat(6, 5, rng);
  const Mat y = net.forward_batch(x);
  for (int c = 0; c < 5; ++c) CHECK((y.col(c) - net.forward(x.col(c))).norm() <= 1e-14);
}

TEST_CASE("backward matches central finite differences") {
  Rng rng(3);
  Mlp net(5, 6, 4, 3, rng);
  for (auto& l : net.layers())
    for (Eigen::Index k = 0; k < l.bias.size(); ++k) l.bias[k] = 0.3 * rng.normal();
  const Mat x = random_mat(5, 7, rng);
  const Mat target = random_mat(3, 7, rng);
  auto loss = [&](const Mlp& n) { return 0.5 * (n.forward_batch(x) - target).squaredNorm(); };

  Mlp::Cache cache;
  const Mat out = net.forward_batch(x, &cache);
  Mlp grads = net.zeros_like();
  net.backward(cache, out - target, grads);
  const Vec analytic = grads.parameters();
  const Vec p = net.parameters();
  const double eps = 1e-5;
  double worst = 0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    Mlp plus = net, minus = net;
    Vec pp = p, pm = p;
    pp[k] += eps;
    pm[k] -= eps;
    plus.set_parameters(pp);
    minus.set_parameters(pm);
    const double fd = (loss(plus) - loss(minus)) / (2 * eps);
    worst = std::max(worst, std::abs(fd - analytic[k]) / std::max(1.0, std::abs(fd)));
  }
  CHECK(worst <= 1e-4);

  Mlp zero = net.zeros_like();
  net.backward(cache, Mat::Zero(3, 7), zero);
  CHECK(zero.parameters().isZero(0.0));
}

TEST_CASE("parameters round trip") {
  Rng rng(4);
  Mlp net(3, 4, 4, 2, rng);
  Mlp copy = net.zeros_like();
  copy.set_parameters(net.parameters());
  CHECK(copy == net);
  CHECK(net.parameter_count() == 3 * 4 + 4 + 4 * 4 + 4 + 4 * 2 + 2);
  CHECK_THROWS_AS(copy.set_parameters(Vec::Zero(3)), Error);
}

TEST_CASE("log_prob") {
  const Vec a = Vec::Constant(1, 0.7);
  CHECK(gaussian_log_prob(a, Vec::Zero(1), a) == doctest::Approx(-0.91894).epsilon(1e-5));
  const Vec a3 = Vec::Constant(3, -2.0);
  CHECK(gaussian_log_prob(a3, Vec::Zero(3), a3) == doctest::Approx(3 * -0.9189385332).epsilon(1e-9));
  double prev = 1e300;
  for (int k = 0; k < 20; ++k) {
    const double lp = gaussian_log_prob(a, Vec::Zero(1), Vec::Constant(1, 0.7 + 0.1 * k));
    CHECK(lp < prev);
    prev = lp;
  }

  // Trapezoid over a wide grid.
  const Vec mu = Vec::Constant(1, 1.3), ls = Vec::Constant(1, std::log(0.6));
  double mass = 0;
  const double h = 1e-3;
  for (int k = -20000; k <= 20000; ++k) mass += h * std::exp(gaussian_log_prob(mu, ls, Vec::Constant(1, 1.3 + k * h)));
  CHECK(std::abs(mass - 1.0) <= 1e-4);

  GaussianPolicy pol{Mlp(2, 3, 3, 2), Vec::Constant(2, std::log(2.0))};
  CHECK(pol.entropy() == doctest::Approx(2 * (0.5 + 0.5 * std::log(2 * M_PI) + std::log(2.0))));
  CHECK(pol.log_prob(Vec::Zero(2), Vec::Zero(2)) == doctest::Approx(2 * (-0.9189385332 - std::log(2.0))));
}

TEST_CASE("Adam") {
  Adam adam(3, 0.01);
  const Vec p = Vec::Constant(3, 1.0);
  CHECK(adam.step(p, Vec::Zero(3)) == p);

  Adam steady(2, 0.01);
  Vec q = Vec::Zero(2);
  Vec g(2);
  g << 3.0, -0.2;
  Vec last = q;
  for (int k = 0; k < 500; ++k) {
    last = q;
    q = steady.step(q, g);
  }
  const Vec stride = q - last;
  CHECK(stride[0] == doctest::Approx(-0.01).epsilon(1e-3));
  CHECK(stride[1] == doctest::Approx(0.01).epsilon(1e-3));

  Adam a1(2, 0.1), a2(2, 0.1);
  CHECK(a1.step(q, g) == a2.step(q, g));
}

TEST_CASE("RunningNormalizer matches two-pass statistics") {
  Rng rng(5);
  const Mat data = random_mat(4, 300, rng) * 7.0 + Mat::Constant(4, 300, 3.0);
  RunningNormalizer norm(4);
  for (int start = 0; start < 300;) {
    const int len = 1 + static_cast<int>(rng.uniform_index(40));
    const int take = std::min(len, 300 - start);
    norm.update(data.middleCols(start, take));
    start += take;
  }
  const Vec mean = data.rowwise().mean();
  const Vec var = (data.colwise() - mean).array().square().rowwise().mean();
  CHECK((norm.mean() - mean).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((norm.variance() - var).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(norm.count() == 300);
  CHECK((norm.variance().array() >= 0).all());
  CHECK(std::abs(norm.normalize(mean).norm()) <= 1e-9);
}

TEST_CASE("symlog") {
  Vec z(4);
  z << 0.0, 1.0, -1.0, std::exp(2.0) - 1.0;
  const Vec s = symlog(z);
  CHECK(s[0] == 0.0);
  CHECK(s[1] == doctest::Approx(std::log(2.0)));
  CHECK(s[2] == doctest::Approx(-std::log(2.0)));
  CHECK(s[3] == doctest::Approx(2.0));
}

TEST_CASE("checkpoint round trip and guards") {
  Rng rng(6);
  Checkpoint c;
  c.meta = {42, "least_squares_lasso", 5, 4, 10, 10, 7, {20, 1e-6, 20, 1e-3, 20}};
  c.policy = {Mlp(12, 8, 8, 3, rng, 0.01), Vec::Constant(3, std::log(0.7))};
  c.value_net = Mlp(12, 8, 8, 1, rng);
  c.normalizer = RunningNormalizer(12);
  c.normalizer.update(random_mat(12, 9, rng) * 1e-3 / 3.0);
  const std::string path = temp_path("amml_ckpt_test.json");
  save_checkpoint(path, c);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.policy == c.policy);
  CHECK(back.value_net == c.value_net);
  CHECK(back.normalizer == c.normalizer);
  CHECK(back.meta.seed == 42);
  CHECK(back.meta.kind == "least_squares_lasso");
  CHECK(back.meta.update_index == 7);
  CHECK(checkpoint_to_string(back) == checkpoint_to_string(c));

  const std::string text = checkpoint_to_string(c);
  CHECK_THROWS_AS(checkpoint_from_string(text.substr(0, text.size() / 2)), Error);
  std::string bumped = text;
  bumped.replace(bumped.find("\"version\": 1"), 12, "\"version\": 9");
  try {
    checkpoint_from_string(bumped);
    FAIL("expected version error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kShape);
  }
  CHECK_THROWS_AS(load_checkpoint(temp_path("amml_missing_ckpt.json")), Error);
  std::remove(path.c_str());
}
