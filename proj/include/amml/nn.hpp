#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amml/linalg.hpp"
#include "amml/rng.hpp"

namespace amml {

struct Dense {
  Mat weight;  // out x in
  Vec bias;
};

// input -> h1 -> h2 -> output, tanh on the hidden layers, linear output.
class Mlp {
 public:
  struct Cache {
    Mat input, hidden1, hidden2;  // post-activation, one column per sample
  };

  Mlp() = default;
  Mlp(int input, int hidden1, int hidden2, int output);
  // Gaussian weights scaled by 1/sqrt(fan_in); the output layer is further scaled.
  Mlp(int input, int hidden1, int hidden2, int output, Rng& rng, double output_scale = 1.0);

  int input_dim() const { return static_cast<int>(layers_[0].weight.cols()); }
  int output_dim() const { return static_cast<int>(layers_[2].weight.rows()); }
  int hidden1() const { return static_cast<int>(layers_[0].weight.rows()); }
  int hidden2() const { return static_cast<int>(layers_[1].weight.rows()); }

  Vec forward(const Vec& input) const;
  Mat forward_batch(const Mat& inputs, Cache* cache = nullptr) const;
  // Accumulates d loss / d params into `grads` given d loss / d outputs.
  void backward(const Cache& cache, const Mat& grad_output, Mlp& grads) const;

  Mlp zeros_like() const;
  std::size_t parameter_count() const;
  Vec parameters() const;
  void set_parameters(const Vec& flat);

  std::vector<Dense>& layers() { return layers_; }
  const std::vector<Dense>& layers() const { return layers_; }
  bool operator==(const Mlp& other) const;

 private:
  std::vector<Dense> layers_{3};
};

// Diagonal Gaussian over actions with a state-independent log standard deviation.
struct GaussianPolicy {
  Mlp mean_net;
  Vec log_std;

  Vec mean(const Vec& state) const { return mean_net.forward(state); }
  double log_prob(const Vec& state, const Vec& action) const;
  double entropy() const;
  Vec sample(const Vec& state, Rng& rng) const;

  // Policy parameters (mean net then log_std) as one flat vector.
  Vec parameters() const;
  void set_parameters(const Vec& flat);
  bool operator==(const GaussianPolicy& other) const;
};

double gaussian_log_prob(const Vec& mean, const Vec& log_std, const Vec& action);

// Bias-corrected adaptive moments over a flat parameter vector.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t size, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  Vec step(const Vec& params, const Vec& grad);
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  Vec m_, v_;
  long t_ = 0;
  double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
};

class RunningNormalizer {
 public:
  RunningNormalizer() = default;
  explicit RunningNormalizer(int dim);

  // Columns are samples, merged in column order.
  void update(const Mat& batch);
  Vec normalize(const Vec& x) const;
  Mat normalize_batch(const Mat& x) const;

  int dim() const { return static_cast<int>(mean_.size()); }
  double count() const { return count_; }
  const Vec& mean() const { return mean_; }
  Vec variance() const;
  const Vec& m2() const { return m2_; }
  void restore(Vec mean, Vec m2, double count);
  bool operator==(const RunningNormalizer& other) const;

 private:
  Vec mean_, m2_;
  double count_ = 0.0;
};

// sign(z) * log(1 + |z|), elementwise.
Vec symlog(const Vec& z);

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::string kind;
  int nodes = 0;
  int dim = 0;
  int iterations_per_round = 0;
  int rounds = 0;
  int update_index = 0;
  std::vector<double> bounds;  // alpha_max, beta_min, beta_max, rho_min, rho_max
  std::string action_space = "log";
};

struct Checkpoint {
  CheckpointMeta meta;
  GaussianPolicy policy;
  Mlp value_net;
  RunningNormalizer normalizer;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
// Throws kParse on malformed or truncated files and kShape on inconsistent shapes.
Checkpoint load_checkpoint(const std::string& path);
std::string checkpoint_to_string(const Checkpoint& ckpt);
Checkpoint checkpoint_from_string(const std::string& text);

}  // namespace amml
