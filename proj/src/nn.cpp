#include "amml/nn.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "amml/error.hpp"

namespace amml {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;
constexpr int kCheckpointVersion = 1;

}  // namespace

Mlp::Mlp(int input, int hidden1, int hidden2, int output) {
  require(input > 0 && hidden1 > 0 && hidden2 > 0 && output > 0, ErrorCode::kParameter, "layer sizes must be positive");
  const int sizes[4] = {input, hidden1, hidden2, output};
  for (int l = 0; l < 3; ++l) layers_[l] = {Mat::Zero(sizes[l + 1], sizes[l]), Vec::Zero(sizes[l + 1])};
}

Mlp::Mlp(int input, int hidden1, int hidden2, int output, Rng& rng, double output_scale)
    : Mlp(input, hidden1, hidden2, output) {
  for (int l = 0; l < 3; ++l) {
    auto& w = layers_[l].weight;
    const double scale = (l == 2 ? output_scale : 1.0) / std::sqrt(static_cast<double>(w.cols()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = scale * rng.normal();
  }
}

Vec Mlp::forward(const Vec& input) const {
  require(input.size() == input_dim(), ErrorCode::kShape,
          "network input has " + std::to_string(input.size()) + " entries, expected " + std::to_string(input_dim()));
  const Vec h1 = (layers_[0].weight * input + layers_[0].bias).array().tanh();
  const Vec h2 = (layers_[1].weight * h1 + layers_[1].bias).array().tanh();
  return layers_[2].weight * h2 + layers_[2].bias;
}

Mat Mlp::forward_batch(const Mat& inputs, Cache* cache) const {
  require(inputs.rows() == input_dim(), ErrorCode::kShape, "batch input dimension mismatch");
  Mat h1 = ((layers_[0].weight * inputs).colwise() + layers_[0].bias).array().tanh();
  Mat h2 = ((layers_[1].weight * h1).colwise() + layers_[1].bias).array().tanh();
  Mat out = (layers_[2].weight * h2).colwise() + layers_[2].bias;
  if (cache) {
    cache->input = inputs;
    cache->hidden1 = std::move(h1);
    cache->hidden2 = std::move(h2);
  }
  return out;
}

void Mlp::backward(const Cache& cache, const Mat& grad_output, Mlp& grads) const {
  auto& g = grads.layers_;
  g[2].weight.noalias() += grad_output * cache.hidden2.transpose();
  g[2].bias += grad_output.rowwise().sum();
  Mat d2 = (layers_[2].weight.transpose() * grad_output).array() * (1.0 - cache.hidden2.array().square());
  g[1].weight.noalias() += d2 * cache.hidden1.transpose();
  g[1].bias += d2.rowwise().sum();
  Mat d1 = (layers_[1].weight.transpose() * d2).array() * (1.0 - cache.hidden1.array().square());
  g[0].weight.noalias() += d1 * cache.input.transpose();
  g[0].bias += d1.rowwise().sum();
}

Mlp Mlp::zeros_like() const { return Mlp(input_dim(), hidden1(), hidden2(), output_dim()); }

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

Vec Mlp::parameters() const {
  Vec flat(parameter_count());
  Eigen::Index at = 0;
  for (const auto& l : layers_) {
    flat.segment(at, l.weight.size()) = l.weight.reshaped();
    at += l.weight.size();
    flat.segment(at, l.bias.size()) = l.bias;
    at += l.bias.size();
  }
  return flat;
}

void Mlp::set_parameters(const Vec& flat) {
  require(static_cast<std::size_t>(flat.size()) == parameter_count(), ErrorCode::kShape, "parameter vector size mismatch");
  Eigen::Index at = 0;
  for (auto& l : layers_) {
    l.weight.reshaped() = flat.segment(at, l.weight.size());
    at += l.weight.size();
    l.bias = flat.segment(at, l.bias.size());
    at += l.bias.size();
  }
}

bool Mlp::operator==(const Mlp& other) const {
  for (int l = 0; l < 3; ++l) {
    const auto &a = layers_[l], &b = other.layers_[l];
    if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols()) return false;
    if (a.weight != b.weight || a.bias != b.bias) return false;
  }
  return true;
}

double gaussian_log_prob(const Vec& mean, const Vec& log_std, const Vec& action) {
  require(mean.size() == action.size() && log_std.size() == action.size(), ErrorCode::kShape, "action dimension mismatch");
  double lp = 0.0;
  for (Eigen::Index j = 0; j < action.size(); ++j) {
    const double z = (action[j] - mean[j]) * std::exp(-log_std[j]);
    lp += -kLogSqrt2Pi - log_std[j] - 0.5 * z * z;
  }
  return lp;
}

double GaussianPolicy::log_prob(const Vec& state, const Vec& action) const {
  return gaussian_log_prob(mean(state), log_std, action);
}

double GaussianPolicy::entropy() const { return log_std.size() * (0.5 + kLogSqrt2Pi) + log_std.sum(); }

Vec GaussianPolicy::sample(const Vec& state, Rng& rng) const {
  Vec a = mean(state);
  for (Eigen::Index j = 0; j < a.size(); ++j) a[j] += std::exp(log_std[j]) * rng.normal();
  return a;
}

Vec GaussianPolicy::parameters() const {
  const Vec net = mean_net.parameters();
  Vec flat(net.size() + log_std.size());
  flat << net, log_std;
  return flat;
}

void GaussianPolicy::set_parameters(const Vec& flat) {
  const auto n = static_cast<Eigen::Index>(mean_net.parameter_count());
  require(flat.size() == n + log_std.size(), ErrorCode::kShape, "policy parameter vector size mismatch");
  mean_net.set_parameters(flat.head(n));
  log_std = flat.tail(log_std.size());
}

bool GaussianPolicy::operator==(const GaussianPolicy& other) const {
  return mean_net == other.mean_net && log_std.size() == other.log_std.size() && log_std == other.log_std;
}

Adam::Adam(std::size_t size, double lr, double beta1, double beta2, double eps)
    : m_(Vec::Zero(static_cast<Eigen::Index>(size))), v_(Vec::Zero(static_cast<Eigen::Index>(size))),
      lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

Vec Adam::step(const Vec& params, const Vec& grad) {
  require(grad.size() == m_.size() && params.size() == m_.size(), ErrorCode::kShape, "optimizer state size mismatch");
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  return params.array() - lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

RunningNormalizer::RunningNormalizer(int dim) : mean_(Vec::Zero(dim)), m2_(Vec::Zero(dim)) {}

void RunningNormalizer::update(const Mat& batch) {
  require(batch.rows() == dim(), ErrorCode::kShape, "normalizer dimension mismatch");
  if (batch.cols() == 0) return;
  const double nb = static_cast<double>(batch.cols());
  const Vec mb = batch.rowwise().mean();
  const Vec m2b = (batch.colwise() - mb).array().square().rowwise().sum();
  const double total = count_ + nb;
  const Vec delta = mb - mean_;
  mean_ += delta * (nb / total);
  m2_ += m2b + delta.cwiseAbs2() * (count_ * nb / total);
  count_ = total;
}

Vec RunningNormalizer::variance() const {
  if (count_ <= 0.0) return Vec::Ones(dim());
  return m2_ / count_;
}

Vec RunningNormalizer::normalize(const Vec& x) const {
  require(x.size() == dim(), ErrorCode::kShape,
          "state has " + std::to_string(x.size()) + " entries, normalizer expects " + std::to_string(dim()));
  const Vec z = (x - mean_).array() / (variance().array() + 1e-8).sqrt();
  return z.cwiseMax(-10.0).cwiseMin(10.0);
}

Mat RunningNormalizer::normalize_batch(const Mat& x) const {
  Mat out(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) out.col(c) = normalize(x.col(c));
  return out;
}

void RunningNormalizer::restore(Vec mean, Vec m2, double count) {
  require(mean.size() == m2.size() && count >= 0.0 && (m2.array() >= 0.0).all(), ErrorCode::kShape,
          "inconsistent normalizer statistics");
  mean_ = std::move(mean);
  m2_ = std::move(m2);
  count_ = count;
}

bool RunningNormalizer::operator==(const RunningNormalizer& other) const {
  return count_ == other.count_ && mean_.size() == other.mean_.size() && mean_ == other.mean_ && m2_ == other.m2_;
}

Vec symlog(const Vec& z) { return z.array().sign() * z.array().abs().log1p(); }

namespace {

using nlohmann::json;

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec vec_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json mlp_json(const Mlp& net) {
  json layers = json::array();
  for (const auto& l : net.layers()) {
    json w = json::array();
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) w.push_back(vec_json(l.weight.row(r).transpose()));
    layers.push_back({{"rows", l.weight.rows()}, {"cols", l.weight.cols()}, {"weight", w}, {"bias", vec_json(l.bias)}});
  }
  return layers;
}

Mlp mlp_from(const json& j) {
  require(j.is_array() && j.size() == 3, ErrorCode::kShape, "checkpoint network must have three layers");
  int dims[4];
  for (int l = 0; l < 3; ++l) {
    dims[l] = j[l].at("cols").get<int>();
    dims[l + 1] = j[l].at("rows").get<int>();
    if (l > 0) require(j[l].at("cols").get<int>() == j[l - 1].at("rows").get<int>(), ErrorCode::kShape, "layer shapes do not chain");
  }
  Mlp net(dims[0], dims[1], dims[2], dims[3]);
  for (int l = 0; l < 3; ++l) {
    auto& layer = net.layers()[l];
    const auto& rows = j[l].at("weight");
    require(rows.size() == static_cast<std::size_t>(layer.weight.rows()), ErrorCode::kShape, "weight row count mismatch");
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      const Vec row = vec_from(rows[r]);
      require(row.size() == layer.weight.cols(), ErrorCode::kShape, "weight column count mismatch");
      layer.weight.row(r) = row.transpose();
    }
    layer.bias = vec_from(j[l].at("bias"));
    require(layer.bias.size() == layer.weight.rows(), ErrorCode::kShape, "bias size mismatch");
  }
  return net;
}

}  // namespace

std::string checkpoint_to_string(const Checkpoint& c) {
  json j;
  j["format"] = "amml-checkpoint";
  j["version"] = kCheckpointVersion;
  j["meta"] = {{"seed", c.meta.seed},
               {"kind", c.meta.kind},
               {"nodes", c.meta.nodes},
               {"dim", c.meta.dim},
               {"iterations_per_round", c.meta.iterations_per_round},
               {"rounds", c.meta.rounds},
               {"update_index", c.meta.update_index},
               {"state_dim", c.policy.mean_net.input_dim()},
               {"action_dim", c.policy.mean_net.output_dim()},
               {"hidden", {c.policy.mean_net.hidden1(), c.policy.mean_net.hidden2()}},
               {"bounds", c.meta.bounds},
               {"action_space", c.meta.action_space}};
  j["policy"] = {{"mean_net", mlp_json(c.policy.mean_net)}, {"log_std", vec_json(c.policy.log_std)}};
  j["value_net"] = mlp_json(c.value_net);
  j["normalizer"] = {{"count", c.normalizer.count()}, {"mean", vec_json(c.normalizer.mean())}, {"m2", vec_json(c.normalizer.m2())}};
  return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("malformed checkpoint: ") + e.what());
  }
  try {
    require(j.at("format") == "amml-checkpoint", ErrorCode::kParse, "not a checkpoint file");
    require(j.at("version") == kCheckpointVersion, ErrorCode::kShape,
            "unsupported checkpoint version " + j.at("version").dump());
    Checkpoint c;
    const auto& m = j.at("meta");
    c.meta.seed = m.at("seed").get<std::uint64_t>();
    c.meta.kind = m.at("kind").get<std::string>();
    c.meta.nodes = m.at("nodes").get<int>();
    c.meta.dim = m.at("dim").get<int>();
    c.meta.iterations_per_round = m.at("iterations_per_round").get<int>();
    c.meta.rounds = m.at("rounds").get<int>();
    c.meta.update_index = m.at("update_index").get<int>();
    c.meta.bounds = m.at("bounds").get<std::vector<double>>();
    c.meta.action_space = m.at("action_space").get<std::string>();
    c.policy.mean_net = mlp_from(j.at("policy").at("mean_net"));
    c.policy.log_std = vec_from(j.at("policy").at("log_std"));
    c.value_net = mlp_from(j.at("value_net"));
    const auto& nj = j.at("normalizer");
    c.normalizer.restore(vec_from(nj.at("mean")), vec_from(nj.at("m2")), nj.at("count").get<double>());
    const int state_dim = m.at("state_dim").get<int>();
    const int action_dim = m.at("action_dim").get<int>();
    require(c.policy.mean_net.input_dim() == state_dim && c.value_net.input_dim() == state_dim &&
                c.normalizer.dim() == state_dim,
            ErrorCode::kShape, "checkpoint state dimension is inconsistent");
    require(c.policy.mean_net.output_dim() == action_dim && c.policy.log_std.size() == action_dim,
            ErrorCode::kShape, "checkpoint action dimension is inconsistent");
    require(c.value_net.output_dim() == 1, ErrorCode::kShape, "value network must have one output");
    require(c.policy.log_std.allFinite(), ErrorCode::kShape, "checkpoint log_std is not finite");
    return c;
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write checkpoint " + path);
  out << checkpoint_to_string(ckpt);
  require(static_cast<bool>(out), ErrorCode::kIo, "failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open checkpoint " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_string(buf.str());
}

}  // namespace amml
