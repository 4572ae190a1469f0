#include "amml/rl.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "amml/error.hpp"

namespace amml {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<int> shuffled(int n, Rng& rng) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(idx[i], idx[rng.uniform_index(static_cast<std::uint64_t>(i) + 1)]);
  return idx;
}

Vec clip_norm(Vec g, double max_norm) {
  const double n = g.norm();
  if (max_norm > 0 && n > max_norm) g *= max_norm / n;
  return g;
}

Vec effective_baseline(const EnvConfig& cfg, ProblemKind kind) {
  const Vec b = cfg.baseline.size() ? cfg.baseline : baseline_action(kind);
  require(b.size() == action_dim(kind), ErrorCode::kConfig,
          "baseline action needs " + std::to_string(action_dim(kind)) + " components for " + std::string(kind_name(kind)));
  return b;
}

}  // namespace

Vec baseline_action(ProblemKind kind) { return Vec::Constant(action_dim(kind), 5.0); }

int action_dim(ProblemKind kind) { return kind == ProblemKind::kL1Lasso ? 2 : 3; }

int state_dim(ProblemKind kind, int nodes, int dim, int iterations) {
  return nodes * iterations * (kind == ProblemKind::kL1Lasso ? dim : 3 * dim);
}

std::vector<double> bounds_vector(const ActionBounds& b) {
  return {b.alpha_max, b.beta_min, b.beta_max, b.rho_min, b.rho_max};
}

ActionBounds bounds_from_vector(const std::vector<double>& v) {
  require(v.size() == 5, ErrorCode::kShape, "action bounds need five entries");
  ActionBounds b{v[0], v[1], v[2], v[3], v[4]};
  require(b.alpha_max >= 0 && b.beta_min > 0 && b.beta_max >= b.beta_min && b.rho_min > 0 && b.rho_max >= b.rho_min,
          ErrorCode::kParameter, "inconsistent action bounds");
  return b;
}

const char* action_space_name(ActionSpace space) { return space == ActionSpace::kLog ? "log" : "linear"; }

ActionSpace parse_action_space(const std::string& name) {
  if (name == "log") return ActionSpace::kLog;
  if (name == "linear") return ActionSpace::kLinear;
  fail(ErrorCode::kConfig, "unknown action space '" + name + "' (expected log or linear)");
}

ActionTriple action_from_output(const Vec& output, const EnvConfig& cfg) {
  if (cfg.action_space == ActionSpace::kLinear) return ActionTriple::clipped(output, cfg.bounds);
  // Clamp before exp so huge outputs cannot overflow; clipping does the rest.
  return ActionTriple::clipped(output.cwiseMin(50.0).array().exp().matrix(), cfg.bounds);
}

Vec output_for_action(const Vec& action, const EnvConfig& cfg) {
  if (cfg.action_space == ActionSpace::kLinear) return action;
  return action.cwiseMax(1e-8).array().log();
}

Vec action_components(const ActionTriple& a, ProblemKind kind) {
  if (kind == ProblemKind::kL1Lasso) return Vec{{a.beta(), a.rho()}};
  return Vec{{a.alpha(), a.beta(), a.rho()}};
}

double iteration_cost(double mse, const EnvConfig& cfg) {
  if (cfg.reward == RewardTransform::kLinear) return mse;
  return std::log1p(mse / cfg.reward_floor) / (std::log(10.0) * cfg.reward_scale);
}

double round_reward(const std::vector<Metrics>& trace, const EnvConfig& cfg) {
  double r = 0.0;
  for (const auto& m : trace) r -= iteration_cost(m.mse, cfg);
  return r;
}

Vec policy_input(const RunningNormalizer& normalizer, const Vec& raw) {
  return normalizer.normalize(raw) / std::sqrt(static_cast<double>(raw.size()));
}

Vec assemble_state(const RoundObservation& obs, ProblemKind kind) {
  require(!obs.empty() && !obs[0].empty(), ErrorCode::kShape, "empty observation block");
  const auto d = obs[0][0].sigma.size();
  const bool sigma_only = kind == ProblemKind::kL1Lasso;
  const Eigen::Index per = sigma_only ? d : 3 * d;
  Vec s(static_cast<Eigen::Index>(obs.size() * obs[0].size()) * per);
  Eigen::Index at = 0;
  for (const auto& node : obs) {
    require(node.size() == obs[0].size(), ErrorCode::kShape, "ragged observation block");
    for (const auto& o : node) {
      s.segment(at, d) = symlog(o.sigma);
      if (!sigma_only) {
        s.segment(at + d, d) = symlog(o.grad);
        s.segment(at + 2 * d, d) = o.eigs;
      }
      at += per;
    }
  }
  return s;
}

Environment::Environment(std::shared_ptr<const BaseModel> model, EnvConfig cfg)
    : model_(std::move(model)), cfg_(std::move(cfg)) {
  require(model_ != nullptr, ErrorCode::kParameter, "environment needs a model");
  require(cfg_.rounds >= 1 && cfg_.iterations >= 1, ErrorCode::kParameter, "rounds and iterations must be >= 1");
  require(model_->instance().x_star.has_value(), ErrorCode::kMissingOracle,
          "instance " + model_->instance().instance_id + " has no oracle solution");
  cfg_.baseline = effective_baseline(cfg_, kind());
}

int Environment::state_dim() const {
  const auto& inst = model_->instance();
  return amml::state_dim(inst.kind, static_cast<int>(inst.nodes.size()), inst.dim, cfg_.iterations);
}

Vec Environment::reset() {
  RoundObservation obs;
  state_ = model_->run_round(model_->init_network(), ActionTriple::clipped(cfg_.baseline, cfg_.bounds),
                             cfg_.iterations, &obs);
  round_ = 0;
  done_ = false;
  return assemble_state(obs, kind());
}

StepResult Environment::step(const ActionTriple& a) {
  require(!done_, ErrorCode::kRuntime, "step on a finished episode; call reset first");
  StepResult out;
  RoundObservation obs;
  try {
    state_ = model_->run_round(state_, a, cfg_.iterations, &obs, &out.trace);
    for (const auto& m : out.trace)
      if (!std::isfinite(m.mse) || m.mse > cfg_.abort_mse) out.aborted = true;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNonconverged && e.code() != ErrorCode::kDegenerateParameter) throw;
    out.aborted = true;
    out.trace.clear();
  }
  if (out.aborted) {
    // Every remaining iterate is charged as if it sat at the abort threshold.
    out.reward = -(cfg_.rounds - round_) * cfg_.iterations * iteration_cost(cfg_.abort_mse, cfg_);
    out.done = done_ = true;
    out.state = Vec::Zero(state_dim());
    ++round_;
    return out;
  }
  out.reward = round_reward(out.trace, cfg_);
  out.state = assemble_state(obs, kind());
  ++round_;
  out.done = done_ = round_ >= cfg_.rounds;
  return out;
}

Episode run_episode(Environment& env, const Checkpoint& agent, ActionMode mode, Rng* rng) {
  require(mode == ActionMode::kMean || rng != nullptr, ErrorCode::kParameter, "sampling needs a generator");
  Episode ep;
  Vec raw = env.reset();
  while (!env.done()) {
    Transition t;
    t.state = policy_input(agent.normalizer, raw);
    const Vec mean = agent.policy.mean(t.state);
    t.action = mean;
    if (mode == ActionMode::kSample)
      for (Eigen::Index j = 0; j < t.action.size(); ++j) t.action[j] += std::exp(agent.policy.log_std[j]) * rng->normal();
    t.log_prob = gaussian_log_prob(mean, agent.policy.log_std, t.action);
    t.value = agent.value_net.forward(t.state)[0];
    const ActionTriple a = action_from_output(t.action, env.config());
    auto r = env.step(a);
    t.reward = r.reward;
    t.done = r.done;
    ep.total_reward += r.reward;
    ep.actions.push_back(a);
    ep.trace.insert(ep.trace.end(), r.trace.begin(), r.trace.end());
    ep.steps.push_back(std::move(t));
    ep.aborted = r.aborted;
    raw = std::move(r.state);
  }
  ep.final_mse = ep.aborted ? std::numeric_limits<double>::infinity() : ep.trace.back().mse;
  return ep;
}

void compute_advantages(std::vector<Transition>& batch, double gamma, double gae_lambda) {
  double next_value = 0.0, gae = 0.0;
  for (auto it = batch.rbegin(); it != batch.rend(); ++it) {
    if (it->done) {
      next_value = 0.0;
      gae = 0.0;
    }
    const double delta = it->reward + gamma * next_value - it->value;
    gae = delta + gamma * gae_lambda * gae;
    it->advantage = gae;
    it->ret = gae + it->value;
    next_value = it->value;
  }
}

std::pair<double, double> clipped_surrogate_terms(double ratio, double advantage, double clip) {
  const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantage;
  return {clipped, ratio * advantage};
}

PpoLoss ppo_loss(const GaussianPolicy& policy, const Mlp& value_net, const std::vector<const Transition*>& batch,
                 const PpoConfig& cfg) {
  require(!batch.empty(), ErrorCode::kParameter, "empty minibatch");
  const int n = static_cast<int>(batch.size());
  const int sd = policy.mean_net.input_dim();
  const int ad = policy.mean_net.output_dim();
  Mat states(sd, n);
  for (int i = 0; i < n; ++i) states.col(i) = batch[i]->state;

  Mlp::Cache pc, vc;
  const Mat means = policy.mean_net.forward_batch(states, &pc);
  const Mat values = value_net.forward_batch(states, &vc);
  const Vec inv_var = (-2.0 * policy.log_std).array().exp();

  PpoLoss out;
  Mat grad_mean = Mat::Zero(ad, n);
  Vec grad_log_std = Vec::Zero(ad);
  Mat grad_value(1, n);
  for (int i = 0; i < n; ++i) {
    const auto& t = *batch[i];
    const Vec diff = t.action - means.col(i);
    const double lp = gaussian_log_prob(means.col(i), policy.log_std, t.action);
    const double ratio = std::exp(lp - t.log_prob);
    const auto [clipped, unclipped] = clipped_surrogate_terms(ratio, t.advantage, cfg.clip);
    out.policy_loss -= std::min(clipped, unclipped) / n;
    out.mean_ratio += ratio / n;
    out.max_ratio_deviation = std::max(out.max_ratio_deviation, std::abs(ratio - 1.0));
    if (std::abs(ratio - 1.0) > cfg.clip) out.clip_fraction += 1.0 / n;
    if (unclipped <= clipped) {
      const double coef = -ratio * t.advantage / n;  // d loss / d log_prob
      grad_mean.col(i) = coef * diff.cwiseProduct(inv_var);
      grad_log_std += coef * (diff.cwiseAbs2().cwiseProduct(inv_var) - Vec::Ones(ad));
    }
    const double err = values(0, i) - t.ret;
    out.value_loss += err * err / n;
    grad_value(0, i) = cfg.value_coef * 2.0 * err / n;
  }
  out.entropy = policy.entropy();
  grad_log_std -= cfg.entropy_coef * Vec::Ones(ad);
  out.loss = out.policy_loss + cfg.value_coef * out.value_loss - cfg.entropy_coef * out.entropy;

  Mlp gm = policy.mean_net.zeros_like();
  policy.mean_net.backward(pc, grad_mean, gm);
  const Vec gnet = gm.parameters();
  out.policy_grad.resize(gnet.size() + ad);
  out.policy_grad << gnet, grad_log_std;
  Mlp gv = value_net.zeros_like();
  value_net.backward(vc, grad_value, gv);
  out.value_grad = gv.parameters();
  return out;
}

PpoOptimizer::PpoOptimizer(const GaussianPolicy& policy, const Mlp& value_net, const PpoConfig& cfg)
    : cfg_(cfg),
      policy_opt_(static_cast<std::size_t>(policy.parameters().size()), cfg.lr),
      value_opt_(value_net.parameter_count(), cfg.lr) {
  require(cfg.epochs >= 0 && cfg.minibatch >= 1 && cfg.clip > 0 && cfg.lr > 0, ErrorCode::kConfig,
          "invalid optimizer settings");
}

PpoStats PpoOptimizer::update(GaussianPolicy& policy, Mlp& value_net, std::vector<Transition>& batch, Rng& rng) {
  PpoStats stats;
  if (batch.empty()) return stats;
  const int n = static_cast<int>(batch.size());
  double mean = 0.0;
  for (const auto& t : batch) mean += t.advantage / n;
  double var = 0.0;
  for (const auto& t : batch) var += (t.advantage - mean) * (t.advantage - mean) / n;
  const double sd = std::sqrt(var) + 1e-8;
  for (auto& t : batch) t.advantage = (t.advantage - mean) / sd;

  std::vector<const Transition*> all(n);
  for (int i = 0; i < n; ++i) all[i] = &batch[i];
  stats.initial_ratio_deviation = ppo_loss(policy, value_net, all, cfg_).max_ratio_deviation;

  const GaussianPolicy policy_snapshot = policy;
  const Mlp value_snapshot = value_net;
  int count = 0;
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    const auto order = shuffled(n, rng);
    for (int start = 0; start < n; start += cfg_.minibatch) {
      std::vector<const Transition*> mb;
      for (int k = start; k < std::min(n, start + cfg_.minibatch); ++k) mb.push_back(&batch[order[k]]);
      const auto l = ppo_loss(policy, value_net, mb, cfg_);
      if (!std::isfinite(l.loss) || !l.policy_grad.allFinite() || !l.value_grad.allFinite()) {
        policy = policy_snapshot;
        value_net = value_snapshot;
        stats.restored = true;
        return stats;
      }
      policy.set_parameters(policy_opt_.step(policy.parameters(), clip_norm(l.policy_grad, cfg_.max_grad_norm)));
      value_net.set_parameters(value_opt_.step(value_net.parameters(), clip_norm(l.value_grad, cfg_.max_grad_norm)));
      stats.policy_loss += l.policy_loss;
      stats.value_loss += l.value_loss;
      stats.entropy += l.entropy;
      stats.clip_fraction += l.clip_fraction;
      stats.mean_ratio += l.mean_ratio;
      ++count;
    }
  }
  if (count > 0) {
    stats.policy_loss /= count;
    stats.value_loss /= count;
    stats.entropy /= count;
    stats.clip_fraction /= count;
    stats.mean_ratio /= count;
  }
  return stats;
}

namespace {

// Shared minibatch regression of an Mlp onto column targets.
CloneStats regress(Mlp& net, const Mat& states, const Mat& targets, int epochs, double lr, int minibatch, Rng& rng) {
  CloneStats stats;
  const int n = static_cast<int>(states.cols());
  if (n == 0) return stats;
  auto full_loss = [&] { return 0.5 * (net.forward_batch(states) - targets).squaredNorm() / n; };
  stats.initial_loss = full_loss();
  Adam opt(net.parameter_count(), lr);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto order = shuffled(n, rng);
    for (int start = 0; start < n; start += minibatch) {
      const int m = std::min(n, start + minibatch) - start;
      Mat x(states.rows(), m), y(targets.rows(), m);
      for (int k = 0; k < m; ++k) {
        x.col(k) = states.col(order[start + k]);
        y.col(k) = targets.col(order[start + k]);
      }
      Mlp::Cache cache;
      const Mat out = net.forward_batch(x, &cache);
      Mlp grads = net.zeros_like();
      net.backward(cache, (out - y) / m, grads);
      net.set_parameters(opt.step(net.parameters(), grads.parameters()));
    }
  }
  stats.final_loss = full_loss();
  return stats;
}

}  // namespace

CloneStats pretrain_behavior_clone(GaussianPolicy& policy, const Mat& states, const Vec& target, int epochs,
                                   double lr, int minibatch, Rng& rng) {
  require(target.size() == policy.mean_net.output_dim(), ErrorCode::kShape, "clone target dimension mismatch");
  if (epochs > 0 && states.cols() > 0) {
    // Start from the mean offset so the state-dependent part stays small.
    policy.mean_net.layers()[2].bias += target - policy.mean_net.forward_batch(states).rowwise().mean();
  }
  return regress(policy.mean_net, states, target.replicate(1, states.cols()), epochs, lr, minibatch, rng);
}

CloneStats fit_value(Mlp& value_net, const Mat& states, const Vec& targets, int epochs, double lr, int minibatch,
                     Rng& rng) {
  require(targets.size() == states.cols(), ErrorCode::kShape, "value targets mismatch");
  return regress(value_net, states, targets.transpose(), epochs, lr, minibatch, rng);
}

double validation_mse(const Checkpoint& agent, const Models& set, const EnvConfig& cfg) {
  require(!set.empty(), ErrorCode::kParameter, "empty evaluation set");
  double total = 0.0;
  for (const auto& model : set) {
    Environment env(model, cfg);
    total += run_episode(env, agent, ActionMode::kMean, nullptr).final_mse;
  }
  return total / static_cast<double>(set.size());
}

void check_compatible(const Checkpoint& agent, const BaseModel& model, const EnvConfig& cfg) {
  const auto& inst = model.instance();
  const int nodes = static_cast<int>(inst.nodes.size());
  const int expected = state_dim(inst.kind, nodes, inst.dim, cfg.iterations);
  auto describe = [](const std::string& kind, int n, int d, int it) {
    return kind + " N=" + std::to_string(n) + " d=" + std::to_string(d) + " n=" + std::to_string(it);
  };
  require(agent.meta.kind == kind_name(inst.kind) && agent.meta.nodes == nodes && agent.meta.dim == inst.dim &&
              agent.meta.iterations_per_round == cfg.iterations && agent.policy.mean_net.input_dim() == expected &&
              agent.policy.mean_net.output_dim() == action_dim(inst.kind) &&
              agent.meta.action_space == action_space_name(cfg.action_space),
          ErrorCode::kShape,
          "checkpoint was trained for " +
              describe(agent.meta.kind, agent.meta.nodes, agent.meta.dim, agent.meta.iterations_per_round) +
              " but the instance is " + describe(std::string(kind_name(inst.kind)), nodes, inst.dim, cfg.iterations));
}

TrainResult train(const Models& train_set, const Models& val_set, const TrainConfig& cfg,
                  const std::function<void(const CurveRow&)>& progress) {
  require(!train_set.empty() && !val_set.empty(), ErrorCode::kParameter, "training needs training and validation instances");
  require(cfg.updates >= 0 && cfg.episodes_per_update >= 1 && cfg.eval_interval >= 1, ErrorCode::kConfig,
          "invalid training schedule");
  const auto& first = train_set[0]->instance();
  for (const auto* set : {&train_set, &val_set})
    for (const auto& m : *set)
      require(m->instance().kind == first.kind && m->instance().dim == first.dim &&
                  m->instance().nodes.size() == first.nodes.size(),
              ErrorCode::kShape, "all instances must share kind, node count and dimension");

  const int sd = state_dim(first.kind, static_cast<int>(first.nodes.size()), first.dim, cfg.env.iterations);
  const int ad = action_dim(first.kind);
  const Vec baseline = effective_baseline(cfg.env, first.kind);

  Rng init_rng(derive_seed(cfg.seed, {1}));
  Checkpoint agent;
  agent.meta = {cfg.seed, std::string(kind_name(first.kind)), static_cast<int>(first.nodes.size()), first.dim,
                cfg.env.iterations, cfg.env.rounds, 0, bounds_vector(cfg.env.bounds),
                action_space_name(cfg.env.action_space)};
  agent.policy = {Mlp(sd, cfg.hidden1, cfg.hidden2, ad, init_rng, 0.01), Vec::Constant(ad, cfg.init_log_std)};
  agent.value_net = Mlp(sd, cfg.hidden1, cfg.hidden2, 1, init_rng);
  agent.normalizer = RunningNormalizer(sd);

  // Baseline rollouts supply normalizer statistics, clone targets and value targets.
  const ActionTriple base = ActionTriple::clipped(baseline, cfg.env.bounds);
  std::vector<Mat> per_instance_states;
  std::vector<Vec> per_instance_returns;
  for (const auto& model : train_set) {
    Environment env(model, cfg.env);
    std::vector<Vec> states{env.reset()};
    std::vector<double> rewards;
    while (true) {
      auto r = env.step(base);
      rewards.push_back(r.reward);
      if (r.done) break;
      states.push_back(std::move(r.state));
    }
    Mat s(sd, static_cast<Eigen::Index>(states.size()));
    Vec ret(static_cast<Eigen::Index>(states.size()));
    double acc = 0.0;
    for (int t = static_cast<int>(states.size()) - 1; t >= 0; --t) {
      s.col(t) = states[t];
      acc = rewards[t] + cfg.ppo.gamma * acc;
      ret[t] = acc;
    }
    agent.normalizer.update(s);
    per_instance_states.push_back(std::move(s));
    per_instance_returns.push_back(std::move(ret));
  }

  const int ninst = static_cast<int>(train_set.size());
  const int holdout = ninst >= 2 ? std::max(1, static_cast<int>(std::lround(cfg.holdout_fraction * ninst))) : 0;
  auto stack = [&](int from, int to, Mat* states, Vec* returns) {
    Eigen::Index cols = 0;
    for (int i = from; i < to; ++i) cols += per_instance_states[i].cols();
    states->resize(sd, cols);
    returns->resize(cols);
    Eigen::Index at = 0;
    for (int i = from; i < to; ++i) {
      const auto c = per_instance_states[i].cols();
      for (Eigen::Index k = 0; k < c; ++k) states->col(at + k) = policy_input(agent.normalizer, per_instance_states[i].col(k));
      returns->segment(at, c) = per_instance_returns[i];
      at += c;
    }
  };
  Mat fit_states, held_states;
  Vec fit_returns, held_returns;
  stack(0, ninst - holdout, &fit_states, &fit_returns);
  stack(ninst - holdout, ninst, &held_states, &held_returns);

  TrainResult result;
  Rng clone_rng(derive_seed(cfg.seed, {4}));
  result.clone = pretrain_behavior_clone(agent.policy, fit_states, output_for_action(baseline, cfg.env), cfg.clone_epochs, cfg.clone_lr,
                                         cfg.ppo.minibatch, clone_rng);
  fit_value(agent.value_net, fit_states, fit_returns, cfg.clone_epochs, cfg.clone_lr, cfg.ppo.minibatch, clone_rng);
  const Mat& check = holdout > 0 ? held_states : fit_states;
  const Mat cloned = agent.policy.mean_net.forward_batch(check);
  for (Eigen::Index c = 0; c < cloned.cols(); ++c) {
    const Vec a = action_components(action_from_output(cloned.col(c), cfg.env), first.kind);
    result.holdout_max_relative_error = std::max(
        result.holdout_max_relative_error, ((a - baseline).cwiseAbs().array() / baseline.cwiseAbs().array()).maxCoeff());
  }

  result.pretrained = agent;
  result.pretrained_val_mse = validation_mse(agent, val_set, cfg.env);
  result.best = agent;
  result.best_val_mse = result.pretrained_val_mse;
  {
    CurveRow row;
    double ret = 0.0;
    for (const auto& model : train_set) {
      Environment env(model, cfg.env);
      ret += run_episode(env, agent, ActionMode::kMean, nullptr).total_reward;
    }
    row.mean_return = ret / ninst;
    row.val_mse = result.pretrained_val_mse;
    result.curve.push_back(row);
    if (progress) progress(row);
  }

  PpoOptimizer opt(agent.policy, agent.value_net, cfg.ppo);
  for (int u = 1; u <= cfg.updates; ++u) {
    std::vector<Transition> batch;
    double ret = 0.0;
    for (int e = 0; e < cfg.episodes_per_update; ++e) {
      const auto& model = train_set[static_cast<std::size_t>(((u - 1) * cfg.episodes_per_update + e) % ninst)];
      Environment env(model, cfg.env);
      Rng rng(derive_seed(cfg.seed, {2, static_cast<std::uint64_t>(u), static_cast<std::uint64_t>(e)}));
      auto ep = run_episode(env, agent, ActionMode::kSample, &rng);
      ret += ep.total_reward;
      for (auto& t : ep.steps) batch.push_back(std::move(t));
    }
    compute_advantages(batch, cfg.ppo.gamma, cfg.ppo.gae_lambda);
    Rng shuffle_rng(derive_seed(cfg.seed, {3, static_cast<std::uint64_t>(u)}));
    const auto stats = opt.update(agent.policy, agent.value_net, batch, shuffle_rng);

    CurveRow row{u, ret / cfg.episodes_per_update, kNaN, stats.clip_fraction, stats.policy_loss, stats.value_loss};
    if (u % cfg.eval_interval == 0 || u == cfg.updates) {
      row.val_mse = validation_mse(agent, val_set, cfg.env);
      if (row.val_mse < result.best_val_mse) {
        result.best_val_mse = row.val_mse;
        result.best = agent;
        result.best.meta.update_index = u;
      }
    }
    result.curve.push_back(row);
    if (progress) progress(row);
  }
  return result;
}

EvalTrace evaluate_policy(const Checkpoint& agent, std::shared_ptr<const BaseModel> model, const EnvConfig& cfg,
                          int rounds) {
  require(rounds >= 1, ErrorCode::kParameter, "rounds must be >= 1");
  check_compatible(agent, *model, cfg);
  EnvConfig long_cfg = cfg;
  long_cfg.rounds = rounds;
  EvalTrace out;
  out.instance_id = model->instance().instance_id;
  Environment env(std::move(model), long_cfg);
  const auto ep = run_episode(env, agent, ActionMode::kMean, nullptr);
  out.metrics = ep.trace;
  out.aborted = ep.aborted;
  out.first_iteration = cfg.iterations + 1;
  for (std::size_t r = 0; r < ep.actions.size(); ++r)
    for (int k = 0; k < cfg.iterations && out.actions.size() < out.metrics.size(); ++k) out.actions.push_back(ep.actions[r]);
  return out;
}

}  // namespace amml
