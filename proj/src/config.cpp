#include "amml/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "amml/error.hpp"

namespace amml {

namespace {

using nlohmann::json;

// Reads known keys from one object and rejects the rest.
class Reader {
 public:
  Reader(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    require(j_.is_object(), ErrorCode::kConfig, "config section '" + name_ + "' must be an object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      fail(ErrorCode::kConfig, "config key '" + name_ + "." + key + "': " + e.what());
    }
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key))
        fail(ErrorCode::kConfig, "unknown config key '" + (name_.empty() ? key : name_ + "." + key) + "'");
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

void check(bool ok, const std::string& what) { require(ok, ErrorCode::kConfig, "invalid config: " + what); }

void read_bounds(const json& j, ActionBounds& b) {
  Reader r(j, "engine.bounds");
  r.get("alpha_max", b.alpha_max);
  r.get("beta_min", b.beta_min);
  r.get("beta_max", b.beta_max);
  r.get("rho_min", b.rho_min);
  r.get("rho_max", b.rho_max);
  r.finish();
  bounds_from_vector(bounds_vector(b));
}

}  // namespace

Config config_from_json(const json& j) {
  Config c;
  Reader root(j, "");

  if (const auto* s = root.child("topology")) {
    Reader r(*s, "topology");
    r.get("nodes", c.topology.nodes);
    r.get("edges", c.topology.edges);
    r.finish();
  }

  if (const auto* s = root.child("problem")) {
    Reader r(*s, "problem");
    std::string kind(kind_name(c.problem.kind));
    r.get("kind", kind);
    try {
      c.problem.kind = parse_kind(kind);
    } catch (const Error& e) {
      fail(ErrorCode::kConfig, std::string("problem.kind: ") + e.what());
    }
    r.get("source", c.problem.source);
    r.get("dataset", c.problem.dataset);
    r.get("path", c.problem.path);
    r.get("dim", c.problem.dim);
    r.get("pool_size", c.problem.pool_size);
    r.get("correlation", c.problem.correlation);
    r.get("noise", c.problem.noise);
    r.get("samples", c.problem.samples);
    r.get("lambda", c.problem.lambda);
    r.get("train", c.problem.train);
    r.get("val", c.problem.val);
    r.get("test", c.problem.test);
    r.finish();
  }

  if (const auto* s = root.child("engine")) {
    Reader r(*s, "engine");
    auto& env = c.train.env;
    r.get("iterations_per_round", env.iterations);
    r.get("rounds", env.rounds);
    r.get("eval_rounds", c.eval_rounds);
    r.get("abort_mse", env.abort_mse);
    std::string reward = env.reward == RewardTransform::kLog ? "log" : "linear";
    r.get("reward", reward);
    check(reward == "log" || reward == "linear", "engine.reward must be log or linear");
    env.reward = reward == "log" ? RewardTransform::kLog : RewardTransform::kLinear;
    r.get("reward_scale", env.reward_scale);
    r.get("reward_floor", env.reward_floor);
    std::vector<double> baseline;
    r.get("baseline_action", baseline);
    if (!baseline.empty()) env.baseline = Eigen::Map<const Vec>(baseline.data(), static_cast<Eigen::Index>(baseline.size()));
    if (const auto* b = r.child("bounds")) read_bounds(*b, env.bounds);
    r.get("inner_tol", c.inner.tol);
    r.get("inner_max_iter", c.inner.max_inner);
    r.get("oracle_tol", c.oracle.tol);
    r.get("oracle_max_iter", c.oracle.max_iter);
    r.get("fixed_alpha", c.compare.alpha);
    r.get("fixed_beta", c.compare.beta);
    r.get("fixed_rho", c.compare.rho);
    r.get("pg_extra_steps", c.compare.pg_extra_steps);
    r.finish();
  }

  if (const auto* s = root.child("policy")) {
    Reader r(*s, "policy");
    r.get("hidden1", c.train.hidden1);
    r.get("hidden2", c.train.hidden2);
    r.get("init_log_std", c.train.init_log_std);
    std::string space = action_space_name(c.train.env.action_space);
    r.get("action_space", space);
    c.train.env.action_space = parse_action_space(space);
    r.get("clone_epochs", c.train.clone_epochs);
    r.get("clone_lr", c.train.clone_lr);
    r.get("holdout_fraction", c.train.holdout_fraction);
    r.finish();
  }

  if (const auto* s = root.child("ppo")) {
    Reader r(*s, "ppo");
    auto& p = c.train.ppo;
    r.get("gamma", p.gamma);
    r.get("gae_lambda", p.gae_lambda);
    r.get("clip", p.clip);
    r.get("epochs", p.epochs);
    r.get("minibatch", p.minibatch);
    r.get("lr", p.lr);
    r.get("entropy_coef", p.entropy_coef);
    r.get("value_coef", p.value_coef);
    r.get("max_grad_norm", p.max_grad_norm);
    r.get("updates", c.train.updates);
    r.get("episodes_per_update", c.train.episodes_per_update);
    r.get("eval_interval", c.train.eval_interval);
    r.finish();
  }

  if (const auto* s = root.child("io")) {
    Reader r(*s, "io");
    r.get("out", c.out);
    r.get("seed", c.seed);
    r.finish();
  }
  root.finish();

  const auto& p = c.problem;
  check(c.topology.nodes >= 2, "topology.nodes must be >= 2");
  check(c.topology.edges >= c.topology.nodes - 1 && c.topology.edges <= c.topology.nodes * (c.topology.nodes - 1) / 2,
        "topology.edges must allow a connected simple graph");
  check(p.source == "synthetic" || p.source == "uci", "problem.source must be synthetic or uci");
  if (p.source == "uci") {
    parse_dataset_format(p.dataset);
    check(!p.path.empty(), "problem.path is required for uci data");
  }
  check(p.dim >= 1 && p.pool_size >= p.samples, "problem.dim >= 1 and pool_size >= samples");
  check(p.samples >= c.topology.nodes, "problem.samples must give every node a sample");
  check(p.correlation >= 0 && p.correlation < 1 && p.noise >= 0 && p.lambda >= 0, "problem data parameters");
  check(p.train >= 1 && p.val >= 1 && p.test >= 1, "problem splits must be nonempty");
  check(c.train.env.rounds >= 1 && c.train.env.iterations >= 1 && c.eval_rounds >= 1, "engine rounds and iterations");
  check(c.train.env.reward_scale > 0 && c.train.env.reward_floor > 0 && c.train.env.abort_mse > 0,
        "engine reward settings");
  check(c.inner.tol > 0 && c.inner.max_inner >= 1 && c.oracle.tol > 0 && c.oracle.max_iter >= 1, "solver tolerances");
  check(!c.compare.alpha.empty() && !c.compare.beta.empty() && !c.compare.rho.empty(), "fixed-policy grid");
  check(c.train.hidden1 >= 1 && c.train.hidden2 >= 1 && c.train.clone_epochs >= 0 && c.train.clone_lr > 0,
        "policy settings");
  check(c.train.holdout_fraction >= 0 && c.train.holdout_fraction < 1, "policy.holdout_fraction in [0, 1)");
  check(c.train.ppo.epochs >= 0 && c.train.ppo.minibatch >= 1 && c.train.ppo.lr > 0 && c.train.ppo.clip > 0,
        "ppo settings");
  check(c.train.updates >= 0 && c.train.episodes_per_update >= 1 && c.train.eval_interval >= 1, "ppo schedule");
  return c;
}

json config_to_json(const Config& c) {
  const auto& env = c.train.env;
  const auto& p = c.train.ppo;
  json j;
  j["topology"] = {{"nodes", c.topology.nodes}, {"edges", c.topology.edges}};
  j["problem"] = {{"kind", std::string(kind_name(c.problem.kind))},
                  {"source", c.problem.source},
                  {"dataset", c.problem.dataset},
                  {"path", c.problem.path},
                  {"dim", c.problem.dim},
                  {"pool_size", c.problem.pool_size},
                  {"correlation", c.problem.correlation},
                  {"noise", c.problem.noise},
                  {"samples", c.problem.samples},
                  {"lambda", c.problem.lambda},
                  {"train", c.problem.train},
                  {"val", c.problem.val},
                  {"test", c.problem.test}};
  j["engine"] = {{"iterations_per_round", env.iterations},
                 {"rounds", env.rounds},
                 {"eval_rounds", c.eval_rounds},
                 {"abort_mse", env.abort_mse},
                 {"reward", env.reward == RewardTransform::kLog ? "log" : "linear"},
                 {"reward_scale", env.reward_scale},
                 {"reward_floor", env.reward_floor},
                 {"baseline_action", std::vector<double>(env.baseline.data(), env.baseline.data() + env.baseline.size())},
                 {"bounds",
                  {{"alpha_max", env.bounds.alpha_max},
                   {"beta_min", env.bounds.beta_min},
                   {"beta_max", env.bounds.beta_max},
                   {"rho_min", env.bounds.rho_min},
                   {"rho_max", env.bounds.rho_max}}},
                 {"inner_tol", c.inner.tol},
                 {"inner_max_iter", c.inner.max_inner},
                 {"oracle_tol", c.oracle.tol},
                 {"oracle_max_iter", c.oracle.max_iter},
                 {"fixed_alpha", c.compare.alpha},
                 {"fixed_beta", c.compare.beta},
                 {"fixed_rho", c.compare.rho},
                 {"pg_extra_steps", c.compare.pg_extra_steps}};
  j["policy"] = {{"hidden1", c.train.hidden1},
                 {"hidden2", c.train.hidden2},
                 {"init_log_std", c.train.init_log_std},
                 {"action_space", action_space_name(env.action_space)},
                 {"clone_epochs", c.train.clone_epochs},
                 {"clone_lr", c.train.clone_lr},
                 {"holdout_fraction", c.train.holdout_fraction}};
  j["ppo"] = {{"gamma", p.gamma},
              {"gae_lambda", p.gae_lambda},
              {"clip", p.clip},
              {"epochs", p.epochs},
              {"minibatch", p.minibatch},
              {"lr", p.lr},
              {"entropy_coef", p.entropy_coef},
              {"value_coef", p.value_coef},
              {"max_grad_norm", p.max_grad_norm},
              {"updates", c.train.updates},
              {"episodes_per_update", c.train.episodes_per_update},
              {"eval_interval", c.train.eval_interval}};
  j["io"] = {{"out", c.out}, {"seed", c.seed}};
  return j;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, "config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

Config miniature_config() {
  Config c;
  c.topology = {5, 6};
  c.problem.dim = 4;
  c.problem.pool_size = 400;
  c.problem.correlation = 0.8;
  c.problem.noise = 0.5;
  c.problem.samples = 50;
  c.problem.lambda = 0.05;
  c.problem.train = c.problem.val = c.problem.test = 5;
  c.train.ppo.lr = 1e-3;
  c.train.init_log_std = -0.7;
  c.train.updates = 200;
  return c;
}

}  // namespace amml
