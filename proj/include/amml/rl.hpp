#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "amml/engine.hpp"
#include "amml/nn.hpp"

namespace amml {

enum class RewardTransform { kLog, kLinear };
// Space the policy's Gaussian lives in; kLog means action = exp(output).
enum class ActionSpace { kLog, kLinear };

struct EnvConfig {
  int rounds = 10;      // T
  int iterations = 10;  // n engine steps per round
  ActionBounds bounds;
  double abort_mse = 1e6;
  RewardTransform reward = RewardTransform::kLog;
  double reward_scale = 10.0;
  double reward_floor = 1e-6;  // MSE below this is nearly free under kLog
  Vec baseline;  // empty: baseline_action(kind)
  ActionSpace action_space = ActionSpace::kLog;
};

Vec baseline_action(ProblemKind kind);
int action_dim(ProblemKind kind);
int state_dim(ProblemKind kind, int nodes, int dim, int iterations);
std::vector<double> bounds_vector(const ActionBounds& b);
ActionBounds bounds_from_vector(const std::vector<double>& v);
const char* action_space_name(ActionSpace space);
ActionSpace parse_action_space(const std::string& name);

// Policy output <-> box action.
ActionTriple action_from_output(const Vec& output, const EnvConfig& cfg);
Vec output_for_action(const Vec& action, const EnvConfig& cfg);
// (alpha, beta, rho), or (beta, rho) for l1-regression.
Vec action_components(const ActionTriple& a, ProblemKind kind);

// Cost of one iterate, log10(1 + mse / floor) / scale or mse (>= 0, zero iff
// mse == 0), and the round reward (<= 0).
double iteration_cost(double mse, const EnvConfig& cfg);
double round_reward(const std::vector<Metrics>& trace, const EnvConfig& cfg);

// Flattened observation block: node-major, then iteration, then
// (symlog sigma, symlog grad, eigs); sigma only for l1-regression.
Vec assemble_state(const RoundObservation& obs, ProblemKind kind);

// Standardized state scaled by 1/sqrt(dim), so the first layer starts out
// nearly state independent however large the observation block is.
Vec policy_input(const RunningNormalizer& normalizer, const Vec& raw);

struct StepResult {
  Vec state;
  double reward = 0.0;
  bool done = false;
  bool aborted = false;
  std::vector<Metrics> trace;
};

class Environment {
 public:
  Environment(std::shared_ptr<const BaseModel> model, EnvConfig cfg);

  // Zero start, one round under the baseline action, returns s0.
  Vec reset();
  StepResult step(const ActionTriple& a);

  int round() const { return round_; }
  bool done() const { return done_; }
  const NetworkState& network() const { return state_; }
  const BaseModel& model() const { return *model_; }
  const EnvConfig& config() const { return cfg_; }
  ProblemKind kind() const { return model_->instance().kind; }
  int state_dim() const;
  int action_dim() const { return amml::action_dim(kind()); }

 private:
  std::shared_ptr<const BaseModel> model_;
  EnvConfig cfg_;
  NetworkState state_;
  int round_ = 0;
  bool done_ = true;
};

struct Transition {
  Vec state;   // normalized
  Vec action;  // pre-clip sample
  double reward = 0.0;
  double log_prob = 0.0;
  double value = 0.0;
  bool done = false;
  double advantage = 0.0;
  double ret = 0.0;
};

enum class ActionMode { kSample, kMean };

struct Episode {
  std::vector<Transition> steps;
  std::vector<Metrics> trace;          // post-state iterations
  std::vector<ActionTriple> actions;   // one per round
  double total_reward = 0.0;
  double final_mse = 0.0;              // +inf when aborted
  bool aborted = false;
};

Episode run_episode(Environment& env, const Checkpoint& agent, ActionMode mode, Rng* rng);

// In place; episodes are delimited by `done`.
void compute_advantages(std::vector<Transition>& batch, double gamma, double gae_lambda);

struct PpoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  int epochs = 4;
  int minibatch = 64;
  double lr = 3e-4;
  double entropy_coef = 1e-3;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
};

// (clipped, unclipped) surrogate terms for one sample.
std::pair<double, double> clipped_surrogate_terms(double ratio, double advantage, double clip);

struct PpoLoss {
  double loss = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double mean_ratio = 0.0;
  double max_ratio_deviation = 0.0;
  Vec policy_grad;  // mean net parameters then log_std
  Vec value_grad;
};

// Loss = -mean L^CLIP + value_coef * mean (V - R)^2 - entropy_coef * H, with gradients.
PpoLoss ppo_loss(const GaussianPolicy& policy, const Mlp& value_net, const std::vector<const Transition*>& batch,
                 const PpoConfig& cfg);

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double mean_ratio = 0.0;
  double initial_ratio_deviation = 0.0;
  bool restored = false;
};

class PpoOptimizer {
 public:
  PpoOptimizer(const GaussianPolicy& policy, const Mlp& value_net, const PpoConfig& cfg);
  // Normalizes advantages, then runs the configured epochs of shuffled minibatches.
  PpoStats update(GaussianPolicy& policy, Mlp& value_net, std::vector<Transition>& batch, Rng& rng);

 private:
  PpoConfig cfg_;
  Adam policy_opt_, value_opt_;
};

struct CloneStats {
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// Regresses the policy mean (and optionally the value net) on normalized states
// given column-wise. Zero epochs leave the nets unchanged.
CloneStats pretrain_behavior_clone(GaussianPolicy& policy, const Mat& states, const Vec& target, int epochs,
                                   double lr, int minibatch, Rng& rng);
CloneStats fit_value(Mlp& value_net, const Mat& states, const Vec& targets, int epochs, double lr, int minibatch,
                     Rng& rng);

struct TrainConfig {
  EnvConfig env;
  PpoConfig ppo;
  int hidden1 = 64;
  int hidden2 = 64;
  double init_log_std = 0.0;
  int updates = 200;
  int episodes_per_update = 10;
  int eval_interval = 1;
  int clone_epochs = 300;
  double clone_lr = 1e-2;
  double holdout_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct CurveRow {
  int update_idx = 0;
  double mean_return = 0.0;
  double val_mse = 0.0;  // NaN when not evaluated
  double clip_frac = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
};

struct TrainResult {
  Checkpoint best;
  Checkpoint pretrained;
  std::vector<CurveRow> curve;
  double best_val_mse = 0.0;
  double pretrained_val_mse = 0.0;
  CloneStats clone;
  double holdout_max_relative_error = 0.0;  // cloned mean vs baseline on held-out states
};

using Models = std::vector<std::shared_ptr<const BaseModel>>;

TrainResult train(const Models& train_set, const Models& val_set, const TrainConfig& cfg,
                  const std::function<void(const CurveRow&)>& progress = {});

// Mean final-round MSE of the deterministic policy.
double validation_mse(const Checkpoint& agent, const Models& set, const EnvConfig& cfg);

// Refuses a checkpoint built for a different problem shape.
void check_compatible(const Checkpoint& agent, const BaseModel& model, const EnvConfig& cfg);

struct EvalTrace {
  std::string instance_id;
  std::vector<Metrics> metrics;         // post-state iterations
  std::vector<ActionTriple> actions;    // per traced iteration
  long first_iteration = 0;             // engine counter of the first traced row
  bool aborted = false;
};

EvalTrace evaluate_policy(const Checkpoint& agent, std::shared_ptr<const BaseModel> model, const EnvConfig& cfg,
                          int rounds);

}  // namespace amml
