#include "amml/amml.h"

#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <memory>
#include <string>
#include <utility>

#include "amml/error.hpp"
#include "amml/workflow.hpp"

struct amml_config {
  amml::Config cfg;
  std::string json_text;
};

struct amml_result {
  std::string text;
  std::map<std::string, double> numbers;
};

struct amml_checkpoint {
  amml::Checkpoint ckpt;
};

namespace {

thread_local std::string last_error;

amml_status to_status(amml::ErrorCode code) {
  switch (code) {
    case amml::ErrorCode::kParameter: return AMML_ERR_PARAMETER;
    case amml::ErrorCode::kIo: return AMML_ERR_IO;
    case amml::ErrorCode::kParse: return AMML_ERR_PARSE;
    case amml::ErrorCode::kShape: return AMML_ERR_SHAPE;
    case amml::ErrorCode::kConfig: return AMML_ERR_CONFIG;
    case amml::ErrorCode::kDegenerateParameter: return AMML_ERR_DEGENERATE;
    case amml::ErrorCode::kNonconverged: return AMML_ERR_NONCONVERGED;
    case amml::ErrorCode::kMissingOracle: return AMML_ERR_MISSING_ORACLE;
    case amml::ErrorCode::kRuntime: return AMML_ERR_RUNTIME;
  }
  return AMML_ERR_INTERNAL;
}

template <typename F>
amml_status guarded(F&& f) {
  last_error.clear();
  try {
    f();
    return AMML_OK;
  } catch (const amml::Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const std::exception& e) {
    last_error = e.what();
    return AMML_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown failure";
    return AMML_ERR_INTERNAL;
  }
}

amml_status null_arg(const char* what) {
  last_error = std::string(what) + " must not be NULL";
  return AMML_ERR_PARAMETER;
}

class ResultBuilder {
 public:
  ResultBuilder& add(const std::string& key, double v) {
    r_.numbers[key] = v;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    r_.text += key + ": " + buf + "\n";
    return *this;
  }
  ResultBuilder& note(const std::string& key, const std::string& value) {
    r_.text += key + ": " + value + "\n";
    return *this;
  }
  void emit(amml_result** out) {
    if (out) *out = new amml_result(std::move(r_));
  }

 private:
  amml_result r_;
};

std::string checkpoint_or_default(const amml_config* cfg, const char* path) {
  return path && *path ? path : cfg->cfg.out + "/checkpoint.json";
}

}  // namespace

extern "C" {

const char* amml_version(void) { return "1.0.0"; }

const char* amml_status_name(amml_status status) {
  switch (status) {
    case AMML_OK: return "ok";
    case AMML_ERR_PARAMETER: return "parameter";
    case AMML_ERR_IO: return "io";
    case AMML_ERR_PARSE: return "parse";
    case AMML_ERR_SHAPE: return "shape";
    case AMML_ERR_CONFIG: return "config";
    case AMML_ERR_DEGENERATE: return "degenerate";
    case AMML_ERR_NONCONVERGED: return "nonconverged";
    case AMML_ERR_MISSING_ORACLE: return "missing_oracle";
    case AMML_ERR_RUNTIME: return "runtime";
    case AMML_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* amml_last_error(void) { return last_error.c_str(); }

amml_status amml_config_load(const char* path, amml_config** out) {
  if (!out) return null_arg("out");
  return guarded([&] {
    auto cfg = std::make_unique<amml_config>();
    cfg->cfg = path ? amml::load_config(path) : amml::config_from_json(nlohmann::json::object());
    *out = cfg.release();
  });
}

amml_status amml_config_from_json(const char* text, amml_config** out) {
  if (!text) return null_arg("text");
  if (!out) return null_arg("out");
  return guarded([&] {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      amml::fail(amml::ErrorCode::kParse, std::string("config: ") + e.what());
    }
    auto cfg = std::make_unique<amml_config>();
    cfg->cfg = amml::config_from_json(j);
    *out = cfg.release();
  });
}

amml_status amml_config_miniature(amml_config** out) {
  if (!out) return null_arg("out");
  return guarded([&] { *out = new amml_config{amml::miniature_config(), {}}; });
}

void amml_config_free(amml_config* cfg) { delete cfg; }

amml_status amml_config_set_seed(amml_config* cfg, uint64_t seed) {
  if (!cfg) return null_arg("cfg");
  cfg->cfg.seed = seed;
  return AMML_OK;
}

amml_status amml_config_set_out(amml_config* cfg, const char* dir) {
  if (!cfg) return null_arg("cfg");
  if (!dir || !*dir) return null_arg("dir");
  cfg->cfg.out = dir;
  return AMML_OK;
}

amml_status amml_config_set_updates(amml_config* cfg, int updates) {
  if (!cfg) return null_arg("cfg");
  if (updates < 0) {
    last_error = "updates must be >= 0";
    return AMML_ERR_PARAMETER;
  }
  cfg->cfg.train.updates = updates;
  return AMML_OK;
}

const char* amml_config_out(const amml_config* cfg) { return cfg ? cfg->cfg.out.c_str() : ""; }

int amml_config_eval_rounds(const amml_config* cfg) { return cfg ? cfg->cfg.eval_rounds : 0; }

const char* amml_config_json(amml_config* cfg) {
  if (!cfg) return "";
  cfg->json_text = amml::config_to_json(cfg->cfg).dump(2);
  return cfg->json_text.c_str();
}

amml_status amml_gen(const amml_config* cfg, amml_result** out) {
  if (!cfg) return null_arg("cfg");
  return guarded([&] {
    const auto s = amml::cmd_gen(cfg->cfg, cfg->cfg.out);
    ResultBuilder()
        .add("instances", s.instances)
        .add("worst_residual", s.worst_residual)
        .note("manifest_hash", s.manifest_hash)
        .emit(out);
  });
}

amml_status amml_train(const amml_config* cfg, const char* checkpoint_path, amml_result** out) {
  if (!cfg) return null_arg("cfg");
  return guarded([&] {
    const std::string path = checkpoint_or_default(cfg, checkpoint_path);
    const auto s = amml::cmd_train(cfg->cfg, cfg->cfg.out, path);
    ResultBuilder()
        .add("pretrained_val_mse", s.pretrained_val_mse)
        .add("best_val_mse", s.best_val_mse)
        .add("best_update", s.best_update)
        .add("clone_error", s.clone_error)
        .note("checkpoint", path)
        .emit(out);
  });
}

amml_status amml_eval(const amml_config* cfg, const char* checkpoint_path, int rounds, amml_result** out) {
  if (!cfg) return null_arg("cfg");
  return guarded([&] {
    const auto s = amml::cmd_eval(cfg->cfg, checkpoint_or_default(cfg, checkpoint_path),
                                  rounds > 0 ? rounds : cfg->cfg.eval_rounds, cfg->cfg.out);
    ResultBuilder()
        .add("instances", s.instances)
        .add("aborted", s.aborted)
        .add("mean_horizon_mse", s.mean_horizon_mse)
        .add("mean_final_mse", s.mean_final_mse)
        .emit(out);
  });
}

amml_status amml_compare(const amml_config* cfg, const char* checkpoint_path, amml_result** out) {
  if (!cfg) return null_arg("cfg");
  return guarded([&] {
    const auto s = amml::cmd_compare(cfg->cfg, checkpoint_or_default(cfg, checkpoint_path), cfg->cfg.out);
    ResultBuilder()
        .add("learned_mse", s.learned_mse)
        .add("fixed_mse", s.fixed_mse)
        .add("pg_extra_mse", s.pg_extra_mse)
        .add("pg_extra_consensus", s.pg_extra_consensus)
        .add("fixed_alpha", s.fixed_action[0])
        .add("fixed_beta", s.fixed_action[1])
        .add("fixed_rho", s.fixed_action[2])
        .add("pg_extra_step", s.pg_extra_step)
        .emit(out);
  });
}

amml_status amml_oracle_check(const amml_config* cfg, amml_result** out) {
  if (!cfg) return null_arg("cfg");
  amml::OracleCheckSummary s;
  const amml_status st = guarded([&] {
    s = amml::cmd_oracle_check(cfg->cfg, cfg->cfg.out);
    ResultBuilder()
        .add("instances", s.instances)
        .add("failures", s.failures)
        .add("worst_certificate", s.worst_certificate)
        .add("worst_reference_gap", s.worst_reference_gap)
        .emit(out);
  });
  if (st == AMML_OK && s.failures > 0) {
    last_error = std::to_string(s.failures) + " instance(s) failed certification";
    return AMML_ERR_RUNTIME;
  }
  return st;
}

const char* amml_result_text(const amml_result* r) { return r ? r->text.c_str() : ""; }

amml_status amml_result_number(const amml_result* r, const char* key, double* value) {
  if (!r) return null_arg("r");
  if (!key) return null_arg("key");
  if (!value) return null_arg("value");
  const auto it = r->numbers.find(key);
  if (it == r->numbers.end()) {
    last_error = std::string("no result named '") + key + "'";
    return AMML_ERR_PARAMETER;
  }
  *value = it->second;
  return AMML_OK;
}

void amml_result_free(amml_result* r) { delete r; }

amml_status amml_checkpoint_load(const char* path, amml_checkpoint** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  return guarded([&] { *out = new amml_checkpoint{amml::load_checkpoint(path)}; });
}

void amml_checkpoint_free(amml_checkpoint* ckpt) { delete ckpt; }

amml_status amml_checkpoint_dims(const amml_checkpoint* ckpt, int* state_dim, int* action_dim) {
  if (!ckpt) return null_arg("ckpt");
  if (state_dim) *state_dim = ckpt->ckpt.policy.mean_net.input_dim();
  if (action_dim) *action_dim = ckpt->ckpt.policy.mean_net.output_dim();
  return AMML_OK;
}

amml_status amml_checkpoint_act(const amml_checkpoint* ckpt, const double* state, int state_dim, double* action3) {
  if (!ckpt) return null_arg("ckpt");
  if (!state) return null_arg("state");
  if (!action3) return null_arg("action3");
  return guarded([&] {
    const auto& c = ckpt->ckpt;
    amml::require(state_dim == c.policy.mean_net.input_dim(), amml::ErrorCode::kShape,
                  "state has " + std::to_string(state_dim) + " entries, the policy expects " +
                      std::to_string(c.policy.mean_net.input_dim()));
    const amml::Vec raw = Eigen::Map<const amml::Vec>(state, state_dim);
    amml::EnvConfig env;
    env.bounds = amml::bounds_from_vector(c.meta.bounds);
    env.action_space = amml::parse_action_space(c.meta.action_space);
    const auto a = amml::action_from_output(c.policy.mean(amml::policy_input(c.normalizer, raw)), env);
    action3[0] = a.alpha();
    action3[1] = a.beta();
    action3[2] = a.rho();
  });
}

}  // extern "C"
