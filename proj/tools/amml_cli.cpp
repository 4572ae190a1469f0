// Command-line front end; talks to the library only through amml.h.
#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>

#include "amml/amml.h"

namespace {

constexpr int kUsage = 1;
constexpr int kRuntime = 2;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> rounds;
  std::string checkpoint;
  std::string out;
};

int report(amml_status st, amml_result* r) {
  if (st != AMML_OK) {
    std::fprintf(stderr, "amml: %s error: %s\n", amml_status_name(st), amml_last_error());
    amml_result_free(r);
    return kRuntime;
  }
  std::fputs(amml_result_text(r), stdout);
  amml_result_free(r);
  return 0;
}

int run(const std::string& command, const Options& o) {
  amml_config* cfg = nullptr;
  amml_status st = amml_config_load(o.config.empty() ? nullptr : o.config.c_str(), &cfg);
  if (st != AMML_OK) {
    std::fprintf(stderr, "amml: %s error: %s\n", amml_status_name(st), amml_last_error());
    return st == AMML_ERR_CONFIG || st == AMML_ERR_PARSE ? kUsage : kRuntime;
  }
  if (o.seed) amml_config_set_seed(cfg, *o.seed);
  if (!o.out.empty()) amml_config_set_out(cfg, o.out.c_str());
  const char* ckpt = o.checkpoint.empty() ? nullptr : o.checkpoint.c_str();

  amml_result* r = nullptr;
  if (command == "gen") {
    st = amml_gen(cfg, &r);
  } else if (command == "train") {
    if (o.rounds) amml_config_set_updates(cfg, *o.rounds);
    st = amml_train(cfg, ckpt, &r);
  } else if (command == "eval") {
    st = amml_eval(cfg, ckpt, o.rounds.value_or(amml_config_eval_rounds(cfg)), &r);
  } else if (command == "compare") {
    st = amml_compare(cfg, ckpt, &r);
  } else {
    st = amml_oracle_check(cfg, &r);
  }
  amml_config_free(cfg);
  return report(st, r);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned parameter selection for decentralized optimization"};
  app.require_subcommand(1);
  app.set_version_flag("--version", amml_version());

  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "global seed");
    sub->add_option("--out", o.out, "output directory (overrides io.out)");
  };
  auto* gen = app.add_subcommand("gen", "generate and label instances");
  common(gen);
  auto* train = app.add_subcommand("train", "pretrain and run PPO");
  common(train);
  train->add_option("--rounds", o.rounds, "number of PPO updates")->check(CLI::NonNegativeNumber);
  train->add_option("--checkpoint", o.checkpoint, "where to write the best checkpoint");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  common(eval);
  eval->add_option("--rounds", o.rounds, "communication rounds to roll out")->check(CLI::PositiveNumber);
  eval->add_option("--checkpoint", o.checkpoint, "checkpoint to evaluate");
  auto* compare = app.add_subcommand("compare", "learned vs fixed policy vs PG-EXTRA");
  common(compare);
  compare->add_option("--checkpoint", o.checkpoint, "checkpoint to compare");
  auto* check = app.add_subcommand("oracle-check", "recertify the labeled instances");
  common(check);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }
  return run(app.get_subcommands().front()->get_name(), o);
}
