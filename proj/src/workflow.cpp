#include "amml/workflow.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "amml/error.hpp"

namespace amml {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestFormat = "amml-manifest";
constexpr int kManifestVersion = 1;
const char* const kSplits[] = {"train", "val", "test"};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::kIo, "cannot write " + path);
  out << bytes;
  require(out.good(), ErrorCode::kIo, "write failed for " + path);
}

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::kIo, "cannot create directory " + dir + ": " + ec.message());
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::vector<Sample> sample_pool(const Config& cfg) {
  const auto& p = cfg.problem;
  if (p.source == "synthetic")
    return synthetic_pool(p.kind, {p.dim, p.pool_size, p.correlation, p.noise}, derive_seed(cfg.seed, {11}));
  require(fs::exists(p.path), ErrorCode::kIo,
          "dataset file not found: expected the UCI " + p.dataset + " data at '" + p.path + "' (problem.path)");
  auto pool = load_uci_dataset(p.path, parse_dataset_format(p.dataset));
  require(static_cast<int>(pool.size()) >= p.samples, ErrorCode::kConfig,
          p.path + " holds " + std::to_string(pool.size()) + " samples, fewer than problem.samples");
  return pool;
}

int split_size(const ProblemConfig& p, int s) { return s == 0 ? p.train : (s == 1 ? p.val : p.test); }

std::string instance_name(int split, int k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%03d", kSplits[split], k);
  return buf;
}

Models& split_of(Dataset& d, int s) { return s == 0 ? d.train : (s == 1 ? d.val : d.test); }

std::shared_ptr<const BaseModel> make_model(std::shared_ptr<const ProblemInstance> inst, std::shared_ptr<const Graph> g,
                                            const Config& cfg) {
  return std::make_shared<BaseModel>(std::move(inst), std::move(g), cfg.inner);
}

struct Labeled {
  std::vector<std::shared_ptr<ProblemInstance>> instances;  // split-major order
  std::vector<int> split;
  std::vector<double> residual;
};

Labeled label_all(const Config& cfg, const Graph& g) {
  const auto pool = sample_pool(cfg);
  Labeled out;
  std::vector<std::string> failures;
  int index = 0;
  for (int s = 0; s < 3; ++s) {
    for (int k = 0; k < split_size(cfg.problem, s); ++k, ++index) {
      auto inst = std::make_shared<ProblemInstance>(sample_instance(pool, g, cfg.problem.samples, cfg.problem.lambda,
                                                                    cfg.problem.kind,
                                                                    derive_seed(cfg.seed, {12, static_cast<std::uint64_t>(index)}),
                                                                    instance_name(s, k)));
      double res = 0.0;
      try {
        res = label_instance(*inst, cfg.oracle);
      } catch (const Error& e) {
        failures.push_back(inst->instance_id + ": " + e.what());
        continue;
      }
      out.instances.push_back(inst);
      out.split.push_back(s);
      out.residual.push_back(res);
    }
  }
  if (!failures.empty()) {
    std::string msg = "oracle failed on " + std::to_string(failures.size()) + " instance(s):";
    for (const auto& f : failures) msg += "\n  " + f;
    fail(ErrorCode::kRuntime, msg);
  }
  return out;
}

Graph make_graph(const Config& cfg) {
  return generate_graph(cfg.topology.nodes, cfg.topology.edges, derive_seed(cfg.seed, {10}));
}

Checkpoint load_agent(const Config& cfg, const std::string& path) {
  Checkpoint agent = load_checkpoint(path);
  require(agent.meta.kind == kind_name(cfg.problem.kind), ErrorCode::kShape,
          "checkpoint " + path + " was trained on " + agent.meta.kind + " but the config asks for " +
              std::string(kind_name(cfg.problem.kind)));
  return agent;
}

EnvConfig agent_env(const Config& cfg, const Checkpoint& agent) {
  EnvConfig env = cfg.train.env;
  env.bounds = bounds_from_vector(agent.meta.bounds);
  env.action_space = parse_action_space(agent.meta.action_space);
  return env;
}

void metric_cells(std::ostream& out, const Metrics& m) {
  out << num(m.mse) << ',' << num(m.objective_error) << ',' << num(m.consensus_error);
}

void action_cells(std::ostream& out, const ActionTriple& a) {
  out << num(a.alpha()) << ',' << num(a.beta()) << ',' << num(a.rho());
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::vector<ActionTriple> fixed_grid(const Config& cfg) {
  const auto& c = cfg.compare;
  const auto& b = cfg.train.env.bounds;
  const std::vector<double> alphas = cfg.problem.kind == ProblemKind::kL1Lasso ? std::vector<double>{0.0} : c.alpha;
  std::vector<ActionTriple> grid;
  for (double a : alphas)
    for (double be : c.beta)
      for (double r : c.rho) grid.push_back(ActionTriple(a, be, r, b));
  return grid;
}

}  // namespace

std::string content_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Dataset generate_dataset(const Config& cfg) {
  Dataset d;
  d.graph = std::make_shared<Graph>(make_graph(cfg));
  const auto labeled = label_all(cfg, *d.graph);
  for (std::size_t i = 0; i < labeled.instances.size(); ++i)
    split_of(d, labeled.split[i]).push_back(make_model(labeled.instances[i], d.graph, cfg));
  return d;
}

GenSummary cmd_gen(const Config& cfg, const std::string& out_dir) {
  make_dir(join(out_dir, "instances"));
  const Graph g = make_graph(cfg);
  std::ostringstream graph_text;
  write_edge_list(graph_text, g);
  write_file(join(out_dir, "graph.txt"), graph_text.str());

  const auto labeled = label_all(cfg, g);
  json manifest;
  manifest["format"] = kManifestFormat;
  manifest["version"] = kManifestVersion;
  manifest["seed"] = cfg.seed;
  manifest["kind"] = std::string(kind_name(cfg.problem.kind));
  manifest["nodes"] = g.node_count();
  manifest["edges"] = g.edge_count();
  manifest["dim"] = labeled.instances.front()->dim;
  manifest["graph"] = {{"file", "graph.txt"}, {"hash", content_hash(graph_text.str())}};
  manifest["instances"] = json::array();

  GenSummary summary;
  for (std::size_t i = 0; i < labeled.instances.size(); ++i) {
    const auto& inst = *labeled.instances[i];
    const std::string file = "instances/" + inst.instance_id + ".json";
    const std::string text = instance_to_json(inst).dump(1);
    write_file(join(out_dir, file), text);
    manifest["instances"].push_back({{"id", inst.instance_id},
                                     {"split", kSplits[labeled.split[i]]},
                                     {"file", file},
                                     {"hash", content_hash(text)},
                                     {"residual", labeled.residual[i]}});
    summary.worst_residual = std::max(summary.worst_residual, labeled.residual[i]);
  }
  const std::string text = manifest.dump(1) + "\n";
  write_file(join(out_dir, "manifest.json"), text);
  summary.instances = static_cast<int>(labeled.instances.size());
  summary.manifest_hash = content_hash(text);
  return summary;
}

Dataset load_dataset(const Config& cfg, const std::string& out_dir) {
  const std::string path = join(out_dir, "manifest.json");
  require(fs::exists(path), ErrorCode::kIo, "no manifest at " + path + "; run gen first");
  json m;
  try {
    m = json::parse(read_file(path));
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, path + ": " + e.what());
  }
  try {
    require(m.at("format") == kManifestFormat, ErrorCode::kParse, path + " is not a manifest");
    require(m.at("version") == kManifestVersion, ErrorCode::kShape, path + ": unsupported manifest version");
    require(m.at("kind") == kind_name(cfg.problem.kind), ErrorCode::kConfig,
            "manifest holds " + m.at("kind").get<std::string>() + " instances but the config asks for " +
                std::string(kind_name(cfg.problem.kind)));
    auto checked = [&](const json& entry) {
      const std::string text = read_file(join(out_dir, entry.at("file").get<std::string>()));
      require(content_hash(text) == entry.at("hash").get<std::string>(), ErrorCode::kIo,
              entry.at("file").get<std::string>() + " does not match the manifest hash");
      return text;
    };
    Dataset d;
    std::istringstream graph_text(checked(m.at("graph")));
    d.graph = std::make_shared<Graph>(read_edge_list(graph_text));
    for (const auto& entry : m.at("instances")) {
      auto inst = std::make_shared<ProblemInstance>(instance_from_json(json::parse(checked(entry))));
      const std::string split = entry.at("split");
      int s = 0;
      while (s < 3 && split != kSplits[s]) ++s;
      require(s < 3, ErrorCode::kParse, "unknown split '" + split + "' in " + path);
      split_of(d, s).push_back(make_model(inst, d.graph, cfg));
    }
    require(!d.train.empty() && !d.val.empty() && !d.test.empty(), ErrorCode::kParse, path + " lacks a split");
    return d;
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, path + ": " + e.what());
  }
}

TrainSummary cmd_train(const Config& cfg, const std::string& out_dir, const std::string& checkpoint_path) {
  const Dataset d = load_dataset(cfg, out_dir);
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, {13});
  const auto result = train(d.train, d.val, tc);

  std::ostringstream curve;
  curve << "update_idx,mean_return,val_mse,clip_frac,policy_loss,value_loss\n";
  for (const auto& r : result.curve)
    curve << r.update_idx << ',' << num(r.mean_return) << ',' << num(r.val_mse) << ',' << num(r.clip_frac) << ','
          << num(r.policy_loss) << ',' << num(r.value_loss) << '\n';
  write_file(join(out_dir, "curve.csv"), curve.str());
  save_checkpoint(join(out_dir, "pretrained.json"), result.pretrained);
  save_checkpoint(checkpoint_path.empty() ? join(out_dir, "checkpoint.json") : checkpoint_path, result.best);
  return {result.pretrained_val_mse, result.best_val_mse, result.best.meta.update_index,
          result.holdout_max_relative_error};
}

EvalSummary cmd_eval(const Config& cfg, const std::string& checkpoint_path, int rounds, const std::string& out_dir) {
  require(rounds >= 1, ErrorCode::kParameter, "rounds must be >= 1");
  const Checkpoint agent = load_agent(cfg, checkpoint_path);
  const Dataset d = load_dataset(cfg, out_dir);
  const EnvConfig env = agent_env(cfg, agent);
  const std::string policy_id = "ppo_u" + std::to_string(agent.meta.update_index);
  const long horizon_end = static_cast<long>(env.iterations) * (env.rounds + 1);

  std::ostringstream csv;
  csv << "instance_id,iter,mse,obj_err,cons_err,alpha,beta,rho,policy_id\n";
  EvalSummary s;
  std::vector<double> at_horizon, at_end;
  for (const auto& model : d.test) {
    const auto trace = evaluate_policy(agent, model, env, rounds);
    for (std::size_t k = 0; k < trace.metrics.size(); ++k) {
      const long iter = trace.first_iteration + static_cast<long>(k);
      csv << trace.instance_id << ',' << iter << ',';
      metric_cells(csv, trace.metrics[k]);
      csv << ',';
      action_cells(csv, trace.actions[k]);
      csv << ',' << policy_id << '\n';
      if (iter == horizon_end) at_horizon.push_back(trace.metrics[k].mse);
    }
    ++s.instances;
    if (trace.aborted) {
      ++s.aborted;
      at_end.push_back(std::numeric_limits<double>::infinity());
    } else {
      at_end.push_back(trace.metrics.back().mse);
    }
  }
  write_file(join(out_dir, "eval.csv"), csv.str());
  s.mean_horizon_mse = at_horizon.size() == d.test.size() ? mean(at_horizon) : std::numeric_limits<double>::infinity();
  s.mean_final_mse = mean(at_end);
  return s;
}

CompareSummary cmd_compare(const Config& cfg, const std::string& checkpoint_path, const std::string& out_dir) {
  const Checkpoint agent = load_agent(cfg, checkpoint_path);
  const Dataset d = load_dataset(cfg, out_dir);
  const EnvConfig env = agent_env(cfg, agent);
  const int iterations = env.iterations * (env.rounds + 1);

  const auto grid = fixed_grid(cfg);
  const auto fixed = tune_fixed_policy(d.val, grid, iterations);
  const auto steps = cfg.compare.pg_extra_steps.empty() ? default_step_grid() : cfg.compare.pg_extra_steps;
  const auto extra = tune_pg_extra(d.val, steps, iterations);

  CompareSummary s;
  s.fixed_action = Vec{{grid[fixed.index].alpha(), grid[fixed.index].beta(), grid[fixed.index].rho()}};
  s.pg_extra_step = steps[extra.index];

  std::ostringstream csv;
  csv << "algorithm,instance_id,iter,mse,obj_err,cons_err,alpha,beta,rho\n";
  std::vector<double> learned_final, fixed_final, extra_final, extra_cons;
  for (const auto& model : d.test) {
    const std::string& id = model->instance().instance_id;
    const auto learned = evaluate_policy(agent, model, env, env.rounds);
    for (std::size_t k = 0; k < learned.metrics.size(); ++k) {
      csv << "learned," << id << ',' << learned.first_iteration + static_cast<long>(k) << ',';
      metric_cells(csv, learned.metrics[k]);
      csv << ',';
      action_cells(csv, learned.actions[k]);
      csv << '\n';
    }
    learned_final.push_back(learned.aborted ? std::numeric_limits<double>::infinity() : learned.metrics.back().mse);

    const auto ft = run_fixed_policy(*model, grid[fixed.index], iterations);
    for (std::size_t k = 0; k < ft.metrics.size(); ++k) {
      csv << "fixed," << id << ',' << k + 1 << ',';
      metric_cells(csv, ft.metrics[k]);
      csv << ',';
      action_cells(csv, grid[fixed.index]);
      csv << '\n';
    }
    fixed_final.push_back(final_mse(ft));

    const auto et = run_pg_extra(*model, s.pg_extra_step, iterations);
    for (std::size_t k = 0; k < et.metrics.size(); ++k) {
      csv << "pg_extra," << id << ',' << k + 1 << ',';
      metric_cells(csv, et.metrics[k]);
      csv << ",,,\n";
    }
    extra_final.push_back(final_mse(et));
    extra_cons.push_back(et.diverged || et.metrics.empty() ? std::numeric_limits<double>::infinity()
                                                           : et.metrics.back().consensus_error);
  }
  write_file(join(out_dir, "compare.csv"), csv.str());

  s.learned_mse = mean(learned_final);
  s.fixed_mse = mean(fixed_final);
  s.pg_extra_mse = mean(extra_final);
  s.pg_extra_consensus = mean(extra_cons);
  std::ostringstream summary;
  summary << "algorithm,mean_final_mse,setting\n";
  summary << "learned," << num(s.learned_mse) << ",update " << agent.meta.update_index << '\n';
  summary << "fixed," << num(s.fixed_mse) << ",alpha " << num(s.fixed_action[0]) << " beta " << num(s.fixed_action[1])
          << " rho " << num(s.fixed_action[2]) << '\n';
  summary << "pg_extra," << num(s.pg_extra_mse) << ",step " << num(s.pg_extra_step) << '\n';
  write_file(join(out_dir, "compare_summary.csv"), summary.str());
  return s;
}

OracleCheckSummary cmd_oracle_check(const Config& cfg, const std::string& out_dir) {
  const Dataset d = load_dataset(cfg, out_dir);
  OracleCheckSummary s;
  std::ostringstream csv;
  csv << "instance_id,certificate,reference_gap,status\n";
  for (int split = 0; split < 3; ++split) {
    for (const auto& model : split == 0 ? d.train : (split == 1 ? d.val : d.test)) {
      const auto& inst = model->instance();
      const double cert = certify(inst, *inst.x_star);
      std::string gap_cell;
      double gap = 0.0;
      // Vertex enumeration only covers small l1-regression instances.
      const bool reference = inst.kind != ProblemKind::kL1Lasso ||
                             (inst.dim <= 4 && cfg.problem.samples + inst.dim <= 40);
      if (reference) {
        const Vec ref = solve_reference(inst, cfg.oracle.max_iter);
        gap = std::abs(full_objective(inst, ref) - full_objective(inst, *inst.x_star));
        gap_cell = num(gap);
        s.worst_reference_gap = std::max(s.worst_reference_gap, gap);
      }
      const bool ok = cert <= 1e-8 && gap <= 1e-5;
      s.failures += ok ? 0 : 1;
      s.worst_certificate = std::max(s.worst_certificate, cert);
      ++s.instances;
      csv << inst.instance_id << ',' << num(cert) << ',' << gap_cell << ',' << (ok ? "ok" : "fail") << '\n';
    }
  }
  write_file(join(out_dir, "oracle_check.csv"), csv.str());
  return s;
}

}  // namespace amml
