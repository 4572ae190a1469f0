#include "amml/problems.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "amml/error.hpp"
#include "amml/rng.hpp"
#include "amml/topology.hpp"

namespace amml {

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& field, const std::string& path, int line_no) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(field, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != field.size() || !std::isfinite(v)) {
    fail(ErrorCode::kParse, path + ":" + std::to_string(line_no) + ": non-numeric field '" + field + "'");
  }
  return v;
}

}  // namespace

std::string_view kind_name(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::kLeastSquaresLasso: return "least_squares_lasso";
    case ProblemKind::kLogistic: return "logistic";
    case ProblemKind::kL1Lasso: return "l1_lasso";
  }
  return "?";
}

ProblemKind parse_kind(std::string_view name) {
  if (name == "least_squares_lasso") return ProblemKind::kLeastSquaresLasso;
  if (name == "logistic") return ProblemKind::kLogistic;
  if (name == "l1_lasso") return ProblemKind::kL1Lasso;
  fail(ErrorCode::kParameter, "unknown problem kind '" + std::string(name) +
                                  "' (expected least_squares_lasso, logistic or l1_lasso)");
}

SmoothEval smooth_value_grad(const LocalObjective& obj, const Vec& x) {
  const double m = static_cast<double>(obj.sample_count());
  SmoothEval out{0.0, Vec::Zero(obj.dim())};
  switch (obj.kind) {
    case ProblemKind::kLeastSquaresLasso: {
      const Vec r = obj.features * x - obj.labels;
      out.value = 0.5 * r.squaredNorm() / m;
      out.grad = obj.features.transpose() * r / m;
      break;
    }
    case ProblemKind::kLogistic: {
      const Vec z = obj.features * x;
      Vec resid(z.size());
      double loss = 0.0;
      for (Eigen::Index j = 0; j < z.size(); ++j) {
        loss += softplus(z[j]) - obj.labels[j] * z[j];
        resid[j] = sigmoid(z[j]) - obj.labels[j];
      }
      out.value = loss / m + 0.5 * obj.lambda * x.squaredNorm();
      out.grad = obj.features.transpose() * resid / m + obj.lambda * x;
      break;
    }
    case ProblemKind::kL1Lasso:
      break;
  }
  return out;
}

Mat smooth_hessian(const LocalObjective& obj, const Vec& x) {
  const double m = static_cast<double>(obj.sample_count());
  const Eigen::Index d = obj.dim();
  switch (obj.kind) {
    case ProblemKind::kLeastSquaresLasso:
      return obj.features.transpose() * obj.features / m;
    case ProblemKind::kLogistic: {
      const Vec z = obj.features * x;
      Vec w(z.size());
      for (Eigen::Index j = 0; j < z.size(); ++j) {
        const double s = sigmoid(z[j]);
        w[j] = s * (1.0 - s) / m;
      }
      Mat h = obj.features.transpose() * w.asDiagonal() * obj.features;
      h.diagonal().array() += obj.lambda;
      return h;
    }
    case ProblemKind::kL1Lasso:
      break;
  }
  return Mat::Zero(d, d);
}

double nonsmooth_value(const LocalObjective& obj, const Vec& x) {
  switch (obj.kind) {
    case ProblemKind::kLeastSquaresLasso:
      return obj.lambda * x.lpNorm<1>();
    case ProblemKind::kLogistic:
      return 0.0;
    case ProblemKind::kL1Lasso:
      return (obj.features * x - obj.labels).lpNorm<1>() / static_cast<double>(obj.sample_count()) +
             obj.lambda * x.lpNorm<1>();
  }
  return 0.0;
}

Vec hessian_eigenvalues(const Mat& hessian) { return symmetric_eigenvalues(hessian); }

double full_objective(const ProblemInstance& inst, const Vec& x) {
  require(x.size() == inst.dim, ErrorCode::kShape, "full_objective: dimension mismatch");
  double total = 0.0;
  for (const auto& node : inst.nodes) total += local_value(node, x);
  return total;
}

DatasetFormat parse_dataset_format(std::string_view name) {
  if (name == "abalone") return DatasetFormat::kAbalone;
  if (name == "breast_cancer_wisconsin" || name == "breast_cancer") return DatasetFormat::kBreastCancerWisconsin;
  fail(ErrorCode::kParameter, "unknown dataset format '" + std::string(name) +
                                  "' (expected abalone or breast_cancer_wisconsin)");
}

std::vector<Sample> load_uci_dataset(const std::string& path, DatasetFormat format) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot read dataset file " + path);

  std::vector<Sample> samples;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    Sample s;
    if (format == DatasetFormat::kAbalone) {
      if (fields.size() != 9) {
        fail(ErrorCode::kParse, path + ":" + std::to_string(line_no) + ": expected 9 fields, got " +
                                    std::to_string(fields.size()));
      }
      s.features = Vec::Zero(10);
      if (fields[0] == "M") s.features[0] = 1.0;
      else if (fields[0] == "F") s.features[1] = 1.0;
      else if (fields[0] == "I") s.features[2] = 1.0;
      else fail(ErrorCode::kParse, path + ":" + std::to_string(line_no) + ": unknown sex '" + fields[0] + "'");
      for (int k = 1; k <= 7; ++k) s.features[k + 2] = parse_number(fields[static_cast<std::size_t>(k)], path, line_no);
      s.label = parse_number(fields[8], path, line_no);
    } else {
      if (fields.size() != 11) {
        fail(ErrorCode::kParse, path + ":" + std::to_string(line_no) + ": expected 11 fields, got " +
                                    std::to_string(fields.size()));
      }
      if (std::find(fields.begin(), fields.end(), "?") != fields.end()) continue;
      s.features.resize(9);
      for (int k = 1; k <= 9; ++k) s.features[k - 1] = parse_number(fields[static_cast<std::size_t>(k)], path, line_no);
      const double cls = parse_number(fields[10], path, line_no);
      if (cls == 2.0) s.label = 0.0;
      else if (cls == 4.0) s.label = 1.0;
      else fail(ErrorCode::kParse, path + ":" + std::to_string(line_no) + ": class must be 2 or 4");
    }
    samples.push_back(std::move(s));
  }
  require(!samples.empty(), ErrorCode::kParse, "dataset file " + path + " contains no usable rows");
  standardize_features(samples);
  return samples;
}

void standardize_features(std::vector<Sample>& samples) {
  if (samples.empty()) return;
  const Eigen::Index d = samples.front().features.size();
  const double n = static_cast<double>(samples.size());
  Vec mean = Vec::Zero(d);
  for (const auto& s : samples) mean += s.features;
  mean /= n;
  Vec var = Vec::Zero(d);
  for (const auto& s : samples) var += (s.features - mean).cwiseAbs2();
  var /= n;
  for (auto& s : samples) {
    for (Eigen::Index k = 0; k < d; ++k) {
      const double sd = std::sqrt(var[k]);
      s.features[k] = sd > 1e-12 * std::max(1.0, std::abs(mean[k])) ? (s.features[k] - mean[k]) / sd : 0.0;
    }
  }
}

std::vector<Sample> synthetic_pool(ProblemKind kind, const SyntheticSpec& spec, std::uint64_t seed) {
  require(spec.dim >= 1 && spec.count >= 1, ErrorCode::kParameter, "synthetic pool needs dim, count >= 1");
  require(spec.correlation >= 0.0 && spec.correlation < 1.0, ErrorCode::kParameter,
          "synthetic correlation must lie in [0, 1)");
  Rng rng(derive_seed(seed, {0x5157}));
  const int d = spec.dim;
  Vec truth(d);
  for (int k = 0; k < d; ++k) truth[k] = (k % 3 == 2) ? 0.0 : rng.uniform(-2.0, 2.0);

  const double shared = std::sqrt(spec.correlation), own = std::sqrt(1.0 - spec.correlation);
  std::vector<Sample> pool;
  pool.reserve(static_cast<std::size_t>(spec.count));
  for (int n = 0; n < spec.count; ++n) {
    Sample s;
    s.features.resize(d);
    const double common = rng.normal();
    for (int k = 0; k < d; ++k) s.features[k] = shared * common + own * rng.normal();
    const double z = s.features.dot(truth);
    switch (kind) {
      case ProblemKind::kLeastSquaresLasso:
        s.label = z + spec.noise * rng.normal();
        break;
      case ProblemKind::kLogistic:
        s.label = rng.uniform() < 1.0 / (1.0 + std::exp(-z)) ? 1.0 : 0.0;
        break;
      case ProblemKind::kL1Lasso: {
        const double u = rng.uniform() - 0.5;
        s.label = z - spec.noise * (u < 0 ? -1.0 : 1.0) * std::log(1.0 - 2.0 * std::abs(u));
        break;
      }
    }
    pool.push_back(std::move(s));
  }
  return pool;
}

ProblemInstance sample_instance(const std::vector<Sample>& pool, const Graph& g, int total_samples,
                                double lambda, ProblemKind kind, std::uint64_t seed, std::string instance_id) {
  const int n = g.node_count();
  require(total_samples >= n && total_samples % n == 0, ErrorCode::kParameter,
          "total_samples (" + std::to_string(total_samples) + ") must be a positive multiple of the node count (" +
              std::to_string(n) + ")");
  require(static_cast<std::size_t>(total_samples) <= pool.size(), ErrorCode::kParameter,
          "sample pool too small: need " + std::to_string(total_samples) + ", have " + std::to_string(pool.size()));
  require(lambda >= 0.0, ErrorCode::kParameter, "lambda must be nonnegative");
  if (kind == ProblemKind::kLogistic) {
    for (const auto& s : pool)
      require(s.label == 0.0 || s.label == 1.0, ErrorCode::kParameter, "logistic labels must be 0 or 1");
  }

  Rng rng(seed);
  std::vector<std::size_t> idx(pool.size());
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
  for (std::size_t k = 0; k < static_cast<std::size_t>(total_samples); ++k)
    std::swap(idx[k], idx[k + rng.uniform_index(idx.size() - k)]);

  ProblemInstance inst;
  inst.instance_id = std::move(instance_id);
  inst.kind = kind;
  inst.lambda = lambda;
  inst.dim = static_cast<int>(pool.front().features.size());
  const int per_node = total_samples / n;
  for (int i = 0; i < n; ++i) {
    LocalObjective obj;
    obj.kind = kind;
    obj.lambda = lambda;
    obj.features.resize(per_node, inst.dim);
    obj.labels.resize(per_node);
    for (int j = 0; j < per_node; ++j) {
      const auto& s = pool[idx[static_cast<std::size_t>(i * per_node + j)]];
      require(s.features.size() == inst.dim, ErrorCode::kShape, "pool samples differ in dimension");
      obj.features.row(j) = s.features.transpose();
      obj.labels[j] = s.label;
    }
    inst.nodes.push_back(std::move(obj));
  }
  return inst;
}

namespace {

nlohmann::json vec_to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec vec_from_json(const nlohmann::json& j) {
  const auto raw = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(raw.data(), static_cast<Eigen::Index>(raw.size()));
}

}  // namespace

nlohmann::json instance_to_json(const ProblemInstance& inst) {
  nlohmann::json j;
  j["format"] = "amml-instance";
  j["version"] = 1;
  j["instance_id"] = inst.instance_id;
  j["kind"] = std::string(kind_name(inst.kind));
  j["lambda"] = inst.lambda;
  j["dim"] = inst.dim;
  auto& nodes = j["nodes"] = nlohmann::json::array();
  for (const auto& node : inst.nodes) {
    nlohmann::json block;
    auto& rows = block["features"] = nlohmann::json::array();
    for (Eigen::Index r = 0; r < node.features.rows(); ++r) rows.push_back(vec_to_json(node.features.row(r).transpose()));
    block["labels"] = vec_to_json(node.labels);
    nodes.push_back(std::move(block));
  }
  j["x_star"] = inst.x_star ? vec_to_json(*inst.x_star) : nlohmann::json(nullptr);
  return j;
}

ProblemInstance instance_from_json(const nlohmann::json& j) {
  try {
    require(j.at("format") == "amml-instance", ErrorCode::kParse, "not an instance file");
    require(j.at("version") == 1, ErrorCode::kParse, "unsupported instance version");
    ProblemInstance inst;
    inst.instance_id = j.at("instance_id").get<std::string>();
    inst.kind = parse_kind(j.at("kind").get<std::string>());
    inst.lambda = j.at("lambda").get<double>();
    inst.dim = j.at("dim").get<int>();
    for (const auto& block : j.at("nodes")) {
      LocalObjective obj;
      obj.kind = inst.kind;
      obj.lambda = inst.lambda;
      const auto& rows = block.at("features");
      obj.labels = vec_from_json(block.at("labels"));
      require(rows.size() == static_cast<std::size_t>(obj.labels.size()) && !rows.empty(), ErrorCode::kShape,
              "instance node block: feature/label count mismatch");
      obj.features.resize(static_cast<Eigen::Index>(rows.size()), inst.dim);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const Vec row = vec_from_json(rows[r]);
        require(row.size() == inst.dim, ErrorCode::kShape, "instance node block: feature dimension mismatch");
        obj.features.row(static_cast<Eigen::Index>(r)) = row.transpose();
      }
      inst.nodes.push_back(std::move(obj));
    }
    require(!inst.nodes.empty(), ErrorCode::kParse, "instance has no nodes");
    if (!j.at("x_star").is_null()) {
      inst.x_star = vec_from_json(j.at("x_star"));
      require(inst.x_star->size() == inst.dim, ErrorCode::kShape, "x_star dimension mismatch");
    }
    return inst;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("malformed instance: ") + e.what());
  }
}

void save_instance(const std::string& path, const ProblemInstance& inst) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path);
  out << instance_to_json(inst).dump(1) << '\n';
}

ProblemInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, path + ": " + e.what());
  }
  return instance_from_json(j);
}

}  // namespace amml
