#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "amml/linalg.hpp"

namespace amml {

class Graph;

enum class ProblemKind {
  kLeastSquaresLasso,  // s = mean 1/2 (a'x - b)^2, r = lambda |x|_1
  kLogistic,           // s = mean logistic loss + lambda/2 |x|^2, r = 0
  kL1Lasso,            // s = 0, r = mean |a'x - b| + lambda |x|_1
};

std::string_view kind_name(ProblemKind kind);
ProblemKind parse_kind(std::string_view name);
inline bool has_smooth_part(ProblemKind k) { return k != ProblemKind::kL1Lasso; }

struct Sample {
  Vec features;
  double label = 0.0;
};

// One node's share of the data. Samples are stored row-wise in `features`.
struct LocalObjective {
  ProblemKind kind = ProblemKind::kLeastSquaresLasso;
  Mat features;  // m x d
  Vec labels;    // m
  double lambda = 0.0;

  Eigen::Index sample_count() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
};

struct SmoothEval {
  double value = 0.0;
  Vec grad;
};

SmoothEval smooth_value_grad(const LocalObjective& obj, const Vec& x);
Mat smooth_hessian(const LocalObjective& obj, const Vec& x);
double nonsmooth_value(const LocalObjective& obj, const Vec& x);
inline double local_value(const LocalObjective& obj, const Vec& x) {
  return smooth_value_grad(obj, x).value + nonsmooth_value(obj, x);
}

Vec hessian_eigenvalues(const Mat& hessian);

struct ProblemInstance {
  std::string instance_id;
  ProblemKind kind = ProblemKind::kLeastSquaresLasso;
  double lambda = 0.0;
  int dim = 0;
  std::vector<LocalObjective> nodes;
  std::optional<Vec> x_star;

  int node_count() const { return static_cast<int>(nodes.size()); }
};

// Sum over nodes of s_i(x) + r_i(x) at a common x.
double full_objective(const ProblemInstance& inst, const Vec& x);

enum class DatasetFormat { kAbalone, kBreastCancerWisconsin };

DatasetFormat parse_dataset_format(std::string_view name);

// Reads a UCI comma-separated file. Abalone: sex one-hot (M, F, I) followed by
// the 7 numeric attributes, label = rings. Breast cancer (original): id dropped,
// 9 attributes, class 2 -> 0 and 4 -> 1, rows containing '?' skipped. Feature
// columns are standardized over the loaded file.
std::vector<Sample> load_uci_dataset(const std::string& path, DatasetFormat format);

// Zero mean / unit (population) variance per column; constant columns -> 0.
void standardize_features(std::vector<Sample>& samples);

struct SyntheticSpec {
  int dim = 4;
  int count = 500;
  double correlation = 0.0;  // pairwise feature correlation in [0, 1)
  double noise = 0.1;
};

// Gaussian features with equicorrelated covariance and a fixed planted model.
// Regression kinds add Gaussian (least squares) or Laplace (l1) noise, the
// logistic kind draws Bernoulli labels.
std::vector<Sample> synthetic_pool(ProblemKind kind, const SyntheticSpec& spec, std::uint64_t seed);

// Draws total_samples without replacement and splits them evenly over the
// nodes of g.
ProblemInstance sample_instance(const std::vector<Sample>& pool, const Graph& g, int total_samples,
                                double lambda, ProblemKind kind, std::uint64_t seed,
                                std::string instance_id = "");

nlohmann::json instance_to_json(const ProblemInstance& inst);
ProblemInstance instance_from_json(const nlohmann::json& j);
void save_instance(const std::string& path, const ProblemInstance& inst);
ProblemInstance load_instance(const std::string& path);

}  // namespace amml
