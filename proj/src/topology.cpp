#include "amml/topology.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include "amml/error.hpp"
#include "amml/rng.hpp"

namespace amml {

Graph::Graph(int node_count, std::vector<std::pair<int, int>> edges) : node_count_(node_count) {
  require(node_count >= 1, ErrorCode::kParameter, "graph needs at least one node");
  for (auto& [i, j] : edges) {
    require(i >= 0 && j >= 0 && i < node_count && j < node_count, ErrorCode::kParameter,
            "edge endpoint out of range");
    require(i != j, ErrorCode::kParameter, "self-loop on node " + std::to_string(i));
    if (i > j) std::swap(i, j);
  }
  std::sort(edges.begin(), edges.end());
  require(std::adjacent_find(edges.begin(), edges.end()) == edges.end(), ErrorCode::kParameter,
          "duplicate edge");
  edges_ = std::move(edges);
  adjacency_.assign(static_cast<std::size_t>(node_count), {});
  for (const auto& [i, j] : edges_) {
    adjacency_[static_cast<std::size_t>(i)].push_back(j);
    adjacency_[static_cast<std::size_t>(j)].push_back(i);
  }
  for (auto& nb : adjacency_) std::sort(nb.begin(), nb.end());
}

bool Graph::adjacent(int i, int j) const {
  const auto& nb = neighbors(i);
  return std::binary_search(nb.begin(), nb.end(), j);
}

bool Graph::connected() const {
  std::vector<char> seen(static_cast<std::size_t>(node_count_), 0);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = 1;
  int reached = 1;
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop();
    for (int v : neighbors(u)) {
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        ++reached;
        frontier.push(v);
      }
    }
  }
  return reached == node_count_;
}

Graph generate_graph(int node_count, int edge_count, std::uint64_t seed) {
  require(node_count >= 1, ErrorCode::kParameter, "node_count must be positive");
  const long long max_edges = static_cast<long long>(node_count) * (node_count - 1) / 2;
  if (edge_count < node_count - 1 || edge_count > max_edges) {
    fail(ErrorCode::kParameter, "infeasible edge_count " + std::to_string(edge_count) + " for " +
                                    std::to_string(node_count) + " nodes (need " +
                                    std::to_string(node_count - 1) + ".." + std::to_string(max_edges) + ")");
  }
  Rng rng(seed);

  // Random labelling, each new node attaches to a uniformly chosen earlier one.
  std::vector<int> order(static_cast<std::size_t>(node_count));
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);

  std::set<std::pair<int, int>> chosen;
  for (std::size_t k = 1; k < order.size(); ++k) {
    int a = order[k], b = order[rng.uniform_index(k)];
    chosen.insert({std::min(a, b), std::max(a, b)});
  }

  std::vector<std::pair<int, int>> remaining;
  for (int i = 0; i < node_count; ++i)
    for (int j = i + 1; j < node_count; ++j)
      if (!chosen.count({i, j})) remaining.push_back({i, j});
  const std::size_t extra = static_cast<std::size_t>(edge_count) - chosen.size();
  // Partial Fisher-Yates: first `extra` entries form a uniform sample.
  for (std::size_t k = 0; k < extra; ++k) {
    std::swap(remaining[k], remaining[k + rng.uniform_index(remaining.size() - k)]);
    chosen.insert(remaining[k]);
  }
  return Graph(node_count, {chosen.begin(), chosen.end()});
}

Mat metropolis_weights(const Graph& g) {
  const int n = g.node_count();
  Mat p = Mat::Zero(n, n);
  for (const auto& [i, j] : g.edges()) {
    const double w = -1.0 / (std::max(g.degree(i), g.degree(j)) + 1.0);
    p(i, j) = w;
    p(j, i) = w;
  }
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j : g.neighbors(i)) s += p(i, j);
    p(i, i) = -s;
  }
  return p;
}

Mat mixing_matrix(const Mat& weights) {
  return Mat::Identity(weights.rows(), weights.cols()) - weights;
}

SpectralBounds spectral_bounds(const Mat& weights, double zero_tol) {
  const Vec ev = symmetric_eigenvalues(weights);
  SpectralBounds b{ev[ev.size() - 1], 0.0};
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    if (ev[k] > zero_tol) {
      b.lambda_min_nonzero = ev[k];
      break;
    }
  }
  return b;
}

void write_edge_list(std::ostream& out, const Graph& g) {
  out << g.node_count() << ' ' << g.edge_count() << '\n';
  for (const auto& [i, j] : g.edges()) out << i << ' ' << j << '\n';
}

Graph read_edge_list(std::istream& in) {
  int n = 0, e = 0;
  require(static_cast<bool>(in >> n >> e), ErrorCode::kParse, "edge list: missing 'N E' header");
  require(n >= 1 && e >= 0, ErrorCode::kParse, "edge list: bad header");
  std::vector<std::pair<int, int>> edges;
  for (int k = 0; k < e; ++k) {
    int i = 0, j = 0;
    require(static_cast<bool>(in >> i >> j), ErrorCode::kParse,
            "edge list: expected " + std::to_string(e) + " edges, got " + std::to_string(k));
    edges.push_back({i, j});
  }
  return Graph(n, std::move(edges));
}

void save_edge_list(const std::string& path, const Graph& g) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path);
  write_edge_list(out, g);
}

Graph load_edge_list(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot read " + path);
  return read_edge_list(in);
}

}  // namespace amml
