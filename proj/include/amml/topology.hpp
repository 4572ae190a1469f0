#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "amml/linalg.hpp"

namespace amml {

// Undirected simple graph on nodes 0..N-1. Edges are stored with i < j,
// sorted lexicographically.
class Graph {
 public:
  Graph(int node_count, std::vector<std::pair<int, int>> edges);

  int node_count() const { return node_count_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<int>& neighbors(int i) const { return adjacency_[static_cast<std::size_t>(i)]; }
  int degree(int i) const { return static_cast<int>(neighbors(i).size()); }
  bool adjacent(int i, int j) const;
  bool connected() const;

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.node_count_ == b.node_count_ && a.edges_ == b.edges_;
  }

 private:
  int node_count_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> adjacency_;
};

// Random spanning tree followed by uniformly sampled extra edges.
Graph generate_graph(int node_count, int edge_count, std::uint64_t seed);

// p_ij = -1/(max(deg_i, deg_j) + 1) on edges, diagonal closes each row to zero.
Mat metropolis_weights(const Graph& g);

// W = I - P.
Mat mixing_matrix(const Mat& weights);

struct SpectralBounds {
  double lambda_max;
  double lambda_min_nonzero;
};

SpectralBounds spectral_bounds(const Mat& weights, double zero_tol = 1e-10);

// Plain edge-list text: "N E" header, then one "i j" pair per line (0-indexed).
void write_edge_list(std::ostream& out, const Graph& g);
Graph read_edge_list(std::istream& in);
void save_edge_list(const std::string& path, const Graph& g);
Graph load_edge_list(const std::string& path);

}  // namespace amml
