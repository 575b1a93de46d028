#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "brdsgd/aggregation.hpp"

namespace brdsgd {

// Undirected simple graph over agents 0..n-1. Neighbor lists are kept sorted.
class Graph {
 public:
  explicit Graph(int n_agents = 0);

  int size() const { return static_cast<int>(adjacency_.size()); }

  // Returns false when the edge already exists. Throws on self-loops and
  // out-of-range endpoints.
  bool add_edge(int a, int b);
  bool has_edge(int a, int b) const;

  const std::vector<int>& neighbors(int a) const { return adjacency_.at(static_cast<std::size_t>(a)); }
  int degree(int a) const { return static_cast<int>(neighbors(a).size()); }
  std::size_t edge_count() const;

  // Edges as (a, b) with a < b in lexicographic order.
  std::vector<std::pair<int, int>> edges() const;

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  std::vector<std::vector<int>> adjacency_;
};

Graph complete_graph(int n);
Graph path_graph(int n);
Graph gen_erdos_renyi(int n, double p, std::uint64_t seed);

enum class Role { Honest, Byzantine };

class RoleAssignment {
 public:
  RoleAssignment() = default;
  explicit RoleAssignment(std::vector<Role> roles);

  static RoleAssignment all_honest(int n);
  // Picks `byzantine` agents uniformly at random.
  static RoleAssignment random(int n, int byzantine, std::uint64_t seed);
  static RoleAssignment with_byzantine(int n, std::span<const int> byzantine_ids);

  int size() const { return static_cast<int>(roles_.size()); }
  bool is_honest(int agent) const { return roles_.at(static_cast<std::size_t>(agent)) == Role::Honest; }
  const std::vector<int>& honest_ids() const { return honest_; }
  const std::vector<int>& byzantine_ids() const { return byzantine_; }
  // Position of an honest agent in honest_ids(), or -1 for Byzantine agents.
  int honest_index(int agent) const { return honest_index_.at(static_cast<std::size_t>(agent)); }
  const std::vector<Role>& roles() const { return roles_; }

 private:
  std::vector<Role> roles_;
  std::vector<int> honest_;
  std::vector<int> byzantine_;
  std::vector<int> honest_index_;
};

bool honest_subgraph_connected(const Graph& g, const RoleAssignment& roles);

// Row-stochastic weights over honest agents. Row/column i corresponds to
// agent `agents[i]`.
struct MixingMatrix {
  Eigen::MatrixXd weights;
  std::vector<int> agents;

  int size() const { return static_cast<int>(agents.size()); }
};

// Metropolis-Hastings weights on the subgraph induced by `members` (degrees
// counted inside that subgraph). Doubly stochastic.
Eigen::MatrixXd metropolis_matrix(const Graph& g, std::span<const int> members);

MixingMatrix build_metropolis_weights(const Graph& g, const RoleAssignment& roles);
// 11^T/|R|: the virtual mixing matrix of IOS on a fully connected graph.
MixingMatrix uniform_mixing(const RoleAssignment& roles);

double spectral_beta(const Eigen::MatrixXd& w);
double skewness_chi(const Eigen::MatrixXd& w);

struct SpectralSummary {
  double beta = 1.0;
  double chi = 0.0;
  double rho_star = 0.0;
};

SpectralSummary summarize(const MixingMatrix& w);

// Empirical contraction constant: the supremum of lhs/spread over sampled
// configurations. Always a lower bound on the true constant.
struct ContractionEstimate {
  double rho_hat = 0.0;
  int valid_trials = 0;
};

ContractionEstimate estimate_contraction(const RuleSpec& rule, const Graph& g,
                                         const RoleAssignment& roles, const MixingMatrix& w,
                                         int trials, std::uint64_t seed, int dim = 3);

// Plain-text graph format: `graph n=<N>` then one `edge a b` line per edge.
void write_graph(std::ostream& out, const Graph& g);
Graph read_graph(std::istream& in);

// Row-major CSV, one matrix row per line.
void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(std::istream& in);

}  // namespace brdsgd
