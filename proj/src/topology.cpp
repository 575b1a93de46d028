#include "brdsgd/topology.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <queue>
#include <sstream>
#include <string>

#include "brdsgd/error.hpp"
#include "brdsgd/random.hpp"

namespace brdsgd {

Graph::Graph(int n_agents) {
  if (n_agents < 0) throw Error(ErrorCode::InvalidArgument, "negative agent count");
  adjacency_.resize(static_cast<std::size_t>(n_agents));
}

bool Graph::add_edge(int a, int b) {
  if (a < 0 || b < 0 || a >= size() || b >= size()) {
    throw Error(ErrorCode::InvalidArgument, "edge endpoint out of range");
  }
  if (a == b) throw Error(ErrorCode::InvalidArgument, "self-loops are not allowed");
  auto& na = adjacency_[static_cast<std::size_t>(a)];
  auto it = std::lower_bound(na.begin(), na.end(), b);
  if (it != na.end() && *it == b) return false;
  na.insert(it, b);
  auto& nb = adjacency_[static_cast<std::size_t>(b)];
  nb.insert(std::lower_bound(nb.begin(), nb.end(), a), a);
  return true;
}

bool Graph::has_edge(int a, int b) const {
  if (a < 0 || b < 0 || a >= size() || b >= size()) return false;
  const auto& na = adjacency_[static_cast<std::size_t>(a)];
  return std::binary_search(na.begin(), na.end(), b);
}

std::size_t Graph::edge_count() const {
  std::size_t total = 0;
  for (const auto& n : adjacency_) total += n.size();
  return total / 2;
}

std::vector<std::pair<int, int>> Graph::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int a = 0; a < size(); ++a) {
    for (int b : neighbors(a)) {
      if (a < b) out.emplace_back(a, b);
    }
  }
  return out;
}

Graph complete_graph(int n) {
  Graph g(n);
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) g.add_edge(a, b);
  }
  return g;
}

Graph path_graph(int n) {
  Graph g(n);
  for (int a = 0; a + 1 < n; ++a) g.add_edge(a, a + 1);
  return g;
}

Graph gen_erdos_renyi(int n, double p, std::uint64_t seed) {
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 agents");
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidArgument, "p must lie in [0,1]");
  auto gen = make_stream(seed, StreamPurpose::Graph);
  std::bernoulli_distribution coin(p);
  Graph g(n);
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (coin(gen)) g.add_edge(a, b);
    }
  }
  return g;
}

RoleAssignment::RoleAssignment(std::vector<Role> roles) : roles_(std::move(roles)) {
  honest_index_.assign(roles_.size(), -1);
  for (int i = 0; i < static_cast<int>(roles_.size()); ++i) {
    if (roles_[static_cast<std::size_t>(i)] == Role::Honest) {
      honest_index_[static_cast<std::size_t>(i)] = static_cast<int>(honest_.size());
      honest_.push_back(i);
    } else {
      byzantine_.push_back(i);
    }
  }
}

RoleAssignment RoleAssignment::all_honest(int n) {
  return RoleAssignment(std::vector<Role>(static_cast<std::size_t>(n), Role::Honest));
}

RoleAssignment RoleAssignment::random(int n, int byzantine, std::uint64_t seed) {
  if (byzantine < 0 || byzantine >= n) {
    throw Error(ErrorCode::InvalidArgument, "need 0 <= byzantine < agents");
  }
  std::vector<int> ids(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = i;
  auto gen = make_stream(seed, StreamPurpose::Roles);
  // Partial Fisher-Yates with an explicit index draw for portability of the stream.
  for (int i = 0; i < byzantine; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(pick(gen))]);
  }
  return with_byzantine(n, std::span<const int>(ids.data(), static_cast<std::size_t>(byzantine)));
}

RoleAssignment RoleAssignment::with_byzantine(int n, std::span<const int> byzantine_ids) {
  std::vector<Role> roles(static_cast<std::size_t>(n), Role::Honest);
  for (int b : byzantine_ids) {
    if (b < 0 || b >= n) throw Error(ErrorCode::InvalidArgument, "byzantine id out of range");
    roles[static_cast<std::size_t>(b)] = Role::Byzantine;
  }
  return RoleAssignment(std::move(roles));
}

bool honest_subgraph_connected(const Graph& g, const RoleAssignment& roles) {
  if (roles.size() != g.size()) {
    throw Error(ErrorCode::InvalidArgument, "role assignment does not cover the graph");
  }
  const auto& honest = roles.honest_ids();
  if (honest.empty()) return false;
  std::vector<bool> seen(static_cast<std::size_t>(g.size()), false);
  std::queue<int> frontier;
  frontier.push(honest.front());
  seen[static_cast<std::size_t>(honest.front())] = true;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    const int a = frontier.front();
    frontier.pop();
    for (int b : g.neighbors(a)) {
      if (!roles.is_honest(b) || seen[static_cast<std::size_t>(b)]) continue;
      seen[static_cast<std::size_t>(b)] = true;
      ++reached;
      frontier.push(b);
    }
  }
  return reached == honest.size();
}

Eigen::MatrixXd metropolis_matrix(const Graph& g, std::span<const int> members) {
  const auto n = static_cast<Eigen::Index>(members.size());
  std::vector<int> position(static_cast<std::size_t>(g.size()), -1);
  for (Eigen::Index i = 0; i < n; ++i) position[static_cast<std::size_t>(members[i])] = static_cast<int>(i);
  std::vector<int> degree(members.size(), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int b : g.neighbors(members[i])) {
      if (position[static_cast<std::size_t>(b)] >= 0) ++degree[static_cast<std::size_t>(i)];
    }
  }
  // Diagonal as 1/(1+d_i) plus the slack of each neighbor with a larger degree,
  // rather than 1 - sum: same value, no cancellation, exact on regular graphs.
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int di = degree[static_cast<std::size_t>(i)];
    const double own = 1.0 / (1.0 + di);
    double slack = 0.0;
    for (int b : g.neighbors(members[i])) {
      const int j = position[static_cast<std::size_t>(b)];
      if (j < 0) continue;
      const double wij = 1.0 / (1.0 + std::max(di, degree[static_cast<std::size_t>(j)]));
      w(i, j) = wij;
      slack += own - wij;
    }
    w(i, i) = own + slack;
  }
  return w;
}

MixingMatrix build_metropolis_weights(const Graph& g, const RoleAssignment& roles) {
  if (!honest_subgraph_connected(g, roles)) {
    throw Error(ErrorCode::DisconnectedHonestSubgraph, "honest agents are not connected");
  }
  MixingMatrix m;
  m.agents = roles.honest_ids();
  m.weights = metropolis_matrix(g, m.agents);
  return m;
}

MixingMatrix uniform_mixing(const RoleAssignment& roles) {
  MixingMatrix m;
  m.agents = roles.honest_ids();
  const auto n = static_cast<Eigen::Index>(m.agents.size());
  m.weights = Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  return m;
}

double spectral_beta(const Eigen::MatrixXd& w) {
  const auto n = w.rows();
  if (n != w.cols() || n == 0) throw Error(ErrorCode::InvalidArgument, "mixing matrix must be square");
  if (n == 1) return 1.0;
  // (I - 11^T/n) W, i.e. W with its column means removed.
  const Eigen::MatrixXd centered = w.rowwise() - w.colwise().mean();
  const Eigen::MatrixXd gram = centered.transpose() * centered;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  const double norm_sq = std::max(0.0, eig.eigenvalues().maxCoeff());
  const double beta = 1.0 - norm_sq;
  if (!(beta > 0.0)) {
    throw Error(ErrorCode::BetaOutOfRange, "beta = " + std::to_string(beta) + " is not in (0,1]");
  }
  return beta;
}

double skewness_chi(const Eigen::MatrixXd& w) {
  const auto n = w.rows();
  if (n == 0) return 0.0;
  const Eigen::VectorXd excess = w.colwise().sum().transpose() - Eigen::VectorXd::Ones(n);
  return std::sqrt(excess.squaredNorm() / static_cast<double>(n));
}

SpectralSummary summarize(const MixingMatrix& w) {
  SpectralSummary s;
  s.beta = spectral_beta(w.weights);
  s.chi = skewness_chi(w.weights);
  s.rho_star = s.beta / (8.0 * std::sqrt(static_cast<double>(w.size())));
  return s;
}

void write_graph(std::ostream& out, const Graph& g) {
  out << "graph n=" << g.size() << '\n';
  for (const auto& [a, b] : g.edges()) out << "edge " << a << ' ' << b << '\n';
}

Graph read_graph(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::IoError, "empty graph stream");
  int n = -1;
  if (std::sscanf(line.c_str(), "graph n=%d", &n) != 1 || n < 0) {
    throw Error(ErrorCode::IoError, "bad graph header: '" + line + "'");
  }
  Graph g(n);
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string tag;
    int a = 0;
    int b = 0;
    if (!(row >> tag >> a >> b) || tag != "edge") {
      throw Error(ErrorCode::IoError, "bad graph line: '" + line + "'");
    }
    if (!g.add_edge(a, b)) throw Error(ErrorCode::IoError, "duplicate edge: '" + line + "'");
  }
  return g;
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m) {
  char buf[32];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      out << (j ? "," : "") << buf;
    }
    out << '\n';
  }
}

Eigen::MatrixXd read_matrix_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error(ErrorCode::IoError, "bad matrix cell '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorCode::IoError, "ragged matrix rows");
    }
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

}  // namespace brdsgd
