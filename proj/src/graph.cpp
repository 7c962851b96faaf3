#include "idlegrad/graph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>

namespace idlegrad {

bool is_connected(int n, const std::vector<std::pair<int, int>>& edges) {
  if (n <= 0) return false;
  std::vector<std::vector<int>> adj(n);
  for (const auto& [i, j] : edges) {
    adj[i].push_back(j);
    adj[j].push_back(i);
  }
  std::vector<char> seen(n, 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  int visited = 1;
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    for (int w : adj[v]) {
      if (!seen[w]) {
        seen[w] = 1;
        ++visited;
        q.push(w);
      }
    }
  }
  return visited == n;
}

Network make_network(int n, std::vector<std::pair<int, int>> edges,
                     std::optional<std::vector<Eigen::Vector2d>> positions) {
  if (n < 2) throw std::invalid_argument("network needs at least 2 nodes");
  for (auto& [i, j] : edges) {
    if (i < 0 || j < 0 || i >= n || j >= n)
      throw std::invalid_argument("edge endpoint out of range");
    if (i == j) throw std::invalid_argument("self-loops are not allowed");
    if (i > j) std::swap(i, j);
  }
  std::sort(edges.begin(), edges.end());
  if (std::adjacent_find(edges.begin(), edges.end()) != edges.end())
    throw std::invalid_argument("duplicate edge");
  if (!is_connected(n, edges))
    throw std::invalid_argument("graph is not connected");
  if (positions && static_cast<int>(positions->size()) != n)
    throw std::invalid_argument("positions size must equal node count");

  Network net;
  net.n = n;
  net.edges = std::move(edges);
  net.positions = std::move(positions);
  net.adj.resize(n);
  net.degree.assign(n, 0);
  for (int e = 0; e < net.edge_count(); ++e) {
    const auto [i, j] = net.edges[e];
    net.adj[i].push_back({j, e});
    net.adj[j].push_back({i, e});
    ++net.degree[i];
    ++net.degree[j];
  }
  return net;
}

Network random_geometric_graph(int n, double radius, Rng& rng,
                               int max_attempts) {
  if (n < 2) throw std::invalid_argument("network needs at least 2 nodes");
  if (!(radius > 0.0) || radius > std::sqrt(2.0) + 1e-12)
    throw std::invalid_argument("radius must lie in (0, sqrt(2)]");
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    std::vector<Eigen::Vector2d> pos(n);
    for (int i = 0; i < n; ++i) {
      const double x = rng.uniform();
      const double y = rng.uniform();
      pos[i] = Eigen::Vector2d(x, y);
    }
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if ((pos[i] - pos[j]).norm() < radius) edges.emplace_back(i, j);
    if (is_connected(n, edges))
      return make_network(n, std::move(edges), std::move(pos));
  }
  throw std::runtime_error(
      "no connected geometric graph found within the attempt budget; "
      "the radius is likely too small for this node count");
}

Network path_graph(int n) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  return make_network(n, std::move(edges));
}

Network complete_graph(int n) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) edges.emplace_back(i, j);
  return make_network(n, std::move(edges));
}

Network star_graph(int n) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 1; i < n; ++i) edges.emplace_back(0, i);
  return make_network(n, std::move(edges));
}

Eigen::MatrixXd metropolis_weights(const Network& net) {
  const int n = net.n;
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [i, j] : net.edges) {
    const double w = 1.0 / (1.0 + std::max(net.degree[i], net.degree[j]));
    c(i, j) = w;
    c(j, i) = w;
  }
  for (int i = 0; i < n; ++i) {
    double off = 0.0;
    for (const auto& arc : net.adj[i]) off += c(i, arc.neighbor);
    c(i, i) = 1.0 - off;
  }
  return c;
}

Eigen::MatrixXd laplacian_weights(const Network& net, double c0) {
  if (!(c0 > 0.0)) throw std::invalid_argument("c0 must be positive");
  const int max_deg = *std::max_element(net.degree.begin(), net.degree.end());
  if (c0 * max_deg > 1.0 + 1e-12)
    throw std::invalid_argument("c0 * max_degree must not exceed 1");
  const int n = net.n;
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [i, j] : net.edges) {
    c(i, j) = c0;
    c(j, i) = c0;
  }
  for (int i = 0; i < n; ++i) c(i, i) = 1.0 - c0 * net.degree[i];
  return c;
}

Eigen::MatrixXd ensure_positive_definite(const Eigen::MatrixXd& c,
                                         double kappa) {
  if (!(kappa > 0.0) || !(kappa < 1.0))
    throw std::invalid_argument("kappa must lie in (0, 1)");
  const auto n = c.rows();
  return ((kappa + 1.0) / 2.0) *
             Eigen::MatrixXd::Identity(n, n) +
         ((1.0 - kappa) / 2.0) * c;
}

Spectrum spectral_quantities(const Eigen::MatrixXd& c, const Network& net) {
  const int n = net.n;
  if (c.rows() != n || c.cols() != n)
    throw std::invalid_argument("weight matrix size must match node count");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c,
                                                    Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("eigensolver failed to converge on C");
  // Eigen returns eigenvalues ascending; the convention here indexes them
  // descending (lambda_1 = 1 is the largest), so lambda_2 is the
  // second-from-top and lambda_N the bottom entry.
  Spectrum s;
  s.lambda2_C = es.eigenvalues()(n - 2);
  s.lambdaN_C = es.eigenvalues()(0);

  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [i, j] : net.edges) {
    lap(i, j) = -1.0;
    lap(j, i) = -1.0;
  }
  for (int i = 0; i < n; ++i) lap(i, i) = net.degree[i];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esl(lap,
                                                     Eigen::EigenvaluesOnly);
  if (esl.info() != Eigen::Success)
    throw std::runtime_error("eigensolver failed to converge on Laplacian");
  s.laplacian_eigs = esl.eigenvalues();
  return s;
}

void validate_weight_matrix(const Eigen::MatrixXd& c, const Network& net,
                            bool require_positive_definite) {
  const int n = net.n;
  if (c.rows() != n || c.cols() != n)
    throw std::invalid_argument("weight matrix size must match node count");
  if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-14)
    throw std::invalid_argument("weight matrix is not symmetric");
  if ((c.rowwise().sum() - Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff() >
      1e-12)
    throw std::invalid_argument("weight matrix rows must sum to 1");
  if (c.minCoeff() < 0.0)
    throw std::invalid_argument("weight matrix has a negative entry");

  std::set<std::pair<int, int>> edge_set(net.edges.begin(), net.edges.end());
  for (int i = 0; i < n; ++i) {
    if (!(c(i, i) > 0.0))
      throw std::invalid_argument("weight matrix diagonal must be positive");
    for (int j = i + 1; j < n; ++j) {
      const bool has_edge = edge_set.count({i, j}) > 0;
      if (has_edge != (c(i, j) > 0.0))
        throw std::invalid_argument(
            "weight matrix sparsity pattern does not match the edge set");
    }
  }

  const Spectrum s = spectral_quantities(c, net);
  if (!(s.lambda2_C < 1.0))
    throw std::invalid_argument("lambda_2(C) must be below 1");
  // Positivity is decided at the eigensolver's own accuracy; an exact zero
  // eigenvalue comes back as noise of order 1e-16 and must not pass.
  if (require_positive_definite && !(s.lambdaN_C > 1e-10))
    throw std::invalid_argument("lambda_N(C) must be positive");
}

std::string serialize_edge_list(const Network& net) {
  std::ostringstream out;
  out << net.n << ' ' << net.edge_count() << '\n';
  for (const auto& [i, j] : net.edges) out << i << ' ' << j << '\n';
  return out.str();
}

Network parse_edge_list(const std::string& text) {
  std::istringstream in(text);
  int n = 0, m = 0;
  if (!(in >> n >> m)) throw std::invalid_argument("bad edge-list header");
  std::vector<std::pair<int, int>> edges;
  edges.reserve(m);
  for (int e = 0; e < m; ++e) {
    int i = 0, j = 0;
    if (!(in >> i >> j))
      throw std::invalid_argument("truncated edge list at edge " +
                                  std::to_string(e));
    edges.emplace_back(i, j);
  }
  return make_network(n, std::move(edges));
}

}  // namespace idlegrad
