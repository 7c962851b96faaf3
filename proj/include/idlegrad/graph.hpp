#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "idlegrad/rng.hpp"

namespace idlegrad {

// Undirected simple connected communication graph on nodes 0..n-1.
struct Network {
  struct Arc {
    int neighbor;
    int edge;  // index into `edges`
  };

  int n = 0;
  std::vector<std::pair<int, int>> edges;  // normalized (i < j), sorted, unique
  std::vector<std::vector<Arc>> adj;       // per-node incident arcs
  std::vector<int> degree;
  // Node coordinates on the unit square when geometrically generated.
  std::optional<std::vector<Eigen::Vector2d>> positions;

  int edge_count() const { return static_cast<int>(edges.size()); }
};

// Validates and assembles a Network. Throws std::invalid_argument if n < 2,
// any endpoint is out of range, an edge is a self-loop or duplicate, or the
// graph is disconnected.
Network make_network(int n, std::vector<std::pair<int, int>> edges,
                     std::optional<std::vector<Eigen::Vector2d>> positions =
                         std::nullopt);

bool is_connected(int n, const std::vector<std::pair<int, int>>& edges);

// Places n nodes uniformly on the unit square and connects pairs closer than
// `radius`; re-samples placements until the graph is connected. Throws
// std::runtime_error after `max_attempts` failures (radius too small).
Network random_geometric_graph(int n, double radius, Rng& rng,
                               int max_attempts = 1000);

// Convenience constructors used by tests and presets.
Network path_graph(int n);
Network complete_graph(int n);
Network star_graph(int n);  // hub is node 0

// Metropolis weights: C_ij = 1/(1+max(deg_i,deg_j)) on edges, diagonal fills
// each row to sum 1. Symmetric and doubly stochastic; the smallest eigenvalue
// may still be <= 0 (fix with ensure_positive_definite).
Eigen::MatrixXd metropolis_weights(const Network& net);

// Equal-weight matrix C = I - c0*Laplacian (0/1 Laplacian). Requires
// c0 > 0 and c0 * max_degree <= 1 so the diagonal stays nonnegative.
Eigen::MatrixXd laplacian_weights(const Network& net, double c0);

// Returns ((kappa+1)/2)*I + ((1-kappa)/2)*c. Maps each eigenvalue lambda to
// (kappa+1)/2 + (1-kappa)/2 * lambda, so the output's smallest eigenvalue
// exceeds kappa while the sparsity pattern and row sums are preserved.
Eigen::MatrixXd ensure_positive_definite(const Eigen::MatrixXd& c,
                                         double kappa = 0.1);

struct Spectrum {
  double lambda2_C = 0.0;   // second-largest eigenvalue of C
  double lambdaN_C = 0.0;   // smallest eigenvalue of C
  Eigen::VectorXd laplacian_eigs;  // 0/1-Laplacian eigenvalues, ascending
};

// Symmetric eigendecomposition of C plus the unweighted Laplacian spectrum.
// Throws std::runtime_error if the eigensolver fails to converge.
Spectrum spectral_quantities(const Eigen::MatrixXd& c, const Network& net);

// Checks every weight-matrix invariant (symmetry, row sums, sign pattern
// matching the edge set, positive diagonal, lambda_2 < 1 and — unless
// require_positive_definite is false — lambda_N > 0). Throws
// std::invalid_argument naming the violated invariant.
void validate_weight_matrix(const Eigen::MatrixXd& c, const Network& net,
                            bool require_positive_definite = true);

// Edge-list text format: first line "n m", then m lines "i j" (0-based).
std::string serialize_edge_list(const Network& net);
Network parse_edge_list(const std::string& text);

}  // namespace idlegrad
