#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "idlegrad/costs.hpp"
#include "idlegrad/rng.hpp"

namespace idlegrad {

// Labeled samples with dense feature storage (feature dimension d-1; the
// optimization variable gains one intercept coordinate on top).
struct Dataset {
  Eigen::MatrixXd features;  // sample_count x (d-1)
  std::vector<int> labels;   // entries in {-1, +1}

  int sample_count() const { return static_cast<int>(features.rows()); }
  int feature_dim() const { return static_cast<int>(features.cols()); }
};

// Equal-size per-node partition of a dataset.
struct NodeShards {
  int n_nodes = 0;
  int per_node = 0;  // J
  std::vector<Dataset> shards;
};

struct SyntheticData {
  NodeShards shards;
  Eigen::VectorXd true_x;  // dimension d; last entry is the intercept
};

// Draws a separating vector and i.i.d. standard-normal features, then labels
// each sample by the sign (sign(0) = +1) of the noisy margin
// true_x_1 . a + true_x_0 + Normal(0, noise_sd).
SyntheticData gen_synthetic(int n_nodes, int j_per_node, int dim_minus_1,
                            double noise_sd, Rng& rng);

// Parses LIBSVM text: `<label> <idx>:<val> ...` per line, 1-based indices in
// strictly increasing order, labels "+1"/"1"/"-1", blank lines skipped.
// Features are densified to max index seen, or to `configured_dim` when
// positive. Malformed input raises std::invalid_argument citing the line.
Dataset parse_libsvm(const std::string& text, int configured_dim = 0);

// Inverse of parse_libsvm (zeros omitted, full double precision).
std::string serialize_libsvm(const Dataset& ds);

// Drops the last (sample_count mod n_nodes) samples, then assigns contiguous
// equal blocks in file order. Throws if there are fewer samples than nodes.
NodeShards partition(const Dataset& ds, int n_nodes);

// Builds the per-node logistic cost rows c_ij = (b_ij * a_ij^T, b_ij).
LogisticModel to_logistic_model(const NodeShards& shards, double regularizer);

}  // namespace idlegrad
