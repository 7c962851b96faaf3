#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <variant>
#include <vector>

namespace idlegrad {

// ---------------------------------------------------------------------------
// Constraint sets with Euclidean projection.

struct BallSet {
  double radius;  // {x : ||x|| <= radius}
};
struct BoxSet {
  Eigen::VectorXd lo, hi;  // coordinatewise bounds, lo <= hi
};
using ConstraintSet = std::variant<BallSet, BoxSet>;

Eigen::VectorXd project(const ConstraintSet& set, const Eigen::VectorXd& y);

// D = max ||x|| over the set (Ball: the radius; Box: the norm of the corner
// with the largest coordinate magnitudes).
double max_norm_D(const ConstraintSet& set);

// ---------------------------------------------------------------------------
// Per-node cost models.

// Regularized logistic loss. samples[i] is node i's J x d matrix whose row j
// is the label-scaled augmented sample (b_ij * a_ij^T, b_ij); the loss is
//   f_i(x) = sum_j log(1 + exp(-row_j . x)) + (R/2) ||x||^2.
struct LogisticModel {
  std::vector<Eigen::MatrixXd> samples;
  double regularizer = 0.0;  // R > 0
};

// f_i(x) = (1/2) ||x - b_i||^2.
struct QuadraticIdentityModel {
  std::vector<Eigen::VectorXd> centers;
};

using CostModel = std::variant<LogisticModel, QuadraticIdentityModel>;

int node_count(const CostModel& model);
int dimension(const CostModel& model);

struct Evaluation {
  double value;
  Eigen::VectorXd gradient;
};

double node_value(const CostModel& model, int node, const Eigen::VectorXd& x);
Eigen::VectorXd node_gradient(const CostModel& model, int node,
                              const Eigen::VectorXd& x);
Evaluation evaluate(const CostModel& model, int node,
                    const Eigen::VectorXd& x);

// Numerically stable log(1 + e^t) and logistic sigmoid; the large-argument
// branch switches at |t| = 30.
inline double softplus(double t) {
  if (t > 30.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}
inline double sigmoid(double t) {
  if (t >= 0.0) {
    const double z = std::exp(-t);
    return 1.0 / (1.0 + z);
  }
  const double z = std::exp(t);
  return z / (1.0 + z);
}

// Batched evaluation of the global cost f(x) = sum_i f_i(x). Metric
// recording evaluates f at every node's iterate each iteration, so the
// samples are stacked once up front and reused.
class GlobalEvaluator {
 public:
  explicit GlobalEvaluator(const CostModel& model);

  double value(const Eigen::VectorXd& x) const;
  // f evaluated at each row of X (an N x d iterate matrix).
  Eigen::VectorXd values_at_rows(const Eigen::MatrixXd& x_rows) const;

 private:
  bool logistic_ = false;
  int n_nodes_ = 0;
  double reg_ = 0.0;               // logistic regularizer R
  Eigen::MatrixXd stacked_;        // all samples, S x d (logistic)
  Eigen::VectorXd center_sum_;     // sum of b_i (quadratic)
  double center_sq_sum_ = 0.0;     // sum of ||b_i||^2 (quadratic)
};

// ---------------------------------------------------------------------------
// Problem constants.

enum class LipschitzRule {
  per_node_max,    // L = (1/4) max_i ||sum_j c_ij c_ij^T|| + R
  global_average,  // L = (1/(4N)) ||sum_ij c_ij c_ij^T|| + R
};

struct ProblemInstance {
  CostModel model;
  ConstraintSet set;
  int n_nodes = 0;
  int dim = 0;
  double mu = 0.0;   // strong-convexity modulus
  double L = 0.0;    // gradient Lipschitz constant
  double G = 0.0;    // bound on ||grad f_i|| over the set: L*D + max_i ||grad f_i(0)||
  double D = 0.0;    // max norm over the set
  double M_f = 0.0;  // upper bound on f_i over the set: G*D + max_i |f_i(0)|
  double m_f = 0.0;  // lower bound, -M_f
};

// Computes every constant from the model and set. Throws
// std::invalid_argument on inconsistent model dimensions, a non-positive
// regularizer/radius, or a derived L below mu.
ProblemInstance derive_constants(CostModel model, ConstraintSet set,
                                 LipschitzRule rule =
                                     LipschitzRule::per_node_max);

}  // namespace idlegrad
