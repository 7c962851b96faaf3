#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "idlegrad/costs.hpp"
#include "idlegrad/graph.hpp"
#include "idlegrad/rng.hpp"
#include "idlegrad/schedule.hpp"

namespace idlegrad {

enum class Algorithm { standard, idling, async, gossip };

// Initial iterate policy. Random draws use the init stream, node-major then
// coordinate-major, so equal seeds reproduce equal starting points.
enum class InitKind {
  zero,              // projection of the origin
  constant_one,      // projection of the all-ones point, same at every node
  shared_random,     // one uniform [-50, 50]^d point projected, shared
  per_node_uniform,  // independent uniform [-50, 50]^d point per node
};

enum class StopMetric { rel_err, dist_to_consensus_opt };

const char* algorithm_name(Algorithm a);

struct RunState {
  Eigen::MatrixXd x;            // N x d, row i is node i's iterate
  Eigen::MatrixXd running_sum;  // sum of x over completed iterations
  long k = 0;
  long total_cost = 0;  // cumulative units of work (gradient evaluations)
  int last_active_count = 0;
};

// Mixing-matrix realization for an activation pattern: C_ij z_i z_j on edges,
// zero elsewhere off the diagonal, diagonal chosen so every row sums to one.
// An idle node's row collapses to the coordinate basis vector.
Eigen::MatrixXd build_weight_realization(const Eigen::MatrixXd& c,
                                         const Network& net,
                                         const ActivationVector& z);

// One synchronous iteration with every node working: consensus mixing with
// all neighbors followed by a projected gradient step.
void step_standard(RunState& s, const ProblemInstance& prob,
                   const Network& net, const Eigen::MatrixXd& c, double alpha);

// One iteration where only the nodes flagged in z update. An active node
// mixes with its active neighbors only and scales its gradient by 1/p_k;
// idle nodes keep their iterate.
void step_idling(RunState& s, const ProblemInstance& prob, const Network& net,
                 const Eigen::MatrixXd& c, double alpha,
                 const ActivationVector& z, double p_k);

// Idling iteration with unreliable links and gradient computations layered
// on top of the node activations: an active pair exchanges only when their
// link is up, and an active node applies its gradient only when the
// computation succeeded.
void step_async(RunState& s, const ProblemInstance& prob, const Network& net,
                const Eigen::MatrixXd& c, double alpha,
                const ActivationVector& z, const AsyncBits& bits, double p_k);

// One pairwise-gossip iteration: a uniformly random edge averages its two
// endpoints and each endpoint takes a projected gradient step from the
// average using its own (pre-average) gradient.
void step_gossip(RunState& s, const ProblemInstance& prob, const Network& net,
                 double alpha, Rng& rng);

// Row i of the penalty-function gradient:
//   grad f_i(x_i) + (1/alpha) sum_j C_ij (x_i - x_j).
Eigen::MatrixXd penalty_gradient(const ProblemInstance& prob,
                                 const Eigen::MatrixXd& c,
                                 const Eigen::MatrixXd& x, double alpha);

// Gradient error of the idling step relative to the penalty gradient, so
// that the update reads  x+ = P{ x - alpha (penalty_gradient + e) }:
//   e_i = (z_i/p_k - 1) grad f_i(x_i)
//         + (1/alpha) sum_j C_ij (z_i z_j - 1)(x_i - x_j).
Eigen::MatrixXd error_vector(const ProblemInstance& prob, const Network& net,
                             const Eigen::MatrixXd& c,
                             const Eigen::MatrixXd& x,
                             const ActivationVector& z, double p_k,
                             double alpha);

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct TraceRow {
  long k = 0;
  double rel_err = kNaN;        // (1/N) sum_i (f(x_i) - f*) / f*
  double avg_cost = 0.0;        // total_cost / N
  double disagreement = 0.0;    // || x - (1/N) 1 1^T x ||_F
  double dist_to_penalty_opt = kNaN;    // || x - x_penalty ||_F
  double dist_to_consensus_opt = kNaN;  // || x - 1 (x*)^T ||_F
  double running_avg_value = kNaN;  // f at the time average of the row mean
  long total_cost = 0;
  int active_count = 0;
};

std::string trace_csv_header();
std::string trace_csv_row(const TraceRow& row);

// Reference quantities the metrics are measured against. Empty members mean
// "unknown" and yield NaN in the corresponding trace column.
struct OracleRefs {
  double f_star = kNaN;         // min over the set of sum_i f_i
  Eigen::VectorXd x_star;       // the minimizer (d-vector)
  Eigen::MatrixXd x_penalty;    // N x d minimizer of the penalty function
};

TraceRow record_metrics(const RunState& s, const GlobalEvaluator& eval,
                        const OracleRefs& refs);

struct RunConfig {
  Algorithm algorithm = Algorithm::standard;
  double alpha = 0.0;
  long budget = 0;                   // maximum number of iterations
  std::optional<double> target_eps;  // stop once the metric falls to eps
  StopMetric stop_metric = StopMetric::rel_err;
  InitKind init = InitKind::zero;
  ActivationSchedule schedule = AlwaysOn{};
  std::optional<AsyncConfig> async;  // required by Algorithm::async
  std::uint64_t master_seed = 1;
  std::uint64_t replica = 0;
  // Replica index whose stream seeds the starting iterate. Negative means
  // "this replica". Monte-Carlo studies that vary only the activation draws
  // set this to 0 so every replica departs from the same initial point.
  long init_replica = -1;
};

struct RunResult {
  std::vector<TraceRow> trace;  // row 0 is the initial point (k = 0)
  Eigen::MatrixXd final_x;
  bool reached_target = false;
  long iterations = 0;
  long total_cost = 0;
};

// Simulate one sample path. Records a trace row before the first step and
// after every iteration; stops at the first row whose stop metric is at or
// below target_eps (when set) or when the iteration budget runs out.
RunResult run(const ProblemInstance& prob, const Network& net,
              const Eigen::MatrixXd& c, const RunConfig& cfg,
              const OracleRefs& refs);

}  // namespace idlegrad
