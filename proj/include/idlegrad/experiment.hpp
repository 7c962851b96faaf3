#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "idlegrad/engine.hpp"
#include "idlegrad/oracle.hpp"

namespace idlegrad {

// ---------------------------------------------------------------------------
// Declarative experiment description. Every field has a serialized JSON
// mirror (see parse_config / serialize_config); presets fill one in code.

struct GraphSpec {
  std::string kind = "geometric";  // geometric | path | complete | star | edge_list
  int n = 0;
  double radius = 0.0;   // geometric
  std::string edges;     // edge_list: "i j" per line
};

struct WeightSpec {
  std::string rule = "metropolis";  // metropolis | laplacian
  std::string pd_fix = "auto";      // auto | always | never
  double kappa = 0.1;               // strength of the positive-definite fix
  double c0 = 0.0;                  // laplacian rule: C = I - c0 * L
};

struct DatasetSpec {
  std::string kind = "synthetic";  // synthetic | libsvm | quadratic_uniform
  int samples_per_node = 2;        // synthetic
  int feature_dim = 3;             // synthetic: length of the feature vector
  double noise_sd = 0.1;           // synthetic label noise
  std::string path;                // libsvm file
  int densify_dim = 0;             // libsvm: fixed feature count (0 = infer)
  double lo = 0.0, hi = 5.0;       // quadratic_uniform center range
  int dim = 1;                     // quadratic_uniform center dimension
};

struct CostSpec {
  std::string kind = "logistic";  // logistic | quadratic_identity
  double regularizer = 0.1;
  std::string lipschitz_rule = "global_average";  // per_node_max | global_average
};

struct ConstraintSpec {
  std::string kind = "ball";  // ball | box
  double radius = 100.0;
  double lo = -1.0, hi = 1.0;  // box, replicated per coordinate
};

struct StepSpec {
  std::string rule = "inverse_l";  // inverse_l | absolute | grid
  double factor = 50.0;            // inverse_l: alpha = 1 / (factor * L)
  double value = 0.0;              // absolute
  std::vector<double> values;      // grid of absolute step sizes
};

struct ScheduleSpec {
  std::string kind = "geometric";  // always_on | geometric | half_geometric
                                   // | capped_geometric | sublinear
  std::string delta_rule = "from_alpha";  // from_alpha | absolute | from_theta
  double delta = 0.0;              // absolute
  double theta = 0.0;              // from_theta: delta = 1 - alpha * theta
  double floor = 0.1;              // capped_geometric probability floor
  double cap = 0.99999;            // largest admissible delta
  double cu = 0.5, zeta = 1.5;     // sublinear parameters
};

struct AsyncSpec {
  double link_up = 0.5;
  // Gradient-success probability per contiguous node block, in node order;
  // counts must sum to the node count.
  std::vector<std::pair<int, double>> grad_groups;
};

struct AlgorithmChoice {
  std::string name;  // output label; defaults to kind
  std::string kind;  // standard | idling | async | gossip
  AsyncSpec async;   // only read when kind == async
};

struct RunSpec {
  long budget = 1000;
  std::optional<double> target_eps;
  std::string eps_rule = "absolute";    // absolute | from_alpha (quadratic
                                        // consensus accuracy 2a(N-1)Rsp/(c0 l2))
  std::string stop_metric = "rel_err";  // rel_err | dist_to_consensus_opt
  int replicas = 1;
  std::uint64_t seed = 1;
  std::string trace_replicas = "first";  // first | all | none
};

struct ExperimentConfig {
  std::string name = "custom";
  GraphSpec graph;
  WeightSpec weights;
  DatasetSpec dataset;
  CostSpec cost;
  ConstraintSpec constraint;
  StepSpec step;
  ScheduleSpec schedule;
  std::vector<AlgorithmChoice> algorithms;
  std::string init = "zero";  // zero | constant_one | shared_random | per_node_uniform
  RunSpec run;
  std::string out_dir;  // empty: compute summaries but write no files
};

ExperimentConfig parse_config(const std::string& json_text);
std::string serialize_config(const ExperimentConfig& cfg);

// Named, fully pinned configurations. preset_names() lists them.
ExperimentConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

// ---------------------------------------------------------------------------
// Instantiation: everything derived from a config except the runs themselves.

struct BuiltProblem {
  Network net;
  Eigen::MatrixXd c;
  Spectrum spec;
  ProblemInstance prob;
  bool pd_fix_applied = false;
  std::string dataset_marker;  // "synthetic", the libsvm path, or
                               // "bundled-fixture" for the in-tree sample
};

BuiltProblem build_problem(const ExperimentConfig& cfg);

// Step size for one built problem (grid rule: values[index]).
double resolve_alpha(const ExperimentConfig& cfg, const ProblemInstance& prob,
                     size_t grid_index = 0);

// Activation schedule at a resolved step size.
ActivationSchedule resolve_schedule(const ExperimentConfig& cfg,
                                    const ProblemInstance& prob, double alpha);

// ---------------------------------------------------------------------------
// Execution and aggregation.

struct AlgorithmSummary {
  std::string name;
  Algorithm kind = Algorithm::standard;
  int replicas = 0;
  int reached_count = 0;          // replicas that hit target_eps
  double mean_iterations = 0.0;
  double mean_total_cost = 0.0;   // network-wide gradient evaluations
  double mean_final_metric = 0.0;
  double steady_state_metric = 0.0;  // mean metric over the last <=100 rows
  std::vector<double> per_replica_cost;    // total cost at stop
  std::vector<double> per_replica_final;   // final metric value
  std::vector<double> mean_metric_curve;   // per iteration, averaged over
  std::vector<double> mean_cost_curve;     //   replicas (shortest run wins)
};

struct ExperimentSummary {
  ExperimentConfig cfg;     // as executed (target_eps resolved)
  double alpha = 0.0;
  std::optional<double> eps;
  BuiltProblem built;
  Bounds bounds;
  OracleReport oracle;
  std::string schedule_text;
  std::vector<AlgorithmSummary> algorithms;
  // 100 * (1 - cost(idling) / cost(standard)) when both ran, else NaN.
  double savings_percent = kNaN;
};

// Runs every algorithm for every replica (replicas are paired through shared
// seeds), writes config/report/graph/trace/aggregate/histogram files when
// cfg.out_dir is nonempty, and returns the aggregates. `log` (optional)
// receives one progress line per algorithm.
ExperimentSummary run_experiment(const ExperimentConfig& cfg,
                                 std::ostream* log = nullptr);

// Grid variant (step.rule == "grid"): one run per step size, each written to
// <out_dir>/alpha_<index>, plus a top-level table.csv. Returns the summaries
// in grid order.
std::vector<ExperimentSummary> run_grid(const ExperimentConfig& cfg,
                                        std::ostream* log = nullptr);

// Serialized report (the contents of report.json) for one summary.
std::string report_json(const ExperimentSummary& s);

// Equal-width histogram over [min, max] with right-closed last bin; a
// degenerate sample collapses to a single bin.
struct HistogramBin {
  double lo = 0.0, hi = 0.0;
  long count = 0;
};
std::vector<HistogramBin> histogram(const std::vector<double>& values,
                                    int bins = 20);
std::string histogram_csv(const std::vector<HistogramBin>& bins);

// Fast cross-module invariant sweep; prints one PASS/FAIL line per check to
// `out` and returns the number of failures.
int run_check(std::ostream& out);

}  // namespace idlegrad
