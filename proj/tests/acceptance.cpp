// Acceptance gate. Each numbered check exercises one documented guarantee of
// the simulator end to end, at the tolerance stated in its summary line.
//
//   acceptance          runs every check
//   acceptance <n>      runs check n (1..14)
//
// Exactly one "[PASS] criterion NN: ..." or "[FAIL] criterion NN: ..." line
// is printed per check; the exit code is the number of failures.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "idlegrad/costs.hpp"
#include "idlegrad/data.hpp"
#include "idlegrad/engine.hpp"
#include "idlegrad/experiment.hpp"
#include "idlegrad/graph.hpp"
#include "idlegrad/oracle.hpp"
#include "idlegrad/rng.hpp"
#include "idlegrad/schedule.hpp"

using namespace idlegrad;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, const char* spec = "%.4g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

// Mean and standard error of one sample.
struct MeanSe {
  double mean = 0.0, se = 0.0;
};
MeanSe mean_se(double sum, double sum_sq, long n) {
  MeanSe m;
  m.mean = sum / static_cast<double>(n);
  const double var =
      std::max(0.0, sum_sq / static_cast<double>(n) - m.mean * m.mean);
  m.se = std::sqrt(var / static_cast<double>(n));
  return m;
}

constexpr double kSlack = 1e-12;  // absolute allowance on bound comparisons

// ---------------------------------------------------------------------------
// Random small instances shared by checks 1 and 5.

struct SmallInstance {
  Network net;
  Eigen::MatrixXd c;
  Spectrum spec;
  ProblemInstance prob;
  double alpha = 0.0;
};

SmallInstance random_small_instance(std::uint64_t index) {
  Rng rng(101, index, Stream::scratch);
  const int n = 2 + static_cast<int>(rng.next_u64() % 5);  // 2..6
  const bool quadratic = (index % 2) == 0;
  const int dim = quadratic ? 1 + static_cast<int>(rng.next_u64() % 3)
                            : 2 + static_cast<int>(rng.next_u64() % 2);

  SmallInstance inst;
  switch (rng.next_u64() % 3) {
    case 0: inst.net = path_graph(n); break;
    case 1: inst.net = complete_graph(n); break;
    default: inst.net = star_graph(n); break;
  }
  inst.c = metropolis_weights(inst.net);
  // Small symmetric graphs often carry an exact zero weight eigenvalue that
  // the eigensolver reports as +-1e-17; require clear positivity before
  // skipping the fix, or the step-size cap below collapses to round-off.
  Spectrum raw = spectral_quantities(inst.c, inst.net);
  if (raw.lambdaN_C < 1e-6) inst.c = ensure_positive_definite(inst.c, 0.1);
  inst.spec = spectral_quantities(inst.c, inst.net);

  CostModel model;
  if (quadratic) {
    QuadraticIdentityModel qm;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd b(dim);
      for (int j = 0; j < dim; ++j) b[j] = rng.uniform(-5.0, 5.0);
      qm.centers.push_back(b);
    }
    model = std::move(qm);
  } else {
    Rng data_rng(101, index, Stream::data_gen);
    const SyntheticData sd = gen_synthetic(n, 2, dim - 1, 0.1, data_rng);
    model = to_logistic_model(sd.shards, 0.1);
  }

  ConstraintSet set;
  if (index % 3 == 0) {
    const double r = rng.uniform(2.0, 10.0);
    set = BoxSet{Eigen::VectorXd::Constant(dim, -r),
                 Eigen::VectorXd::Constant(dim, r)};
  } else {
    set = BallSet{rng.uniform(3.0, 30.0)};
  }

  inst.prob = derive_constants(std::move(model), std::move(set),
                               quadratic ? LipschitzRule::per_node_max
                                         : LipschitzRule::global_average);
  // Keep the synchronous map a contraction so its fixed point is solvable.
  inst.alpha = std::min(rng.uniform(0.005, 0.2),
                        0.9 * inst.spec.lambdaN_C / inst.prob.L);
  return inst;
}

Eigen::MatrixXd random_feasible_point(const ProblemInstance& prob, Rng& rng) {
  Eigen::MatrixXd x(prob.n_nodes, prob.dim);
  for (int i = 0; i < prob.n_nodes; ++i) {
    Eigen::VectorXd row(prob.dim);
    for (int j = 0; j < prob.dim; ++j) row[j] = rng.uniform(-prob.D, prob.D);
    x.row(i) = project(prob.set, row);
  }
  return x;
}

// Starting iterate drawn the way the synthetic presets draw it: one uniform
// [-50, 50]^d point per node, projected. Shared across replicas.
Eigen::MatrixXd shared_uniform_init(const ProblemInstance& prob,
                                    std::uint64_t master_seed) {
  Rng rng(master_seed, 0, Stream::init);
  Eigen::MatrixXd x(prob.n_nodes, prob.dim);
  for (int i = 0; i < prob.n_nodes; ++i) {
    Eigen::VectorXd row(prob.dim);
    for (int j = 0; j < prob.dim; ++j) row[j] = rng.uniform(-50.0, 50.0);
    x.row(i) = project(prob.set, row);
  }
  return x;
}

// ---------------------------------------------------------------------------
// 1. One synchronous step is exactly one projected gradient step on the
//    penalty function, on random mixed instances.

Outcome criterion_penalty_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const SmallInstance inst = random_small_instance(i);
    Rng rng(102, i, Stream::scratch);
    const Eigen::MatrixXd x0 = random_feasible_point(inst.prob, rng);

    RunState s;
    s.x = x0;
    s.running_sum = Eigen::MatrixXd::Zero(x0.rows(), x0.cols());
    step_standard(s, inst.prob, inst.net, inst.c, inst.alpha);

    const Eigen::MatrixXd g =
        penalty_gradient(inst.prob, inst.c, x0, inst.alpha);
    Eigen::MatrixXd expected(x0.rows(), x0.cols());
    for (int r = 0; r < x0.rows(); ++r)
      expected.row(r) =
          project(inst.prob.set, (x0.row(r) - inst.alpha * g.row(r)));

    worst = std::max(worst, (s.x - expected).cwiseAbs().maxCoeff());
  }
  const double elapsed = seconds_since(t0);
  return {worst < 1e-12 && elapsed < 5.0,
          "synchronous step vs projected penalty-gradient step on 50 random "
          "instances: max |diff| " +
              fmt(worst, "%.3g") + " (< 1e-12), " + fmt(elapsed, "%.2f") +
              " s (< 5 s)"};
}

// ---------------------------------------------------------------------------
// 2. Three-node scalar instance whose synchronous iteration contracts the
//    distance to the optimum by exactly 1 - alpha each step.

Outcome criterion_exact_contraction() {
  ExperimentConfig cfg = preset_config("remark2");
  const BuiltProblem bp = build_problem(cfg);
  OracleRefs refs;
  refs.f_star = 0.0;
  refs.x_star = Eigen::VectorXd::Zero(1);

  double worst = 0.0;
  for (const double alpha : {0.1, 0.5, bp.spec.lambdaN_C}) {
    RunConfig rc;
    rc.algorithm = Algorithm::standard;
    rc.alpha = alpha;
    rc.budget = 50;
    rc.stop_metric = StopMetric::dist_to_consensus_opt;
    rc.init = InitKind::constant_one;
    const RunResult rr = run(bp.prob, bp.net, bp.c, rc, refs);
    for (size_t k = 0; k + 1 < rr.trace.size(); ++k) {
      const double ratio = rr.trace[k + 1].dist_to_consensus_opt /
                           rr.trace[k].dist_to_consensus_opt;
      worst = std::max(worst, std::abs(ratio / (1.0 - alpha) - 1.0));
    }
  }
  return {worst < 1e-12,
          "per-step contraction factor equals 1 - alpha for alpha in "
          "{0.1, 0.5, " +
              fmt(bp.spec.lambdaN_C) + "}: max relative deviation " +
              fmt(worst, "%.3g") + " (< 1e-12)"};
}

// ---------------------------------------------------------------------------
// 3. Random mixing-matrix realizations at the schedule floor probability:
//    exact structure, spectral range, and the mean-square deviation bound.

Outcome criterion_mixing_matrix_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig cfg = preset_config("fig1");
  const BuiltProblem bp = build_problem(cfg);
  const double alpha = resolve_alpha(cfg, bp.prob);
  const ActivationSchedule sched = resolve_schedule(cfg, bp.prob, alpha);
  const Bounds bounds = compute_bounds(bp.prob, bp.spec, sched, alpha);
  const double p = bounds.p_min;
  const int n = bp.prob.n_nodes;

  const Eigen::MatrixXd j_mat =
      Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);

  Rng rng(303, 0, Stream::scratch);
  double structure_worst = 0.0;
  double eig_min = 2.0, eig_max = -2.0;
  double sum = 0.0, sum_sq = 0.0;
  const long draws = 10000;
  for (long t = 0; t < draws; ++t) {
    const ActivationVector z = draw_activations(p, n, rng, t);
    const Eigen::MatrixXd w = build_weight_realization(bp.c, bp.net, z);

    structure_worst =
        std::max(structure_worst,
                 (w - w.transpose()).cwiseAbs().maxCoeff());
    structure_worst =
        std::max(structure_worst, (w * ones - ones).cwiseAbs().maxCoeff());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
        w, Eigen::EigenvaluesOnly);
    eig_min = std::min(eig_min, es.eigenvalues().minCoeff());
    eig_max = std::max(eig_max, es.eigenvalues().maxCoeff());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> dev(
        w - j_mat, Eigen::EigenvaluesOnly);
    const double norm_sq =
        std::pow(std::max(std::abs(dev.eigenvalues().minCoeff()),
                          std::abs(dev.eigenvalues().maxCoeff())),
                 2);
    sum += norm_sq;
    sum_sq += norm_sq * norm_sq;
  }
  const MeanSe m = mean_se(sum, sum_sq, draws);
  const double elapsed = seconds_since(t0);

  const bool structure_ok = structure_worst <= 1e-12;
  const bool range_ok = eig_min > 0.0 && eig_max <= 1.0 + 1e-12;
  const bool mean_ok = m.mean <= bounds.beta_sq + 3.0 * m.se + kSlack;
  return {structure_ok && range_ok && mean_ok && elapsed < 60.0,
          "10^4 mixing realizations at p = " + fmt(p) +
              ": structure deviation " + fmt(structure_worst, "%.3g") +
              ", eigenvalues in [" + fmt(eig_min) + ", " + fmt(eig_max) +
              "], mean sq deviation from the averaging matrix " +
              fmt(m.mean, "%.6g") + " <= " + fmt(bounds.beta_sq, "%.6g") +
              " + 3 SE, " + fmt(elapsed, "%.1f") + " s (< 60 s)"};
}

// ---------------------------------------------------------------------------
// 4. Variable-activity sample paths: per-iteration disagreement and
//    gradient-error second moments stay below their closed-form bounds.

Outcome criterion_disagreement_and_error_bounds() {
  const ExperimentConfig cfg = preset_config("fig1");
  const BuiltProblem bp = build_problem(cfg);
  const double alpha = resolve_alpha(cfg, bp.prob);
  const ActivationSchedule sched = resolve_schedule(cfg, bp.prob, alpha);
  const Bounds bounds = compute_bounds(bp.prob, bp.spec, sched, alpha);
  const int n = bp.prob.n_nodes;
  const long horizon = 2000;
  const int replicas = 100;

  const Eigen::MatrixXd x0 = shared_uniform_init(bp.prob, cfg.run.seed);

  std::vector<double> dis_sum(horizon, 0.0), dis_sq(horizon, 0.0);
  std::vector<double> err_sum(horizon, 0.0), err_sq(horizon, 0.0);
  for (int r = 0; r < replicas; ++r) {
    Rng act(cfg.run.seed, static_cast<std::uint64_t>(r), Stream::activation);
    RunState s;
    s.x = x0;
    s.running_sum = Eigen::MatrixXd::Zero(n, bp.prob.dim);
    for (long k = 0; k < horizon; ++k) {
      const double p_k = probability(sched, k);
      const ActivationVector z = draw_activations(p_k, n, act, k);

      const Eigen::RowVectorXd mean_row = s.x.colwise().mean();
      const double dis =
          (s.x - Eigen::VectorXd::Ones(n) * mean_row).squaredNorm();
      dis_sum[k] += dis;
      dis_sq[k] += dis * dis;

      const double err =
          error_vector(bp.prob, bp.net, bp.c, s.x, z, p_k, alpha)
              .squaredNorm();
      err_sum[k] += err;
      err_sq[k] += err * err;

      step_idling(s, bp.prob, bp.net, bp.c, alpha, z, p_k);
    }
  }

  long dis_bad = -1, err_bad = -1;
  double dis_margin = 1e300, err_margin = 1e300;
  for (long k = 0; k < horizon; ++k) {
    const MeanSe d = mean_se(dis_sum[k], dis_sq[k], replicas);
    const double d_rhs = bounds.disagreement_sq_bound + 3.0 * d.se + kSlack;
    if (d.mean > d_rhs && dis_bad < 0) dis_bad = k;
    dis_margin = std::min(dis_margin, d_rhs - d.mean);

    const double p_k = probability(sched, k);
    const MeanSe e = mean_se(err_sum[k], err_sq[k], replicas);
    const double e_rhs =
        bounds.grad_error_const * (1.0 - p_k * p_k) + 3.0 * e.se + kSlack;
    if (e.mean > e_rhs && err_bad < 0) err_bad = k;
    err_margin = std::min(err_margin, e_rhs - e.mean);
  }
  const bool ok = dis_bad < 0 && err_bad < 0;
  std::string detail =
      "100-replica second moments over 2000 iterations: disagreement and "
      "gradient error under their bounds at every k (smallest margins " +
      fmt(dis_margin, "%.3g") + ", " + fmt(err_margin, "%.3g") + ")";
  if (!ok)
    detail = "bound violated at k = " +
             std::to_string(dis_bad >= 0 ? dis_bad : err_bad) +
             (dis_bad >= 0 ? " (disagreement)" : " (gradient error)");
  return {ok, detail};
}

// ---------------------------------------------------------------------------
// 5. Fixed-point neighborhood and the synchronous method's pathwise linear
//    rate.

Outcome criterion_neighborhood_and_linear_rate() {
  // Part A on the preset instance.
  const ExperimentConfig cfg = preset_config("fig1");
  const BuiltProblem bp = build_problem(cfg);
  const double alpha = resolve_alpha(cfg, bp.prob);
  const ActivationSchedule sched = resolve_schedule(cfg, bp.prob, alpha);
  const Bounds bounds = compute_bounds(bp.prob, bp.spec, sched, alpha);
  const OracleReport oracle = make_oracle_refs(bp.prob, bp.net, bp.c, alpha);

  const int n = bp.prob.n_nodes;
  const Eigen::MatrixXd consensus =
      Eigen::VectorXd::Ones(n) * oracle.refs.x_star.transpose();
  const double lhs_main = (oracle.refs.x_penalty - consensus).squaredNorm();
  const double rhs_main = alpha * bounds.neighborhood_const;
  bool neighborhood_ok = lhs_main <= rhs_main + kSlack;

  // ... and on 20 random small instances.
  for (std::uint64_t i = 0; i < 20 && neighborhood_ok; ++i) {
    const SmallInstance inst = random_small_instance(50 + i);
    const Bounds b =
        compute_bounds(inst.prob, inst.spec, AlwaysOn{}, inst.alpha);
    const OracleReport rep =
        make_oracle_refs(inst.prob, inst.net, inst.c, inst.alpha);
    const Eigen::MatrixXd cons = Eigen::VectorXd::Ones(inst.prob.n_nodes) *
                                 rep.refs.x_star.transpose();
    const double lhs = (rep.refs.x_penalty - cons).squaredNorm();
    neighborhood_ok = lhs <= inst.alpha * b.neighborhood_const + kSlack;
  }

  // Part B: deterministic synchronous path against 2 sqrt(N) D (1-a mu)^k.
  RunConfig rc;
  rc.algorithm = Algorithm::standard;
  rc.alpha = alpha;
  rc.budget = 2000;
  rc.init = InitKind::per_node_uniform;
  rc.master_seed = cfg.run.seed;
  const RunResult rr = run(bp.prob, bp.net, bp.c, rc, oracle.refs);
  const double scale = 2.0 * std::sqrt(static_cast<double>(n)) * bp.prob.D;
  double rate_margin = 1e300;
  long rate_bad = -1;
  for (size_t k = 0; k < rr.trace.size(); ++k) {
    const double rhs =
        scale * std::pow(1.0 - alpha * bp.prob.mu, static_cast<double>(k));
    const double margin = rhs + kSlack - rr.trace[k].dist_to_penalty_opt;
    if (margin < 0.0 && rate_bad < 0) rate_bad = static_cast<long>(k);
    rate_margin = std::min(rate_margin, margin);
  }
  const bool rate_ok = rate_bad < 0;
  return {neighborhood_ok && rate_ok,
          std::string("fixed-point neighborhood within alpha * constant on "
                      "the preset and 20 random instances (preset: ") +
              fmt(lhs_main, "%.4g") + " <= " + fmt(rhs_main, "%.4g") +
              "); synchronous path under 2 sqrt(N) D (1 - alpha mu)^k at "
              "every k (min margin " +
              fmt(rate_margin, "%.3g") + ")"};
}

// ---------------------------------------------------------------------------
// 6. Monte-Carlo distance to the fixed point under the variable-activity
//    method: rate envelope and convergence to the synchronous limit.

Outcome criterion_distance_rate_envelope() {
  const ExperimentConfig cfg = preset_config("fig1");
  const BuiltProblem bp = build_problem(cfg);
  const double alpha = resolve_alpha(cfg, bp.prob);
  const ActivationSchedule sched = resolve_schedule(cfg, bp.prob, alpha);
  const Bounds bounds = compute_bounds(bp.prob, bp.spec, sched, alpha);
  const OracleReport oracle = make_oracle_refs(bp.prob, bp.net, bp.c, alpha);
  const long budget = 2000;
  const int replicas = 100;

  std::vector<double> sum(budget + 1, 0.0), sum_sq(budget + 1, 0.0);
  for (int r = 0; r < replicas; ++r) {
    RunConfig rc;
    rc.algorithm = Algorithm::idling;
    rc.alpha = alpha;
    rc.budget = budget;
    rc.init = InitKind::per_node_uniform;
    rc.schedule = sched;
    rc.master_seed = cfg.run.seed;
    rc.replica = static_cast<std::uint64_t>(r);
    rc.init_replica = 0;  // expectation conditioned on one starting point
    const RunResult rr = run(bp.prob, bp.net, bp.c, rc, oracle.refs);
    for (size_t k = 0; k < rr.trace.size(); ++k) {
      const double d = rr.trace[k].dist_to_penalty_opt;
      sum[k] += d;
      sum_sq[k] += d * d;
    }
  }

  double margin = 1e300;
  long bad = -1;
  for (long k = 1; k <= budget; ++k) {
    const MeanSe m = mean_se(sum[k], sum_sq[k], replicas);
    const double rhs = bounds.rate_constant * static_cast<double>(k) *
                           std::pow(bounds.eta, static_cast<double>(k)) +
                       3.0 * m.se + kSlack;
    if (m.mean > rhs && bad < 0) bad = k;
    margin = std::min(margin, rhs - m.mean);
  }
  const double initial = sum[0] / replicas;
  const double final_mean = sum[budget] / replicas;
  const bool envelope_ok = bad < 0;
  const bool converged = final_mean < 1e-3 * initial;
  return {envelope_ok && converged,
          "mean distance to the fixed point under constant * k * eta^k at "
          "every k (eta " +
              fmt(bounds.eta, "%.6g") + "); final/initial " +
              fmt(final_mean, "%.3g") + " / " + fmt(initial, "%.4g") + " = " +
              fmt(final_mean / initial, "%.2g") + " (< 1e-3)"};
}

// ---------------------------------------------------------------------------
// 7/8. Preset cost-savings bands.

Outcome savings_band(const std::string& preset, double min_savings) {
  ExperimentConfig cfg = preset_config(preset);
  cfg.out_dir.clear();
  const ExperimentSummary s = run_experiment(cfg);
  const AlgorithmSummary* standard = nullptr;
  const AlgorithmSummary* idling = nullptr;
  for (const AlgorithmSummary& a : s.algorithms) {
    if (a.name == "standard") standard = &a;
    if (a.name == "idling") idling = &a;
  }
  const double overhead =
      idling->mean_iterations / standard->mean_iterations - 1.0;
  const bool ok =
      s.savings_percent >= min_savings && std::abs(overhead) <= 0.10;
  return {ok, preset + ": cost saving " + fmt(s.savings_percent, "%.2f") +
                  "% (>= " + fmt(min_savings, "%.0f") +
                  "%), iteration overhead " + fmt(100.0 * overhead, "%.2f") +
                  "% (within 10%)"};
}

// ---------------------------------------------------------------------------
// 9. Savings-vs-step-size structure on the quadratic grid.

Outcome criterion_grid_structure() {
  ExperimentConfig cfg = preset_config("table1");
  cfg.out_dir.clear();
  const std::vector<ExperimentSummary> grid = run_grid(cfg);
  const double theta = cfg.schedule.theta;

  bool ordered = true, above_floor = true;
  std::vector<double> log_alpha, log_diff;
  for (const ExperimentSummary& s : grid) {
    const double std_cost = s.algorithms[0].mean_total_cost;
    const double idl_cost = s.algorithms[1].mean_total_cost;
    const double diff = std_cost - idl_cost;
    ordered = ordered && idl_cost < std_cost;
    above_floor = above_floor && diff >= 0.5 / (2.0 * s.alpha * theta);
    if (diff > 0.0) {
      log_alpha.push_back(std::log(s.alpha));
      log_diff.push_back(std::log(diff));
    }
  }
  double slope = 0.0;
  if (log_alpha.size() >= 2) {
    const double n = static_cast<double>(log_alpha.size());
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < log_alpha.size(); ++i) {
      mx += log_alpha[i];
      my += log_diff[i];
    }
    mx /= n;
    my /= n;
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < log_alpha.size(); ++i) {
      num += (log_alpha[i] - mx) * (log_diff[i] - my);
      den += (log_alpha[i] - mx) * (log_alpha[i] - mx);
    }
    slope = num / den;
  }
  const bool slope_ok =
      log_alpha.size() == grid.size() && std::abs(slope + 1.0) <= 0.15;
  return {ordered && above_floor && slope_ok,
          "all 6 step sizes keep the variable-activity cost below the "
          "synchronous cost; cost-difference log-log slope " +
              fmt(slope, "%.3f") + " (-1 +/- 0.15); every difference >= half "
              "the predicted saving"};
}

// ---------------------------------------------------------------------------
// 10. Exact mean recursion vs Monte-Carlo on the 4-node quadratic, plus the
//     odd-iteration envelope on the mean path.

Outcome criterion_mean_recursion() {
  ExperimentConfig cfg = preset_config("table1");
  cfg.step.rule = "absolute";
  cfg.step.value = 0.01;
  cfg.step.values.clear();
  const BuiltProblem bp = build_problem(cfg);
  const double alpha = resolve_alpha(cfg, bp.prob);
  const ActivationSchedule sched = resolve_schedule(cfg, bp.prob, alpha);
  const auto& qm = std::get<QuadraticIdentityModel>(bp.prob.model);
  const int n = bp.prob.n_nodes;
  const long horizon = 200;
  const int replicas = 2000;

  const Eigen::MatrixXd x0 = Eigen::MatrixXd::Zero(n, 1);
  const std::vector<Eigen::MatrixXd> exact =
      mean_iterates(qm, bp.c, sched, alpha, x0, horizon);

  std::vector<Eigen::VectorXd> sum(horizon + 1, Eigen::VectorXd::Zero(n));
  std::vector<Eigen::VectorXd> sum_sq(horizon + 1, Eigen::VectorXd::Zero(n));
  for (int r = 0; r < replicas; ++r) {
    Rng act(10, static_cast<std::uint64_t>(r), Stream::activation);
    RunState s;
    s.x = x0;
    s.running_sum = Eigen::MatrixXd::Zero(n, 1);
    sum[0] += s.x.col(0);
    sum_sq[0] += s.x.col(0).cwiseAbs2();
    for (long k = 0; k < horizon; ++k) {
      const double p_k = probability(sched, k);
      const ActivationVector z = draw_activations(p_k, n, act, k);
      step_idling(s, bp.prob, bp.net, bp.c, alpha, z, p_k);
      sum[k + 1] += s.x.col(0);
      sum_sq[k + 1] += s.x.col(0).cwiseAbs2();
    }
  }

  double worst_sigma = 0.0;
  for (long k = 0; k <= horizon; ++k) {
    for (int i = 0; i < n; ++i) {
      const MeanSe m = mean_se(sum[k][i], sum_sq[k][i], replicas);
      const double gap = std::abs(m.mean - exact[k](i, 0));
      if (m.se > 0.0)
        worst_sigma = std::max(worst_sigma, gap / m.se);
      else if (gap > kSlack)
        worst_sigma = std::max(worst_sigma, 1e300);
    }
  }

  // Mean-path envelope at odd iterations.
  const QuadraticMeanSetup setup =
      quadratic_mean_setup(qm, bp.net, cfg.weights.c0, alpha,
                           cfg.schedule.theta, x0);
  const Eigen::VectorXd centers_mean =
      centers_matrix(qm).colwise().mean().transpose();
  const Eigen::MatrixXd consensus =
      Eigen::VectorXd::Ones(n) * centers_mean.transpose();
  bool envelope_ok = true;
  double env_margin = 1e300;
  for (long k = 3; k <= horizon; k += 2) {
    const double chi = (exact[k] - consensus).norm();
    const double ub = mean_dist_bound_idling(setup, k);
    envelope_ok = envelope_ok && chi <= ub + kSlack;
    env_margin = std::min(env_margin, ub - chi);
  }
  return {worst_sigma <= 4.0 && envelope_ok,
          "2000-replica Monte-Carlo mean vs exact mean recursion over 200 "
          "iterations: worst componentwise gap " +
              fmt(worst_sigma, "%.2f") +
              " SE (<= 4); odd-iteration mean-path envelope holds (min "
              "margin " +
              fmt(env_margin, "%.3g") + ")"};
}

// ---------------------------------------------------------------------------
// 11. Unreliable links and gradients: qualitative steady-state ordering.

Outcome criterion_async_ordering() {
  ExperimentConfig cfg = preset_config("fig3c");
  cfg.out_dir.clear();
  const ExperimentSummary s = run_experiment(cfg);
  double none = 0.0, lo = 0.0, hi = 0.0;
  for (const AlgorithmSummary& a : s.algorithms) {
    if (a.name == "idling") none = a.mean_final_metric;
    if (a.name == "async_lo") lo = a.mean_final_metric;
    if (a.name == "async_hi") hi = a.mean_final_metric;
  }
  const bool hi_ok = hi > none;
  const bool lo_ok = lo <= none;
  std::string detail = "failure-free " + fmt(none, "%.4g") +
                       ", low-failure " + fmt(lo, "%.4g") +
                       ", high-failure " + fmt(hi, "%.4g") +
                       ": high-failure above failure-free " +
                       (hi_ok ? "holds" : "VIOLATED");
  detail += "; low-failure at-or-below failure-free ";
  if (lo_ok) {
    detail += "holds";
  } else {
    detail +=
        "does not hold at link success 0.5 — halved link success alone "
        "doubles the stationary spread, which outweighs the smaller "
        "effective gradient step (with reliable links the ordering holds)";
  }
  return {hi_ok && lo_ok, detail};
}

// ---------------------------------------------------------------------------
// 12. Pairwise-gossip baseline has a steady state at least twice as high.

Outcome criterion_gossip_steady_state() {
  ExperimentConfig cfg = preset_config("fig3d");
  cfg.out_dir.clear();
  const ExperimentSummary s = run_experiment(cfg);
  double idling = 0.0, gossip = 0.0;
  for (const AlgorithmSummary& a : s.algorithms) {
    if (a.name == "idling") idling = a.steady_state_metric;
    if (a.name == "gossip") gossip = a.steady_state_metric;
  }
  const double ratio = gossip / idling;
  return {ratio >= 2.0, "steady-state relative error: gossip " +
                            fmt(gossip, "%.4g") + " vs variable-activity " +
                            fmt(idling, "%.4g") + ", ratio " +
                            fmt(ratio, "%.1f") + " (>= 2)"};
}

// ---------------------------------------------------------------------------
// 13. Running-average optimality gap under a slowly saturating schedule.

Outcome criterion_running_average_bound() {
  ExperimentConfig cfg;
  cfg.name = "sublinear";
  cfg.graph = {"geometric", 10, 0.5, ""};
  cfg.schedule.kind = "sublinear";
  cfg.schedule.cu = 0.5;
  cfg.schedule.zeta = 1.5;
  cfg.run.seed = 7;
  const BuiltProblem bp = build_problem(cfg);
  const double alpha = resolve_alpha(cfg, bp.prob);
  const ActivationSchedule sched = resolve_schedule(cfg, bp.prob, alpha);
  const Bounds bounds = compute_bounds(bp.prob, bp.spec, sched, alpha);
  const OracleReport oracle = make_oracle_refs(bp.prob, bp.net, bp.c, alpha);
  const long budget = 1000;
  const int replicas = 100;
  const std::vector<long> ks = {10, 100, 1000};

  std::vector<double> sum(ks.size(), 0.0), sum_sq(ks.size(), 0.0);
  for (int r = 0; r < replicas; ++r) {
    RunConfig rc;
    rc.algorithm = Algorithm::idling;
    rc.alpha = alpha;
    rc.budget = budget;
    rc.init = InitKind::per_node_uniform;
    rc.schedule = sched;
    rc.master_seed = cfg.run.seed;
    rc.replica = static_cast<std::uint64_t>(r);
    rc.init_replica = 0;
    const RunResult rr = run(bp.prob, bp.net, bp.c, rc, oracle.refs);
    for (size_t i = 0; i < ks.size(); ++i) {
      const double gap =
          rr.trace[static_cast<size_t>(ks[i])].running_avg_value -
          oracle.refs.f_star;
      sum[i] += gap;
      sum_sq[i] += gap * gap;
    }
  }
  bool ok = true;
  std::string pairs;
  for (size_t i = 0; i < ks.size(); ++i) {
    const MeanSe m = mean_se(sum[i], sum_sq[i], replicas);
    const double rhs = running_average_bound(bounds, bp.prob, ks[i]);
    ok = ok && m.mean <= rhs + 3.0 * m.se + kSlack;
    if (!pairs.empty()) pairs += ", ";
    pairs += "k=" + std::to_string(ks[i]) + ": " + fmt(m.mean, "%.4g") +
             " <= " + fmt(rhs, "%.4g");
  }
  return {ok, "running-average optimality gap under its bound on a 10-node "
              "instance (" +
                  pairs + ")"};
}

// ---------------------------------------------------------------------------
// 14. Sparse-format round-trip and the equal-shard partition rule.

Outcome criterion_parser_and_partition() {
  std::ifstream in("tests/fixtures/sparse10.libsvm");
  if (!in) return {false, "fixture tests/fixtures/sparse10.libsvm not found"};
  std::stringstream buf;
  buf << in.rdbuf();

  const Dataset first = parse_libsvm(buf.str());
  const std::string text = serialize_libsvm(first);
  const Dataset second = parse_libsvm(text, first.feature_dim());
  const bool round_trip = first.labels == second.labels &&
                          first.features.rows() == second.features.rows() &&
                          first.features.cols() == second.features.cols() &&
                          first.features == second.features &&
                          text == serialize_libsvm(second);

  Dataset wide;
  wide.features = Eigen::MatrixXd::Zero(1605, 3);
  for (int i = 0; i < 1605; ++i) wide.features(i, 0) = i;
  wide.labels.assign(1605, 1);
  const NodeShards shards = partition(wide, 50);
  long kept = 0;
  for (const Dataset& d : shards.shards) kept += d.sample_count();
  const bool partition_ok = shards.per_node == 32 &&
                            static_cast<int>(shards.shards.size()) == 50 &&
                            kept == 1600 &&
                            shards.shards[0].features(0, 0) == 0.0 &&
                            shards.shards[49].features(31, 0) == 1599.0;
  return {round_trip && partition_ok,
          "sparse-format round-trip is exact on the bundled fixture; 1605 "
          "samples partition to 32 per node across 50 nodes (5 dropped, "
          "order preserved)"};
}

using CriterionFn = Outcome (*)();

struct Criterion {
  int number;
  CriterionFn fn;
};

const Criterion kCriteria[] = {
    {1, criterion_penalty_equivalence},
    {2, criterion_exact_contraction},
    {3, criterion_mixing_matrix_suite},
    {4, criterion_disagreement_and_error_bounds},
    {5, criterion_neighborhood_and_linear_rate},
    {6, criterion_distance_rate_envelope},
    {7, [] { return savings_band("fig1", 20.0); }},
    {8, [] { return savings_band("fig2", 30.0); }},
    {9, criterion_grid_structure},
    {10, criterion_mean_recursion},
    {11, criterion_async_ordering},
    {12, criterion_gossip_steady_state},
    {13, criterion_running_average_bound},
    {14, criterion_parser_and_partition},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  if (argc > 1) {
    only = std::atoi(argv[1]);
    if (only < 1 || only > 14) {
      std::fprintf(stderr, "usage: %s [criterion 1..14]\n", argv[0]);
      return 2;
    }
  }

  int failures = 0;
  for (const Criterion& c : kCriteria) {
    if (only != 0 && c.number != only) continue;
    Outcome out;
    try {
      out = c.fn();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] criterion %02d: %s\n", out.pass ? "PASS" : "FAIL",
                c.number, out.detail.c_str());
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  return failures;
}
