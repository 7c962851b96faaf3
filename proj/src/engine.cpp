#include "idlegrad/engine.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <utility>

namespace idlegrad {

namespace {

Eigen::MatrixXd make_init(InitKind kind, const ConstraintSet& set, int n,
                          int d, Rng& rng) {
  switch (kind) {
    case InitKind::zero: {
      const Eigen::VectorXd p = project(set, Eigen::VectorXd::Zero(d));
      return p.transpose().replicate(n, 1);
    }
    case InitKind::constant_one: {
      const Eigen::VectorXd p = project(set, Eigen::VectorXd::Ones(d));
      return p.transpose().replicate(n, 1);
    }
    case InitKind::shared_random: {
      Eigen::VectorXd h(d);
      for (int s = 0; s < d; ++s) h(s) = rng.uniform(-50.0, 50.0);
      const Eigen::VectorXd p = project(set, h);
      return p.transpose().replicate(n, 1);
    }
    case InitKind::per_node_uniform: {
      Eigen::MatrixXd x(n, d);
      Eigen::VectorXd h(d);
      for (int i = 0; i < n; ++i) {
        for (int s = 0; s < d; ++s) h(s) = rng.uniform(-50.0, 50.0);
        x.row(i) = project(set, h).transpose();
      }
      return x;
    }
  }
  throw std::invalid_argument("unknown init kind");
}

void check_activation(const ActivationVector& z, int n, double p_k) {
  if (static_cast<int>(z.z.size()) != n)
    throw std::invalid_argument("activation vector size disagrees with the network");
  if (!(p_k > 0.0) || p_k > 1.0)
    throw std::invalid_argument("activation probability must lie in (0, 1]");
}

}  // namespace

const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::standard: return "standard";
    case Algorithm::idling: return "idling";
    case Algorithm::async: return "async";
    case Algorithm::gossip: return "gossip";
  }
  return "unknown";
}

Eigen::MatrixXd build_weight_realization(const Eigen::MatrixXd& c,
                                         const Network& net,
                                         const ActivationVector& z) {
  const int n = net.n;
  if (static_cast<int>(z.z.size()) != n)
    throw std::invalid_argument("activation vector size disagrees with the network");
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [i, j] : net.edges) {
    const double v = z.z[i] && z.z[j] ? c(i, j) : 0.0;
    w(i, j) = v;
    w(j, i) = v;
  }
  for (int i = 0; i < n; ++i) w(i, i) = 1.0 - w.row(i).sum();
  return w;
}

void step_idling(RunState& s, const ProblemInstance& prob, const Network& net,
                 const Eigen::MatrixXd& c, double alpha,
                 const ActivationVector& z, double p_k) {
  const int n = net.n;
  check_activation(z, n, p_k);
  const double scale = alpha / p_k;
  Eigen::MatrixXd next = s.x;
  for (int i = 0; i < n; ++i) {
    if (!z.z[i]) continue;
    double self = 1.0;
    Eigen::RowVectorXd mix = Eigen::RowVectorXd::Zero(s.x.cols());
    for (const auto& a : net.adj[i]) {
      if (!z.z[a.neighbor]) continue;
      const double w = c(i, a.neighbor);
      self -= w;
      mix += w * s.x.row(a.neighbor);
    }
    const Eigen::VectorXd grad =
        node_gradient(prob.model, i, s.x.row(i).transpose());
    const Eigen::VectorXd y =
        (self * s.x.row(i) + mix).transpose() - scale * grad;
    next.row(i) = project(prob.set, y).transpose();
  }
  s.x = std::move(next);
  const int active = z.active_count();
  s.total_cost += active;
  s.last_active_count = active;
  s.k += 1;
}

void step_standard(RunState& s, const ProblemInstance& prob,
                   const Network& net, const Eigen::MatrixXd& c,
                   double alpha) {
  ActivationVector all;
  all.k = s.k;
  all.z.assign(static_cast<size_t>(net.n), 1);
  step_idling(s, prob, net, c, alpha, all, 1.0);
}

void step_async(RunState& s, const ProblemInstance& prob, const Network& net,
                const Eigen::MatrixXd& c, double alpha,
                const ActivationVector& z, const AsyncBits& bits,
                double p_k) {
  const int n = net.n;
  check_activation(z, n, p_k);
  if (bits.link_up.size() != net.edges.size() ||
      bits.grad_ok.size() != static_cast<size_t>(n))
    throw std::invalid_argument("async bit sizes disagree with the network");
  const double scale = alpha / p_k;
  Eigen::MatrixXd next = s.x;
  for (int i = 0; i < n; ++i) {
    if (!z.z[i]) continue;
    double self = 1.0;
    Eigen::RowVectorXd mix = Eigen::RowVectorXd::Zero(s.x.cols());
    for (const auto& a : net.adj[i]) {
      if (!z.z[a.neighbor] || !bits.link_up[a.edge]) continue;
      const double w = c(i, a.neighbor);
      self -= w;
      mix += w * s.x.row(a.neighbor);
    }
    Eigen::VectorXd y = (self * s.x.row(i) + mix).transpose();
    if (bits.grad_ok[i])
      y -= scale * node_gradient(prob.model, i, s.x.row(i).transpose());
    next.row(i) = project(prob.set, y).transpose();
  }
  s.x = std::move(next);
  const int active = z.active_count();
  s.total_cost += active;
  s.last_active_count = active;
  s.k += 1;
}

void step_gossip(RunState& s, const ProblemInstance& prob, const Network& net,
                 double alpha, Rng& rng) {
  const int e = static_cast<int>(
      rng.uniform_index(static_cast<std::uint64_t>(net.edge_count())));
  const auto [i, j] = net.edges[static_cast<size_t>(e)];
  const Eigen::RowVectorXd avg = 0.5 * (s.x.row(i) + s.x.row(j));
  const Eigen::VectorXd gi =
      node_gradient(prob.model, i, s.x.row(i).transpose());
  const Eigen::VectorXd gj =
      node_gradient(prob.model, j, s.x.row(j).transpose());
  s.x.row(i) = project(prob.set, avg.transpose() - alpha * gi).transpose();
  s.x.row(j) = project(prob.set, avg.transpose() - alpha * gj).transpose();
  s.total_cost += 2;
  s.last_active_count = 2;
  s.k += 1;
}

Eigen::MatrixXd penalty_gradient(const ProblemInstance& prob,
                                 const Eigen::MatrixXd& c,
                                 const Eigen::MatrixXd& x, double alpha) {
  Eigen::MatrixXd g(x.rows(), x.cols());
  for (int i = 0; i < x.rows(); ++i)
    g.row(i) = node_gradient(prob.model, i, x.row(i).transpose()).transpose();
  return g + (x - c * x) / alpha;
}

Eigen::MatrixXd error_vector(const ProblemInstance& prob, const Network& net,
                             const Eigen::MatrixXd& c,
                             const Eigen::MatrixXd& x,
                             const ActivationVector& z, double p_k,
                             double alpha) {
  const int n = net.n;
  check_activation(z, n, p_k);
  Eigen::MatrixXd e(n, x.cols());
  for (int i = 0; i < n; ++i) {
    const double zi = z.z[i] ? 1.0 : 0.0;
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(x.cols());
    for (const auto& a : net.adj[i]) {
      const double zz = zi * (z.z[a.neighbor] ? 1.0 : 0.0);
      acc += c(i, a.neighbor) * (zz - 1.0) * (x.row(i) - x.row(a.neighbor));
    }
    const Eigen::VectorXd grad =
        node_gradient(prob.model, i, x.row(i).transpose());
    e.row(i) = (zi / p_k - 1.0) * grad.transpose() + acc / alpha;
  }
  return e;
}

std::string trace_csv_header() {
  return "k,rel_err,avg_cost,disagreement,dist_to_penalty_opt,"
         "dist_to_consensus_opt,running_avg_value,total_cost,active_count";
}

std::string trace_csv_row(const TraceRow& r) {
  char buf[384];
  std::snprintf(buf, sizeof buf,
                "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%ld,%d", r.k,
                r.rel_err, r.avg_cost, r.disagreement, r.dist_to_penalty_opt,
                r.dist_to_consensus_opt, r.running_avg_value, r.total_cost,
                r.active_count);
  return buf;
}

TraceRow record_metrics(const RunState& s, const GlobalEvaluator& eval,
                        const OracleRefs& refs) {
  if (!s.x.allFinite())
    throw std::runtime_error("non-finite iterate encountered");
  const int n = static_cast<int>(s.x.rows());
  TraceRow row;
  row.k = s.k;
  row.total_cost = s.total_cost;
  row.active_count = s.last_active_count;
  row.avg_cost = static_cast<double>(s.total_cost) / n;
  if (refs.f_star > 0.0) {
    const Eigen::VectorXd fvals = eval.values_at_rows(s.x);
    row.rel_err = ((fvals.array() - refs.f_star) / refs.f_star).mean();
  }
  const Eigen::RowVectorXd mean = s.x.colwise().mean();
  const Eigen::MatrixXd centered = s.x.rowwise() - mean;
  row.disagreement = centered.norm();
  if (refs.x_penalty.size() > 0)
    row.dist_to_penalty_opt = (s.x - refs.x_penalty).norm();
  if (refs.x_star.size() > 0) {
    const Eigen::MatrixXd diff = s.x.rowwise() - refs.x_star.transpose();
    row.dist_to_consensus_opt = diff.norm();
  }
  if (s.k >= 1) {
    const Eigen::VectorXd time_avg =
        s.running_sum.colwise().mean().transpose() /
        static_cast<double>(s.k);
    row.running_avg_value = eval.value(time_avg);
  }
  return row;
}

RunResult run(const ProblemInstance& prob, const Network& net,
              const Eigen::MatrixXd& c, const RunConfig& cfg,
              const OracleRefs& refs) {
  const int n = prob.n_nodes;
  const int d = prob.dim;
  if (net.n != n || c.rows() != n || c.cols() != n)
    throw std::invalid_argument(
        "problem, network, and weight-matrix sizes disagree");
  if (!(cfg.alpha > 0.0) || !std::isfinite(cfg.alpha))
    throw std::invalid_argument("step size must be positive and finite");
  if (cfg.budget < 0)
    throw std::invalid_argument("iteration budget must be nonnegative");
  if (cfg.algorithm == Algorithm::async) {
    if (!cfg.async)
      throw std::invalid_argument("async runs need an async configuration");
    if (cfg.async->link_up_prob.size() != net.edges.size() ||
        cfg.async->grad_success_prob.size() != static_cast<size_t>(n))
      throw std::invalid_argument(
          "async configuration sizes disagree with the network");
  }
  if (cfg.target_eps) {
    if (!(*cfg.target_eps > 0.0))
      throw std::invalid_argument("stopping threshold must be positive");
    if (cfg.stop_metric == StopMetric::rel_err && !(refs.f_star > 0.0))
      throw std::invalid_argument(
          "relative-error stopping needs a positive optimal value");
    if (cfg.stop_metric == StopMetric::dist_to_consensus_opt &&
        refs.x_star.size() == 0)
      throw std::invalid_argument("distance stopping needs the optimizer");
  }

  // The method's contraction analysis needs alpha <= lambda_min(C)/L; larger
  // steps may still work, so flag them once rather than reject.
  if (cfg.replica == 0) {
    const Spectrum spec = spectral_quantities(c, net);
    if (cfg.alpha * prob.L > spec.lambdaN_C + 1e-12)
      std::fprintf(stderr,
                   "warning: step size %.6g exceeds the guaranteed-stable "
                   "range %.6g (smallest weight eigenvalue over L)\n",
                   cfg.alpha, spec.lambdaN_C / prob.L);
  }

  const GlobalEvaluator eval(prob.model);
  const std::uint64_t init_rep =
      cfg.init_replica < 0 ? cfg.replica
                           : static_cast<std::uint64_t>(cfg.init_replica);
  Rng init_rng(cfg.master_seed, init_rep, Stream::init);
  Rng act_rng(cfg.master_seed, cfg.replica, Stream::activation);
  Rng async_rng(cfg.master_seed, cfg.replica, Stream::async_bits);
  Rng gossip_rng(cfg.master_seed, cfg.replica, Stream::gossip);

  RunState state;
  state.x = make_init(cfg.init, prob.set, n, d, init_rng);
  state.running_sum = Eigen::MatrixXd::Zero(n, d);

  const auto hit = [&](const TraceRow& r) {
    if (!cfg.target_eps) return false;
    const double m = cfg.stop_metric == StopMetric::rel_err
                         ? r.rel_err
                         : r.dist_to_consensus_opt;
    return m <= *cfg.target_eps;  // false for NaN
  };

  RunResult result;
  result.trace.push_back(record_metrics(state, eval, refs));
  result.reached_target = hit(result.trace.back());

  while (!result.reached_target && state.k < cfg.budget) {
    state.running_sum += state.x;
    switch (cfg.algorithm) {
      case Algorithm::standard:
        step_standard(state, prob, net, c, cfg.alpha);
        break;
      case Algorithm::idling: {
        const double p = probability(cfg.schedule, state.k);
        const ActivationVector z = draw_activations(p, n, act_rng, state.k);
        step_idling(state, prob, net, c, cfg.alpha, z, p);
        break;
      }
      case Algorithm::async: {
        const double p = probability(cfg.schedule, state.k);
        const ActivationVector z = draw_activations(p, n, act_rng, state.k);
        const AsyncBits bits = draw_async(*cfg.async, async_rng);
        step_async(state, prob, net, c, cfg.alpha, z, bits, p);
        break;
      }
      case Algorithm::gossip:
        step_gossip(state, prob, net, cfg.alpha, gossip_rng);
        break;
    }
    result.trace.push_back(record_metrics(state, eval, refs));
    result.reached_target = hit(result.trace.back());
  }

  result.final_x = state.x;
  result.iterations = state.k;
  result.total_cost = state.total_cost;
  return result;
}

}  // namespace idlegrad
