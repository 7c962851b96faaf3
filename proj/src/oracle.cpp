#include "idlegrad/oracle.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace idlegrad {

namespace {

Eigen::VectorXd aggregate_gradient(const CostModel& model,
                                   const Eigen::VectorXd& x) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
  const int n = node_count(model);
  for (int i = 0; i < n; ++i) g += node_gradient(model, i, x);
  return g;
}

}  // namespace

CentralizedSolution solve_centralized(const ProblemInstance& prob,
                                      double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  const double step = 1.0 / (prob.n_nodes * prob.L);
  const double ratio = prob.mu / prob.L;  // per-step contraction is 1 - ratio
  // ||x_t - minimizer|| <= displacement / ratio, so this displacement level
  // certifies distance tol.
  const double disp_tol = tol * ratio;

  CentralizedSolution out;
  Eigen::VectorXd x = project(prob.set, Eigen::VectorXd::Zero(prob.dim));
  double prev_disp = std::numeric_limits<double>::infinity();
  int stalled = 0;
  for (long it = 0; it < 10'000'000; ++it) {
    const Eigen::VectorXd next =
        project(prob.set, x - step * aggregate_gradient(prob.model, x));
    const double disp = (next - x).norm();
    x = next;
    out.iterations = it + 1;
    out.residual = disp;
    if (disp <= disp_tol) break;
    // Progress can stall at the floating-point floor before the analytic
    // tolerance is met; accept the best achievable point in that case.
    stalled = disp >= prev_disp ? stalled + 1 : 0;
    if (stalled > 32) break;
    prev_disp = disp;
  }
  out.x_star = x;
  out.f_star = GlobalEvaluator(prob.model).value(x);
  return out;
}

Eigen::MatrixXd centers_matrix(const QuadraticIdentityModel& m) {
  const int n = static_cast<int>(m.centers.size());
  if (n == 0) throw std::invalid_argument("model has no centers");
  Eigen::MatrixXd b(n, m.centers[0].size());
  for (int i = 0; i < n; ++i) b.row(i) = m.centers[i].transpose();
  return b;
}

Eigen::MatrixXd penalty_fixed_point_quadratic(const QuadraticIdentityModel& m,
                                              const Eigen::MatrixXd& c,
                                              double alpha) {
  const Eigen::MatrixXd b = centers_matrix(m);
  const Eigen::MatrixXd a =
      (1.0 + alpha) * Eigen::MatrixXd::Identity(c.rows(), c.cols()) - c;
  return a.ldlt().solve(alpha * b);
}

PenaltySolution solve_penalty(const ProblemInstance& prob, const Network& net,
                              const Eigen::MatrixXd& c, double alpha,
                              const Eigen::VectorXd& warm_start, double tol) {
  if (!(alpha > 0.0)) throw std::invalid_argument("step size must be positive");
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");

  PenaltySolution out;

  // Quadratic costs admit a direct linear solve; use it whenever the
  // unconstrained fixed point is feasible (projection leaves it unchanged).
  if (const auto* qm = std::get_if<QuadraticIdentityModel>(&prob.model)) {
    Eigen::MatrixXd x = penalty_fixed_point_quadratic(*qm, c, alpha);
    bool feasible = true;
    for (int i = 0; i < x.rows() && feasible; ++i) {
      const Eigen::VectorXd row = x.row(i).transpose();
      feasible = (project(prob.set, row) - row).norm() <=
                 1e-12 * (1.0 + row.norm());
    }
    if (feasible) {
      RunState s;
      s.x = x;
      step_standard(s, prob, net, c, alpha);
      out.residual = (s.x - x).norm();
      if (out.residual <= 1e-9 * (1.0 + x.norm())) {
        out.x = std::move(x);
        out.iterations = 0;
        return out;
      }
    }
  }

  // Otherwise iterate the synchronous map itself: it contracts with factor
  // 1 - alpha mu toward its fixed point, so a displacement below
  // tol * alpha * mu certifies distance tol.
  const double disp_tol = tol * alpha * prob.mu;
  RunState s;
  s.x = warm_start.transpose().replicate(prob.n_nodes, 1);
  for (int i = 0; i < s.x.rows(); ++i) {
    const Eigen::VectorXd row = s.x.row(i).transpose();
    s.x.row(i) = project(prob.set, row).transpose();
  }
  double prev_disp = std::numeric_limits<double>::infinity();
  int stalled = 0;
  for (long it = 0; it < 20'000'000; ++it) {
    const Eigen::MatrixXd before = s.x;
    step_standard(s, prob, net, c, alpha);
    const double disp = (s.x - before).norm();
    out.iterations = it + 1;
    out.residual = disp;
    if (disp <= disp_tol) break;
    stalled = disp >= prev_disp ? stalled + 1 : 0;
    if (stalled > 32) break;
    prev_disp = disp;
  }
  out.x = s.x;
  return out;
}

OracleReport make_oracle_refs(const ProblemInstance& prob, const Network& net,
                              const Eigen::MatrixXd& c, double alpha,
                              double tol) {
  OracleReport rep;
  const CentralizedSolution cen = solve_centralized(prob, tol);
  rep.refs.x_star = cen.x_star;
  rep.refs.f_star = cen.f_star;
  rep.centralized_residual = cen.residual;
  rep.centralized_iterations = cen.iterations;
  const PenaltySolution pen =
      solve_penalty(prob, net, c, alpha, cen.x_star, tol);
  rep.refs.x_penalty = pen.x;
  rep.penalty_residual = pen.residual;
  rep.penalty_iterations = pen.iterations;
  return rep;
}

Bounds compute_bounds(const ProblemInstance& prob, const Spectrum& spec,
                      const ActivationSchedule& sched, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("step size must be positive");
  if (!(spec.lambda2_C < 1.0))
    throw std::invalid_argument("second-largest weight eigenvalue must be < 1");

  Bounds b;
  b.alpha = alpha;
  b.p_min = p_min(sched);
  if (const auto delta = schedule_delta(sched)) {
    b.delta = *delta;
    b.eta = std::max(1.0 - alpha * prob.mu, std::sqrt(*delta));
  } else {
    b.eta = 1.0 - alpha * prob.mu;
  }
  b.lambda2 = spec.lambda2_C;
  b.lambda_min = spec.lambdaN_C;

  const double n = prob.n_nodes;
  const double g = prob.G;
  // 1 - beta = q / (1 + sqrt(1 - q)) avoids the cancellation in
  // 1 - sqrt(1 - q) when q is tiny (large networks, small p_min).
  const double q =
      std::pow(b.p_min, n) * (1.0 - b.lambda2 * b.lambda2);
  b.beta_sq = 1.0 - q;
  b.one_minus_beta = q / (1.0 + std::sqrt(b.beta_sq));

  b.neighborhood_const = 4.0 * n * (prob.M_f - prob.m_f) / (1.0 - b.lambda2) +
                         2.0 * n * g * g / (prob.mu * (1.0 - b.lambda2));
  const double pb = b.p_min * b.one_minus_beta;
  b.grad_error_const =
      4.0 * n * g * g / b.p_min + 72.0 * n * g * g / (pb * pb);
  b.disagreement_sq_bound = std::pow(3.0 * alpha * std::sqrt(n) * g / pb, 2);
  b.rate_constant =
      12.0 * std::max(std::sqrt(n) * prob.D,
                      alpha * std::sqrt(n) * g / pb);
  b.penalty_grad_sq =
      2.0 * n * g * g +
      18.0 * n * g * g / (b.p_min * b.one_minus_beta * b.one_minus_beta);
  b.sum_sqrt_idle = sum_sqrt_u(sched);
  return b;
}

double running_average_bound(const Bounds& b, const ProblemInstance& prob,
                             long k) {
  if (k < 1)
    throw std::invalid_argument("the running-average bound needs k >= 1");
  const double n = prob.n_nodes;
  const double kk = static_cast<double>(k);
  return 2.0 * n * prob.D * prob.D / (b.alpha * kk) +
         2.0 * std::sqrt(2.0) * std::sqrt(n) * prob.D *
             std::sqrt(b.grad_error_const) * b.sum_sqrt_idle / kk +
         b.alpha * b.penalty_grad_sq + 2.0 * b.alpha * b.grad_error_const +
         b.alpha * n * prob.G * prob.G / (2.0 * (1.0 - b.lambda2)) +
         3.0 * b.alpha * n * prob.G * prob.G / (b.p_min * b.one_minus_beta);
}

std::vector<Eigen::MatrixXd> mean_iterates(const QuadraticIdentityModel& m,
                                           const Eigen::MatrixXd& c,
                                           const ActivationSchedule& sched,
                                           double alpha,
                                           const Eigen::MatrixXd& x0,
                                           long horizon) {
  if (horizon < 0) throw std::invalid_argument("horizon must be nonnegative");
  const Eigen::MatrixXd b = centers_matrix(m);
  if (x0.rows() != b.rows() || x0.cols() != b.cols())
    throw std::invalid_argument("initial point shape disagrees with the model");
  std::vector<Eigen::MatrixXd> out;
  out.reserve(static_cast<size_t>(horizon) + 1);
  Eigen::MatrixXd x = x0;
  out.push_back(x);
  for (long k = 0; k < horizon; ++k) {
    const double p = probability(sched, k);
    const double p2 = p * p;
    // E[mixing] = p^2 C + (1 - p^2) I, and the expected gradient correction
    // is the full -alpha (x - b) since each activation is compensated by
    // the 1/p_k gradient scaling.
    x = (p2 * (c * x) + (1.0 - p2) * x - alpha * (x - b)).eval();
    out.push_back(x);
  }
  return out;
}

QuadraticMeanSetup quadratic_mean_setup(const QuadraticIdentityModel& m,
                                        const Network& net, double c0,
                                        double alpha, double theta,
                                        const Eigen::MatrixXd& x0) {
  if (!(alpha > 0.0)) throw std::invalid_argument("step size must be positive");
  if (!(theta > 0.0) || alpha * theta >= 1.0)
    throw std::invalid_argument("need 0 < alpha*theta < 1");
  QuadraticMeanSetup q;
  q.n = net.n;
  q.c0 = c0;
  q.alpha = alpha;
  q.theta = theta;
  q.delta = 1.0 - alpha * theta;
  const Spectrum spec = spectral_quantities(laplacian_weights(net, c0), net);
  q.lambda2_l = spec.laplacian_eigs(1);
  const Eigen::MatrixXd b = centers_matrix(m);
  const Eigen::RowVectorXd mean = b.colwise().mean();
  q.r_spread = (b.rowwise() - mean).norm();
  q.r0 = (x0.rowwise() - mean).norm();
  return q;
}

double mean_dist_bound_standard(const QuadraticMeanSetup& q, long k) {
  if (k < 1) throw std::invalid_argument("bound needs k >= 1");
  const double a = q.alpha;
  const double l2 = q.c0 * q.lambda2_l;
  return std::pow(1.0 - a, static_cast<double>(k)) * q.r0 +
         a * q.r_spread * (q.n - 1) *
             (1.0 - std::pow(1.0 - a - l2, static_cast<double>(k))) /
             (l2 + a);
}

double mean_dist_bound_idling(const QuadraticMeanSetup& q, long k) {
  if (k < 3 || k % 2 == 0)
    throw std::invalid_argument("bound is stated for odd k >= 3");
  const double a = q.alpha;
  const double l2 = q.c0 * q.lambda2_l;
  const double first =
      1.0 / (l2 * (1.0 - std::pow(q.delta, 0.5 * static_cast<double>(k))) + a);
  const double second =
      std::pow(1.0 - a - l2 * (1.0 - q.delta),
               static_cast<double>((k - 1) / 2)) /
      (l2 * (1.0 - q.delta) + a);
  return std::pow(1.0 - a, static_cast<double>(k)) * q.r0 +
         a * q.r_spread * (q.n - 1) * (first + second);
}

double alpha_for_accuracy(const QuadraticMeanSetup& q, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("accuracy must be positive");
  if (!(q.r_spread > 0.0))
    throw std::invalid_argument("centers are already in consensus");
  return q.c0 * q.lambda2_l * eps / (2.0 * (q.n - 1) * q.r_spread);
}

double accuracy_for_alpha(const QuadraticMeanSetup& q) {
  return 2.0 * q.alpha * (q.n - 1) * q.r_spread / (q.c0 * q.lambda2_l);
}

double iterations_for_accuracy(const QuadraticMeanSetup& q, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("accuracy must be positive");
  if (!(q.r_spread > 0.0))
    throw std::invalid_argument("centers are already in consensus");
  return q.r_spread * (q.n - 1) / (q.c0 * q.lambda2_l * eps) * 2.0 *
         std::log(2.0 * q.r0 / eps);
}

double exact_cost_saving(const QuadraticMeanSetup& q, long horizon) {
  const ActivationSchedule sched = HalfGeometric{q.delta};
  double total = 0.0;
  for (long k = 0; k <= horizon; ++k) total += 1.0 - probability(sched, k);
  return total;
}

double approx_cost_saving(const QuadraticMeanSetup& q) {
  return 1.0 / (2.0 * q.alpha * q.theta);
}

}  // namespace idlegrad
