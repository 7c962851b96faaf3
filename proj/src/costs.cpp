#include "idlegrad/costs.hpp"

#include <algorithm>
#include <stdexcept>

namespace idlegrad {

Eigen::VectorXd project(const ConstraintSet& set, const Eigen::VectorXd& y) {
  if (const auto* ball = std::get_if<BallSet>(&set)) {
    const double norm = y.norm();
    if (norm <= ball->radius) return y;
    return (ball->radius / norm) * y;
  }
  const auto& box = std::get<BoxSet>(set);
  return y.cwiseMax(box.lo).cwiseMin(box.hi);
}

double max_norm_D(const ConstraintSet& set) {
  if (const auto* ball = std::get_if<BallSet>(&set)) return ball->radius;
  const auto& box = std::get<BoxSet>(set);
  return box.lo.cwiseAbs().cwiseMax(box.hi.cwiseAbs()).norm();
}

int node_count(const CostModel& model) {
  if (const auto* lg = std::get_if<LogisticModel>(&model))
    return static_cast<int>(lg->samples.size());
  return static_cast<int>(std::get<QuadraticIdentityModel>(model)
                              .centers.size());
}

int dimension(const CostModel& model) {
  if (const auto* lg = std::get_if<LogisticModel>(&model))
    return lg->samples.empty() ? 0
                               : static_cast<int>(lg->samples[0].cols());
  const auto& qd = std::get<QuadraticIdentityModel>(model);
  return qd.centers.empty() ? 0 : static_cast<int>(qd.centers[0].size());
}

double node_value(const CostModel& model, int node,
                  const Eigen::VectorXd& x) {
  if (const auto* lg = std::get_if<LogisticModel>(&model)) {
    const Eigen::VectorXd t = lg->samples[node] * x;
    double v = 0.0;
    for (Eigen::Index j = 0; j < t.size(); ++j) v += softplus(-t(j));
    return v + 0.5 * lg->regularizer * x.squaredNorm();
  }
  const auto& qd = std::get<QuadraticIdentityModel>(model);
  return 0.5 * (x - qd.centers[node]).squaredNorm();
}

Eigen::VectorXd node_gradient(const CostModel& model, int node,
                              const Eigen::VectorXd& x) {
  if (const auto* lg = std::get_if<LogisticModel>(&model)) {
    const Eigen::MatrixXd& s = lg->samples[node];
    Eigen::VectorXd t = s * x;
    for (Eigen::Index j = 0; j < t.size(); ++j) t(j) = sigmoid(-t(j));
    return -s.transpose() * t + lg->regularizer * x;
  }
  const auto& qd = std::get<QuadraticIdentityModel>(model);
  return x - qd.centers[node];
}

Evaluation evaluate(const CostModel& model, int node,
                    const Eigen::VectorXd& x) {
  return {node_value(model, node, x), node_gradient(model, node, x)};
}

GlobalEvaluator::GlobalEvaluator(const CostModel& model) {
  n_nodes_ = node_count(model);
  if (const auto* lg = std::get_if<LogisticModel>(&model)) {
    logistic_ = true;
    reg_ = lg->regularizer;
    Eigen::Index total = 0;
    for (const auto& s : lg->samples) total += s.rows();
    stacked_.resize(total, dimension(model));
    Eigen::Index at = 0;
    for (const auto& s : lg->samples) {
      stacked_.middleRows(at, s.rows()) = s;
      at += s.rows();
    }
    return;
  }
  const auto& qd = std::get<QuadraticIdentityModel>(model);
  center_sum_ = Eigen::VectorXd::Zero(dimension(model));
  for (const auto& b : qd.centers) {
    center_sum_ += b;
    center_sq_sum_ += b.squaredNorm();
  }
}

double GlobalEvaluator::value(const Eigen::VectorXd& x) const {
  if (logistic_) {
    const Eigen::VectorXd t = stacked_ * x;
    double v = 0.0;
    for (Eigen::Index j = 0; j < t.size(); ++j) v += softplus(-t(j));
    return v + 0.5 * n_nodes_ * reg_ * x.squaredNorm();
  }
  return 0.5 * (n_nodes_ * x.squaredNorm() - 2.0 * x.dot(center_sum_) +
                center_sq_sum_);
}

Eigen::VectorXd GlobalEvaluator::values_at_rows(
    const Eigen::MatrixXd& x_rows) const {
  const Eigen::Index n = x_rows.rows();
  Eigen::VectorXd out(n);
  if (logistic_) {
    const Eigen::MatrixXd t = stacked_ * x_rows.transpose();  // S x n
    for (Eigen::Index c = 0; c < n; ++c) {
      double v = 0.0;
      for (Eigen::Index j = 0; j < t.rows(); ++j) v += softplus(-t(j, c));
      out(c) = v + 0.5 * n_nodes_ * reg_ * x_rows.row(c).squaredNorm();
    }
    return out;
  }
  for (Eigen::Index c = 0; c < n; ++c) {
    out(c) = 0.5 * (n_nodes_ * x_rows.row(c).squaredNorm() -
                    2.0 * x_rows.row(c).dot(center_sum_) + center_sq_sum_);
  }
  return out;
}

namespace {

double spectral_norm_psd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m,
                                                    Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("eigensolver failed on a sample Gram matrix");
  return es.eigenvalues()(m.rows() - 1);
}

void check_model(const CostModel& model) {
  const int n = node_count(model);
  if (n < 1) throw std::invalid_argument("cost model needs at least 1 node");
  const int d = dimension(model);
  if (d < 1) throw std::invalid_argument("cost dimension must be positive");
  if (const auto* lg = std::get_if<LogisticModel>(&model)) {
    if (!(lg->regularizer > 0.0))
      throw std::invalid_argument("logistic regularizer must be positive");
    for (const auto& s : lg->samples)
      if (s.cols() != d)
        throw std::invalid_argument("inconsistent sample dimensions");
  } else {
    for (const auto& b : std::get<QuadraticIdentityModel>(model).centers)
      if (b.size() != d)
        throw std::invalid_argument("inconsistent center dimensions");
  }
}

void check_set(const ConstraintSet& set, int d) {
  if (const auto* ball = std::get_if<BallSet>(&set)) {
    if (!(ball->radius > 0.0))
      throw std::invalid_argument("ball radius must be positive");
    return;
  }
  const auto& box = std::get<BoxSet>(set);
  if (box.lo.size() != d || box.hi.size() != d)
    throw std::invalid_argument("box bounds must match the cost dimension");
  if (((box.hi - box.lo).array() < 0.0).any())
    throw std::invalid_argument("box bounds must satisfy lo <= hi");
}

}  // namespace

ProblemInstance derive_constants(CostModel model, ConstraintSet set,
                                 LipschitzRule rule) {
  check_model(model);
  const int n = node_count(model);
  const int d = dimension(model);
  check_set(set, d);

  ProblemInstance inst;
  inst.n_nodes = n;
  inst.dim = d;
  inst.D = max_norm_D(set);

  double max_grad0 = 0.0;
  double max_f0 = 0.0;
  if (const auto* lg = std::get_if<LogisticModel>(&model)) {
    inst.mu = lg->regularizer;
    if (rule == LipschitzRule::per_node_max) {
      double worst = 0.0;
      for (const auto& s : lg->samples)
        worst = std::max(worst, spectral_norm_psd(s.transpose() * s));
      inst.L = 0.25 * worst + lg->regularizer;
    } else {
      Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
      for (const auto& s : lg->samples) gram += s.transpose() * s;
      inst.L = 0.25 / n * spectral_norm_psd(gram) + lg->regularizer;
    }
    for (const auto& s : lg->samples) {
      // grad f_i(0) = -(1/2) sum_j c_ij; f_i(0) = J * log 2
      max_grad0 = std::max(max_grad0, 0.5 * s.colwise().sum().norm());
      max_f0 =
          std::max(max_f0, static_cast<double>(s.rows()) * std::log(2.0));
    }
  } else {
    inst.mu = 1.0;
    inst.L = 1.0;
    for (const auto& b : std::get<QuadraticIdentityModel>(model).centers) {
      max_grad0 = std::max(max_grad0, b.norm());   // grad f_i(0) = -b_i
      max_f0 = std::max(max_f0, 0.5 * b.squaredNorm());
    }
  }

  if (inst.L < inst.mu)
    throw std::invalid_argument(
        "derived Lipschitz constant is below the strong-convexity modulus");

  inst.G = inst.L * inst.D + max_grad0;
  inst.M_f = inst.G * inst.D + max_f0;
  inst.m_f = -inst.M_f;
  inst.model = std::move(model);
  inst.set = std::move(set);
  return inst;
}

}  // namespace idlegrad
