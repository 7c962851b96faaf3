#include "idlegrad/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace idlegrad {

namespace {

void check_unit_interval(double v, const char* name) {
  if (!(v > 0.0) || !(v < 1.0))
    throw std::invalid_argument(std::string(name) + " must lie in (0, 1)");
}

struct PMinVisitor {
  double operator()(const AlwaysOn&) const { return 1.0; }
  double operator()(const Geometric& g) const {
    check_unit_interval(g.delta, "delta");
    return 1.0 - g.delta;
  }
  double operator()(const HalfGeometric& g) const {
    check_unit_interval(g.delta, "delta");
    return 1.0 - 0.5 * g.delta;
  }
  double operator()(const CappedGeometric& g) const {
    check_unit_interval(g.delta, "delta");
    check_unit_interval(g.cap, "cap");
    check_unit_interval(g.floor, "floor");
    return g.floor;
  }
  double operator()(const Sublinear& s) const {
    if (!(s.cu > 0.0)) throw std::invalid_argument("cu must be positive");
    if (!(s.zeta > 0.0)) throw std::invalid_argument("zeta must be positive");
    return std::max(1.0 - s.cu, 0.01);
  }
};

struct RawProbability {
  long k;
  double operator()(const AlwaysOn&) const { return 1.0; }
  double operator()(const Geometric& g) const {
    return 1.0 - std::pow(g.delta, static_cast<double>(k + 1));
  }
  double operator()(const HalfGeometric& g) const {
    return 1.0 - 0.5 * std::pow(g.delta, static_cast<double>(k + 1));
  }
  double operator()(const CappedGeometric& g) const {
    const double delta = std::min(g.delta, g.cap);
    return std::max(1.0 - std::pow(delta, static_cast<double>(k + 1)),
                    g.floor);
  }
  double operator()(const Sublinear& s) const {
    return 1.0 - s.cu / std::pow(static_cast<double>(k + 1), 1.0 + s.zeta);
  }
};

}  // namespace

double p_min(const ActivationSchedule& s) {
  return std::visit(PMinVisitor{}, s);
}

double probability(const ActivationSchedule& s, long k) {
  if (k < 0) throw std::invalid_argument("iteration index must be >= 0");
  const double floor = p_min(s);  // also validates the parameters
  const double raw = std::visit(RawProbability{k}, s);
  return std::clamp(raw, floor, 1.0);
}

double delta_from_alpha(double alpha, double mu, double cap) {
  const double am = alpha * mu;
  if (!(am > 0.0) || am > 1.0)
    throw std::invalid_argument("alpha*mu must lie in (0, 1]");
  return std::min((1.0 - am) * (1.0 - am), cap);
}

std::optional<double> schedule_delta(const ActivationSchedule& s) {
  if (const auto* g = std::get_if<Geometric>(&s)) return g->delta;
  if (const auto* g = std::get_if<HalfGeometric>(&s)) return g->delta;
  if (const auto* g = std::get_if<CappedGeometric>(&s))
    return std::min(g->delta, g->cap);
  return std::nullopt;
}

double sum_sqrt_u(const ActivationSchedule& s) {
  p_min(s);  // validate parameters
  if (std::holds_alternative<AlwaysOn>(s)) return 0.0;
  if (const auto* g = std::get_if<Geometric>(&s)) {
    // sum_k delta^((k+1)/2) = sqrt(delta) / (1 - sqrt(delta))
    const double r = std::sqrt(g->delta);
    return r / (1.0 - r);
  }
  if (const auto* g = std::get_if<HalfGeometric>(&s)) {
    const double r = std::sqrt(g->delta);
    return r / (std::sqrt(2.0) * (1.0 - r));
  }
  if (const auto* g = std::get_if<CappedGeometric>(&s)) {
    // u_k = min(delta^(k+1), 1 - floor): flat until the geometric part
    // crosses the floor, geometric afterwards. Summed multiplicatively.
    const double delta = std::min(g->delta, g->cap);
    double term = delta;  // delta^(k+1)
    double total = 0.0;
    for (long k = 0; k < 100'000'000; ++k) {
      const double contribution = std::sqrt(std::min(term, 1.0 - g->floor));
      total += contribution;
      if (contribution < 1e-17 * total) break;
      term *= delta;
    }
    return total;
  }
  const auto& su = std::get<Sublinear>(s);
  if (su.zeta <= 1.0) return std::numeric_limits<double>::infinity();
  // Partial sum of sqrt(u_k) with the clamped u_k, then an integral tail
  // bound on the unclamped series (an upper bound on the remainder).
  const double s_exp = 0.5 * (1.0 + su.zeta);
  const long cutoff = 1'000'000;
  const double floor = p_min(s);
  double total = 0.0;
  for (long k = 0; k < cutoff; ++k) {
    const double u =
        std::min(su.cu / std::pow(static_cast<double>(k + 1), 1.0 + su.zeta),
                 1.0 - floor);
    total += std::sqrt(u);
  }
  total += std::sqrt(su.cu) * std::pow(static_cast<double>(cutoff),
                                       1.0 - s_exp) / (s_exp - 1.0);
  return total;
}

std::string schedule_formula(const ActivationSchedule& s) {
  std::ostringstream out;
  out.precision(12);
  if (std::holds_alternative<AlwaysOn>(s)) {
    out << "p_k = 1";
  } else if (const auto* g = std::get_if<Geometric>(&s)) {
    out << "p_k = 1 - " << g->delta << "^(k+1)";
  } else if (const auto* h = std::get_if<HalfGeometric>(&s)) {
    out << "p_k = 1 - 0.5*" << h->delta << "^(k+1)";
  } else if (const auto* c = std::get_if<CappedGeometric>(&s)) {
    out << "p_k = max(1 - " << std::min(c->delta, c->cap) << "^(k+1), "
        << c->floor << ")";
  } else {
    const auto& su = std::get<Sublinear>(s);
    out << "p_k = max(1 - " << su.cu << "/(k+1)^" << (1.0 + su.zeta) << ", "
        << p_min(s) << ")";
  }
  return out.str();
}

ActivationVector draw_activations(double p, int n, Rng& rng, long k) {
  if (!(p >= 0.0) || !(p <= 1.0))
    throw std::invalid_argument("activation probability must lie in [0, 1]");
  ActivationVector v;
  v.k = k;
  v.z.resize(n);
  for (int i = 0; i < n; ++i) v.z[i] = rng.bernoulli(p) ? 1 : 0;
  return v;
}

AsyncBits draw_async(const AsyncConfig& cfg, Rng& rng) {
  AsyncBits bits;
  bits.link_up.resize(cfg.link_up_prob.size());
  bits.grad_ok.resize(cfg.grad_success_prob.size());
  for (size_t e = 0; e < cfg.link_up_prob.size(); ++e)
    bits.link_up[e] = rng.bernoulli(cfg.link_up_prob[e]) ? 1 : 0;
  for (size_t i = 0; i < cfg.grad_success_prob.size(); ++i)
    bits.grad_ok[i] = rng.bernoulli(cfg.grad_success_prob[i]) ? 1 : 0;
  return bits;
}

}  // namespace idlegrad
