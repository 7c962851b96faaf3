#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "idlegrad/rng.hpp"

namespace idlegrad {

// Activation-probability rules p_k. Every variant is nondecreasing in k,
// bounded below by its own p_min > 0, and tends to 1 (AlwaysOn already is 1).
struct AlwaysOn {};
struct Geometric {
  double delta;  // p_k = 1 - delta^(k+1); p_min = 1 - delta
};
struct HalfGeometric {
  double delta;  // p_k = 1 - (1/2) delta^(k+1); p_min = 1 - delta/2
};
struct CappedGeometric {
  double delta;
  double floor;  // p_k = max{1 - min(delta, cap)^(k+1), floor}; p_min = floor
  double cap;
};
struct Sublinear {
  double cu;
  double zeta;  // p_k = 1 - cu/(k+1)^(1+zeta); p_min = max(1 - cu, 0.01)
};

using ActivationSchedule =
    std::variant<AlwaysOn, Geometric, HalfGeometric, CappedGeometric,
                 Sublinear>;

// Schedule floor p_min (the lower bound the theory constants use).
double p_min(const ActivationSchedule& s);

// p_k, clamped to [p_min, 1]. Throws std::invalid_argument on out-of-range
// schedule parameters or k < 0.
double probability(const ActivationSchedule& s, long k);

// The largest geometric decay rate compatible with the method's contraction:
// min{(1 - alpha*mu)^2, cap}. Requires 0 < alpha*mu <= 1.
double delta_from_alpha(double alpha, double mu, double cap = 0.99999);

// The geometric-family decay parameter, when the variant has one.
std::optional<double> schedule_delta(const ActivationSchedule& s);

// S_u = sum_k sqrt(1 - p_k). Closed form for the geometric family, numeric
// partial sum plus an integral tail bound for Sublinear (infinite for
// zeta <= 1), zero for AlwaysOn. The returned value is an upper bound on the
// true series wherever truncation is involved.
double sum_sqrt_u(const ActivationSchedule& s);

// Human-readable p_k formula, embedded in experiment reports.
std::string schedule_formula(const ActivationSchedule& s);

struct ActivationVector {
  std::vector<std::uint8_t> z;
  long k = 0;

  int active_count() const {
    int c = 0;
    for (auto b : z) c += b;
    return c;
  }
};

// n independent Bernoulli(p) node-activation bits.
ActivationVector draw_activations(double p, int n, Rng& rng, long k = 0);

// Per-link and per-node failure probabilities for asynchronous operation.
struct AsyncConfig {
  std::vector<double> link_up_prob;       // aligned with Network::edges
  std::vector<double> grad_success_prob;  // per node
};

struct AsyncBits {
  std::vector<std::uint8_t> link_up;
  std::vector<std::uint8_t> grad_ok;
};

// Mutually independent link and gradient-success bits (links first, then
// nodes, each in index order — the draw order is part of the contract so
// seeded runs are reproducible).
AsyncBits draw_async(const AsyncConfig& cfg, Rng& rng);

}  // namespace idlegrad
