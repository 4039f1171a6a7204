#include "pofel/incentive.hpp"

#include <algorithm>
#include <cmath>

namespace pofel {

IncentiveParams IncentiveParams::uniform(int n, double gamma, double mu, double B, double lambda,
                                         double phi) {
  IncentiveParams p;
  p.B = B;
  p.lambda = lambda;
  p.phi = phi;
  p.gamma.assign(static_cast<std::size_t>(n), gamma);
  p.mu.assign(static_cast<std::size_t>(n), mu);
  return p;
}

void IncentiveParams::validate() const {
  if (!(B > 0.0)) throw Error(ErrorCode::kConfig, "incentive.B: must be positive");
  if (!(lambda > 0.0)) throw Error(ErrorCode::kConfig, "incentive.lambda: must be positive");
  if (!(phi > 0.0)) throw Error(ErrorCode::kConfig, "incentive.phi: must be positive");
  if (gamma.empty()) throw Error(ErrorCode::kConfig, "incentive: need at least one node");
  if (gamma.size() != mu.size()) throw Error(ErrorCode::kConfig, "incentive: gamma and mu lengths differ");
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    if (!(gamma[i] > 0.0)) throw Error(ErrorCode::kConfig, "incentive.gamma: must be positive");
    if (!(mu[i] > 0.0)) throw Error(ErrorCode::kConfig, "incentive.mu: must be positive");
  }
}

double utility_publisher(double delta, double F, const IncentiveParams& params) {
  if (!(F > 0.0)) throw Error(ErrorCode::kInvalidArgument, "utility_publisher: F must be positive");
  const double gap = params.lambda * delta / F - params.phi;
  return params.B - gap * gap;
}

bool publisher_utility_positive(double delta, double F, const IncentiveParams& params) {
  const double gap = params.lambda * delta / F - params.phi;
  const double root_b = std::sqrt(params.B);
  return -root_b < gap && gap < root_b;
}

double utility_node(double f_i, double sum_f_others, double delta, double gamma_i, double mu_i) {
  if (f_i < 0.0 || sum_f_others < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "utility_node: frequencies must be non-negative");
  }
  const double total = f_i + sum_f_others;
  if (!(total > 0.0)) throw Error(ErrorCode::kInvalidArgument, "utility_node: zero total frequency");
  return delta * f_i / total - gamma_i * mu_i * f_i * f_i;
}

double best_response(double sum_f_others, double delta, double gamma_i, double mu_i, double tol,
                     int max_iter) {
  if (!(delta > 0.0)) throw Error(ErrorCode::kInvalidArgument, "best_response: delta must be positive");
  if (!(sum_f_others > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "best_response: others' total frequency must be positive");
  }
  const double c = gamma_i * mu_i;
  // Marginal utility; strictly decreasing in f.
  auto marginal = [&](double f) {
    const double t = f + sum_f_others;
    return delta * sum_f_others / (t * t) - 2.0 * c * f;
  };
  double lo = 0.0;
  double hi = std::sqrt(delta / c);
  for (int it = 0; it < max_iter; ++it) {
    if (hi - lo < tol) return 0.5 * (lo + hi);
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // interval below double resolution
    (marginal(mid) > 0.0 ? lo : hi) = mid;
  }
  throw NonConvergenceError("best_response: interval " + std::to_string(hi - lo) +
                                " did not shrink below tol " + std::to_string(tol),
                            {lo, hi});
}

NashResult nash_stage2(double delta, const IncentiveParams& params, double tol, int max_iter) {
  params.validate();
  if (!(delta > 0.0)) throw Error(ErrorCode::kInvalidArgument, "nash_stage2: delta must be positive");
  const int n = params.n();
  if (n < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "nash_stage2: a single node faces no competitors; the optimum is the boundary f -> 0+");
  }
  NashResult r;
  r.f.assign(static_cast<std::size_t>(n), 1.0);
  std::vector<double> next(r.f.size());
  std::vector<double> trace;
  for (r.iterations = 1; r.iterations <= max_iter; ++r.iterations) {
    double total = 0.0;
    for (double f : r.f) total += f;
    double change = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto u = static_cast<std::size_t>(i);
      const double br = best_response(total - r.f[u], delta, params.gamma[u], params.mu[u], tol * 1e-3);
      next[u] = 0.5 * r.f[u] + 0.5 * br;
      change = std::max(change, std::abs(next[u] - r.f[u]));
    }
    r.f.swap(next);
    trace.push_back(change);
    if (change < tol) {
      r.F = 0.0;
      for (double f : r.f) r.F += f;
      return r;
    }
  }
  throw NonConvergenceError("nash_stage2: no fixed point within " + std::to_string(max_iter) +
                                " iterations",
                            std::move(trace));
}

double optimal_delta(double F_star, const IncentiveParams& params) {
  if (!(F_star > 0.0)) throw Error(ErrorCode::kInvalidArgument, "optimal_delta: F must be positive");
  return F_star * params.phi / params.lambda;
}

StackelbergResult stackelberg_equilibrium(const IncentiveParams& params, double tol, double delta0,
                                          int max_iter) {
  params.validate();
  StackelbergResult r;
  if (params.n() == 1) {
    r.outcome = StackelbergResult::Outcome::kBoundary;
    r.delta = delta0;
    r.f = {0.0};
    r.F = 0.0;
    r.note = "single node: with no competitors U = delta - gamma*mu*f^2 is maximised at f -> 0+, "
             "where the first-order condition is undefined; no interior equilibrium";
    return r;
  }
  double delta = delta0;
  r.trajectory.push_back(delta);
  for (int it = 0; it < max_iter; ++it) {
    const NashResult nash = nash_stage2(delta, params, tol * 1e-3);
    const double next = optimal_delta(nash.F, params);
    r.trajectory.push_back(next);
    if (std::abs(next - delta) < tol) {
      r.delta = next;
      r.f = nash.f;
      r.F = nash.F;
      return r;
    }
    delta = next;
  }
  throw NonConvergenceError("stackelberg_equilibrium: delta did not settle within " +
                                std::to_string(max_iter) + " iterations",
                            r.trajectory);
}

}  // namespace pofel
