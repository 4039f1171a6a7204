#pragma once

// Two-stage Stackelberg game between the task publisher (total reward δ) and
// the edge nodes (CPU cycle frequencies f_i).

#include <string>
#include <vector>

#include "pofel/error.hpp"

namespace pofel {

struct IncentiveParams {
  double B = 500.0;
  double lambda = 1.0;
  double phi = 5.0;
  std::vector<double> gamma;  // per node
  std::vector<double> mu;     // per node

  static IncentiveParams uniform(int n, double gamma, double mu, double B = 500.0,
                                 double lambda = 1.0, double phi = 5.0);
  int n() const { return static_cast<int>(gamma.size()); }
  double cost(int i) const { return gamma[static_cast<std::size_t>(i)] * mu[static_cast<std::size_t>(i)]; }
  void validate() const;
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, std::vector<double> trajectory)
      : Error(ErrorCode::kNonConvergence, what), trajectory_(std::move(trajectory)) {}
  const std::vector<double>& trajectory() const { return trajectory_; }

 private:
  std::vector<double> trajectory_;
};

/// B - (λ·δ/F - φ)².
double utility_publisher(double delta, double F, const IncentiveParams& params);

/// The modelling condition U_tp > 0, i.e. -√B < λδ/F - φ < √B.
bool publisher_utility_positive(double delta, double F, const IncentiveParams& params);

/// δ·f_i/(f_i + Σf_-i) - γ_i·μ_i·f_i².
double utility_node(double f_i, double sum_f_others, double delta, double gamma_i, double mu_i);

/// Root of δ·S/(f+S)² = 2γμ·f on (0, √(δ/(γμ))) by bisection.
double best_response(double sum_f_others, double delta, double gamma_i, double mu_i,
                     double tol = 1e-10, int max_iter = 2000);

struct NashResult {
  std::vector<double> f;
  double F = 0.0;
  int iterations = 0;
};

/// Damped (0.5) synchronous best-response iteration from f_i = 1.
NashResult nash_stage2(double delta, const IncentiveParams& params, double tol = 1e-9,
                       int max_iter = 100000);

/// δ* = F·φ/λ.
double optimal_delta(double F_star, const IncentiveParams& params);

struct StackelbergResult {
  enum class Outcome { kEquilibrium, kBoundary };
  Outcome outcome = Outcome::kEquilibrium;
  double delta = 0.0;
  std::vector<double> f;
  double F = 0.0;
  std::vector<double> trajectory;  // δ iterates
  std::string note;
};

/// Alternates nash_stage2 and optimal_delta until |Δδ| < tol. A single node
/// has no interior equilibrium and is reported as a boundary case.
StackelbergResult stackelberg_equilibrium(const IncentiveParams& params, double tol = 1e-7,
                                          double delta0 = 1000.0, int max_iter = 500);

}  // namespace pofel
