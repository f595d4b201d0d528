#pragma once

// Bounded quasi-Newton minimization of a cost, covariance from a
// finite-difference Hessian, and goodness-of-fit p-values.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "bbfit/likelihood.hpp"

namespace bbfit {

struct MinimizeOptions {
  double grad_tol = 1e-4;   // projected gradient norm
  double dq_tol = 1e-6;     // |Q_prev - Q| between iterations
  std::size_t max_evaluations = 100000;
};

using Objective = std::function<double(std::span<const double>)>;

struct Minimum {
  std::vector<double> x;
  double q = 0;
  bool converged = false;
  std::size_t n_evaluations = 0;
  std::size_t n_iterations = 0;
  double gradient_norm = 0;
};

// BFGS on a box with lower bounds only. Gradients by central differences
// (second-order one-sided differences next to a bound). Throws
// std::invalid_argument if the objective is not finite at `start` or the
// sizes disagree. `start` is clamped into the box.
Minimum minimize_bounded(const Objective& f, std::vector<double> start,
                         std::span<const double> lower,
                         const MinimizeOptions& options = {});

// Central finite-difference Hessian, symmetrized. Stencils that would cross a
// lower bound are shifted up so that every evaluation stays inside the box.
Eigen::MatrixXd hessian(const Objective& f, std::span<const double> at,
                        std::span<const double> lower);

struct FitResult {
  std::vector<double> yields;
  std::vector<double> yield_errors;
  std::optional<Eigen::MatrixXd> covariance;  // K x K; absent if H is not PD
  double qmin = 0;
  int ndof = 0;
  bool converged = false;
  std::size_t n_evaluations = 0;
  std::vector<double> parameters;  // yields, then exact nuisance factors
  BetaDiagnostics betas;
};

FitResult minimize(const CostFunction& cost, std::vector<double> start,
                   std::span<const double> lower,
                   const MinimizeOptions& options = {});

// minimize(cost, default_start(cost), cost.lower_bounds(), options)
FitResult fit(const CostFunction& cost, const MinimizeOptions& options = {});

// Yield block of 2 H^-1, where H is the Hessian of Q over all parameters.
// Empty when H is not positive definite.
std::optional<Eigen::MatrixXd> hesse(const CostFunction& cost,
                                     std::span<const double> at);

// Yields at total data / K, nuisance factors at 1.
std::vector<double> default_start(const CostFunction& cost);

// Regularized upper incomplete gamma Q(a, x).
double gamma_q(double a, double x);

double chi2_sf(double x, double ndof);

// Chi-square upper-tail probability of qmin; empty when ndof <= 0.
std::optional<double> gof(const FitResult& result);

}  // namespace bbfit
