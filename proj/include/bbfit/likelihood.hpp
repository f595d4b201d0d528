#pragma once

// Transformed binned likelihoods for template fits with finite Monte-Carlo
// statistics.
//
// Every cost Q is -2 ln(L / L_saturated), so Q >= 0 and its minimum is
// asymptotically chi-square distributed. Three variants:
//
//   Exact   one amplitude factor per (bin, component), fitted by the minimizer
//   Conway  one factor per bin, Gaussian constraint with variance V(beta)
//   Approx  one factor per bin, Poisson constraint; data and templates enter
//           symmetrically and beta = (n + a) / (mu0 + a)
//
// The approximate costs profile beta analytically in each bin, so their
// parameter vector contains only the K yields. Bins where every template is
// empty carry no information on the yields and are skipped by all costs.

#include <cstddef>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "bbfit/data_model.hpp"

namespace bbfit {

enum class Method { Exact, Conway, Approx };

std::string_view method_name(Method m);
// Accepts "exact", "conway", "approx"; throws std::invalid_argument otherwise.
Method parse_method(std::string_view name);

// 2 (mu - n - n ln(mu / n)); 2 mu for n = 0; +inf for n > 0 and mu = 0.
// Throws std::invalid_argument on negative or non-finite input.
double q_poisson(double n, double mu);

double beta_new(double n, double a, double mu0);

// Positive root of beta^2 + (V mu0 - 1) beta - V n = 0.
double beta_conway(double n, double mu0, double var_beta);

// sum_k (y_k/M_k)^2 v_k / (sum_k (y_k/M_k) a_k)^2 with v_k = a_k, or the
// template sumw2 when `weighted`. Throws std::domain_error if the
// denominator vanishes; such bins are skipped by the Conway cost.
double var_beta(const TemplateModel& model, std::span<const double> yields,
                std::size_t bin, bool weighted = false);

// Per-bin beta and Q contribution. Skipped bins hold beta = NaN, q = 0.
struct BetaDiagnostics {
  std::vector<double> beta;
  std::vector<double> q_bin;
};

struct CostValue {
  double q;
  BetaDiagnostics diag;
};

CostValue q_new(const TemplateModel& model, std::span<const double> yields);
CostValue q_conway(const TemplateModel& model, std::span<const double> yields);
CostValue q_new_weighted(const TemplateModel& model,
                         std::span<const double> yields);
CostValue q_conway_weighted(const TemplateModel& model,
                            std::span<const double> yields);

// `betas` holds one factor per (bin, component) slot with a_k > 0, in
// bin-major order (see exact_slots).
double q_exact(const TemplateModel& model, std::span<const double> yields,
               std::span<const double> betas);

struct Slot {
  std::size_t bin;
  std::size_t component;
};
std::vector<Slot> exact_slots(const TemplateModel& model);

// Cost as a function of the full parameter vector: K yields, followed by the
// nuisance factors for Method::Exact. Evaluation is const and allocation-free.
class CostFunction {
 public:
  // Throws std::invalid_argument for Method::Exact with weighted = true.
  CostFunction(Method method, TemplateModel model, bool weighted = false);

  double operator()(std::span<const double> params) const;
  BetaDiagnostics diagnostics(std::span<const double> params) const;

  Method method() const { return method_; }
  bool weighted() const { return weighted_; }
  const TemplateModel& model() const { return model_; }
  std::size_t nyields() const { return model_.ncomponents(); }
  std::size_t nparams() const { return nyields() + slots_.size(); }
  const std::vector<Slot>& slots() const { return slots_; }

  // 0 for yields, 1e-10 for the exact nuisance factors.
  std::vector<double> lower_bounds() const;

  // Bins entering Q minus number of yields.
  int ndof() const;

 private:
  Method method_;
  TemplateModel model_;
  bool weighted_;
  std::vector<Slot> slots_;
};

inline constexpr double kNuisanceLowerBound = 1e-10;

}  // namespace bbfit
