#include "bbfit/likelihood.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace bbfit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Unchecked kernel. Written as 2 n (r - log1p(r)) with r = (mu - n) / n,
// which keeps full relative precision close to the minimum mu = n.
inline double qp(double n, double mu) noexcept {
  if (n == 0) return 2 * mu;
  if (mu == 0) return kInf;
  const double r = (mu - n) / n;
  const double v = 2 * n * (r - std::log1p(r));
  return v > 0 ? v : 0;
}

inline double conway_root(double n, double mu0, double v) noexcept {
  const double b = v * mu0 - 1;
  const double disc = b * b + 4 * v * n;
  const double root = std::sqrt(disc);
  // pick the form without cancellation
  if (b > 0) return 2 * v * n / (b + root);
  return 0.5 * (root - b);
}

struct BinTerm {
  double beta;
  double q;
};

// n, s*mu0 and a are already the effective quantities in the weighted case.
inline BinTerm approx_bin(double n, double smu0, double a) noexcept {
  const double beta = (n + a) / (smu0 + a);
  return {beta, qp(n, beta * smu0) + qp(a, beta * a)};
}

inline BinTerm conway_bin(double n, double smu0, double v) noexcept {
  if (smu0 == 0) return {kNaN, qp(n, 0)};
  const double beta = conway_root(n, smu0, v);
  const double d = beta - 1;
  const double penalty = v > 0 ? d * d / v : 0;
  return {beta, qp(n, beta * smu0) + penalty};
}

// Returns (mu0, V numerator) for one bin.
inline std::pair<double, double> mu0_and_var_num(const TemplateModel& model,
                                                 std::span<const double> y,
                                                 std::size_t b,
                                                 bool weighted) noexcept {
  const auto norms = model.norms();
  double mu = 0;
  double num = 0;
  for (std::size_t k = 0; k < model.ncomponents(); ++k) {
    const auto& c = model.component(k);
    const double f = y[k] / norms[k];
    mu += f * c.sumw(b);
    num += f * f * (weighted ? c.sumw2(b) : c.sumw(b));
  }
  return {mu, num};
}

double evaluate_profiled(Method method, bool weighted,
                         const TemplateModel& model,
                         std::span<const double> yields,
                         BetaDiagnostics* diag) {
  const auto& data = model.data();
  double total = 0;
  for (std::size_t b = 0; b < model.nbins(); ++b) {
    const double a = model.pooled_sumw(b);
    if (!(a > 0)) {
      if (diag) {
        diag->beta[b] = kNaN;
        diag->q_bin[b] = 0;
      }
      continue;
    }
    EffectiveCount dn{data.sumw(b), 1.0};
    if (weighted) dn = effective(data, b);
    const auto [mu, num] = mu0_and_var_num(model, yields, b, weighted);
    BinTerm t;
    if (method == Method::Approx) {
      const double a_eff =
          weighted ? effective(a, model.pooled_sumw2(b)).n_eff : a;
      t = approx_bin(dn.n_eff, dn.s * mu, a_eff);
    } else {
      const double v = mu > 0 ? num / (mu * mu) : kInf;
      t = conway_bin(dn.n_eff, dn.s * mu, v);
    }
    if (diag) {
      diag->beta[b] = t.beta;
      diag->q_bin[b] = t.q;
    }
    total += t.q;
  }
  return total;
}

double evaluate_exact(const TemplateModel& model,
                      std::span<const double> yields,
                      std::span<const double> betas, BetaDiagnostics* diag) {
  const auto norms = model.norms();
  const auto& data = model.data();
  const std::size_t K = model.ncomponents();
  std::size_t slot = 0;
  double total = 0;
  for (std::size_t b = 0; b < model.nbins(); ++b) {
    if (!(model.pooled_sumw(b) > 0)) {
      if (diag) {
        diag->beta[b] = kNaN;
        diag->q_bin[b] = 0;
      }
      continue;
    }
    double mu = 0;
    double mu0 = 0;
    double q = 0;
    for (std::size_t k = 0; k < K; ++k) {
      const double a = model.component(k).sumw(b);
      if (!(a > 0)) continue;
      // DBL_MIN floor: xi must stay positive for the logarithm
      const double xi = std::max(a * betas[slot++], DBL_MIN);
      mu += yields[k] * xi / norms[k];
      mu0 += yields[k] * a / norms[k];
      q += qp(a, xi);
    }
    q += qp(data.sumw(b), mu);
    if (diag) {
      diag->beta[b] = mu0 > 0 ? mu / mu0 : kNaN;
      diag->q_bin[b] = q;
    }
    total += q;
  }
  return total;
}

void check_yields(const TemplateModel& model, std::span<const double> yields) {
  if (yields.size() != model.ncomponents())
    throw std::invalid_argument("expected one yield per template");
  for (double y : yields)
    if (!std::isfinite(y) || y < 0)
      throw std::invalid_argument("yields must be finite and nonnegative");
}

BetaDiagnostics make_diag(std::size_t nbins) {
  return {std::vector<double>(nbins), std::vector<double>(nbins)};
}

CostValue profiled(Method m, bool weighted, const TemplateModel& model,
                   std::span<const double> yields) {
  check_yields(model, yields);
  auto diag = make_diag(model.nbins());
  const double q = evaluate_profiled(m, weighted, model, yields, &diag);
  return {q, std::move(diag)};
}

}  // namespace

std::string_view method_name(Method m) {
  switch (m) {
    case Method::Exact:
      return "exact";
    case Method::Conway:
      return "conway";
    case Method::Approx:
      return "approx";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  if (name == "exact") return Method::Exact;
  if (name == "conway") return Method::Conway;
  if (name == "approx") return Method::Approx;
  throw std::invalid_argument("unknown method '" + std::string(name) +
                              "' (expected exact, conway or approx)");
}

double q_poisson(double n, double mu) {
  if (!std::isfinite(n) || !std::isfinite(mu) || n < 0 || mu < 0)
    throw std::invalid_argument("q_poisson needs finite n >= 0 and mu >= 0");
  return qp(n, mu);
}

double beta_new(double n, double a, double mu0) {
  if (!(mu0 + a > 0))
    throw std::domain_error("beta_new is undefined for mu0 + a == 0");
  return (n + a) / (mu0 + a);
}

double beta_conway(double n, double mu0, double var_beta) {
  if (!(var_beta > 0) || mu0 < 0 || n < 0)
    throw std::invalid_argument("beta_conway needs V > 0, mu0 >= 0, n >= 0");
  return conway_root(n, mu0, var_beta);
}

double var_beta(const TemplateModel& model, std::span<const double> yields,
                std::size_t bin, bool weighted) {
  check_yields(model, yields);
  if (bin >= model.nbins()) throw std::out_of_range("bin index out of range");
  const auto [mu, num] = mu0_and_var_num(model, yields, bin, weighted);
  if (!(mu > 0))
    throw std::domain_error("V(beta) undefined where mu0 == 0");
  return num / (mu * mu);
}

CostValue q_new(const TemplateModel& model, std::span<const double> yields) {
  return profiled(Method::Approx, false, model, yields);
}

CostValue q_conway(const TemplateModel& model,
                   std::span<const double> yields) {
  return profiled(Method::Conway, false, model, yields);
}

CostValue q_new_weighted(const TemplateModel& model,
                         std::span<const double> yields) {
  return profiled(Method::Approx, true, model, yields);
}

CostValue q_conway_weighted(const TemplateModel& model,
                            std::span<const double> yields) {
  return profiled(Method::Conway, true, model, yields);
}

std::vector<Slot> exact_slots(const TemplateModel& model) {
  std::vector<Slot> slots;
  for (std::size_t b = 0; b < model.nbins(); ++b)
    for (std::size_t k = 0; k < model.ncomponents(); ++k)
      if (model.component(k).sumw(b) > 0) slots.push_back({b, k});
  return slots;
}

double q_exact(const TemplateModel& model, std::span<const double> yields,
               std::span<const double> betas) {
  check_yields(model, yields);
  if (!model.data().is_unweighted())
    throw std::invalid_argument("the exact likelihood needs unweighted data");
  if (betas.size() != exact_slots(model).size())
    throw std::invalid_argument("expected one nuisance factor per nonzero "
                                "template bin");
  for (double b : betas)
    if (!std::isfinite(b) || !(b > 0))
      throw std::invalid_argument("nuisance factors must be finite and > 0");
  return evaluate_exact(model, yields, betas, nullptr);
}

CostFunction::CostFunction(Method method, TemplateModel model, bool weighted)
    : method_(method), model_(std::move(model)), weighted_(weighted) {
  if (method_ == Method::Exact) {
    if (weighted_)
      throw std::invalid_argument(
          "the exact likelihood does not support weighted samples");
    slots_ = exact_slots(model_);
  }
}

double CostFunction::operator()(std::span<const double> params) const {
  const auto yields = params.first(nyields());
  if (method_ == Method::Exact)
    return evaluate_exact(model_, yields, params.subspan(nyields()), nullptr);
  return evaluate_profiled(method_, weighted_, model_, yields, nullptr);
}

BetaDiagnostics CostFunction::diagnostics(std::span<const double> params) const {
  auto diag = make_diag(model_.nbins());
  const auto yields = params.first(nyields());
  if (method_ == Method::Exact)
    evaluate_exact(model_, yields, params.subspan(nyields()), &diag);
  else
    evaluate_profiled(method_, weighted_, model_, yields, &diag);
  return diag;
}

std::vector<double> CostFunction::lower_bounds() const {
  std::vector<double> lb(nparams(), kNuisanceLowerBound);
  std::fill_n(lb.begin(), nyields(), 0.0);
  return lb;
}

int CostFunction::ndof() const {
  return static_cast<int>(model_.active_bins()) -
         static_cast<int>(nyields());
}

}  // namespace bbfit
