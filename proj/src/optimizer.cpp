#include "bbfit/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bbfit {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

class CountingObjective {
 public:
  explicit CountingObjective(const Objective& f) : f_(f) {}
  double operator()(std::span<const double> x) {
    ++count_;
    return f_(x);
  }
  std::size_t count() const { return count_; }

 private:
  const Objective& f_;
  std::size_t count_ = 0;
};

double gradient_step(double x) { return std::sqrt(kEps) * std::max(1.0, std::abs(x)); }
double curvature_step(double x) { return std::cbrt(kEps) * std::max(1.0, std::abs(x)); }

// Central differences; second-order forward differences when the backward
// point would leave the box or the objective is not finite there.
Eigen::VectorXd gradient(CountingObjective& f, std::vector<double>& x,
                         double fx, std::span<const double> lower) {
  const std::size_t n = x.size();
  Eigen::VectorXd g(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = x[i];
    const double h = (xi + gradient_step(xi)) - xi;
    double gi = kNaN;
    if (xi - h >= lower[i]) {
      x[i] = xi + h;
      const double fp = f(x);
      x[i] = xi - h;
      const double fm = f(x);
      gi = (fp - fm) / (2 * h);
    }
    if (!std::isfinite(gi)) {
      x[i] = xi + h;
      const double f1 = f(x);
      x[i] = xi + 2 * h;
      const double f2 = f(x);
      gi = (-3 * fx + 4 * f1 - f2) / (2 * h);
    }
    x[i] = xi;
    g[i] = std::isfinite(gi) ? gi : 0.0;
  }
  return g;
}

// Diagonal inverse-Hessian seed from second differences along each axis.
Eigen::MatrixXd initial_inverse(CountingObjective& f, std::vector<double>& x,
                                std::span<const double> lower) {
  const std::size_t n = x.size();
  Eigen::MatrixXd h0 = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = x[i];
    const double h = curvature_step(xi);
    const double c = std::max(xi, lower[i] + h);
    x[i] = c;
    const double f0 = f(x);
    x[i] = c + h;
    const double fp = f(x);
    x[i] = c - h;
    const double fm = f(x);
    x[i] = xi;
    const double d = (fp - 2 * f0 + fm) / (h * h);
    h0(i, i) = (std::isfinite(d) && d > 0) ? 1.0 / d : 1.0;
  }
  return h0;
}

}  // namespace

Minimum minimize_bounded(const Objective& objective, std::vector<double> start,
                         std::span<const double> lower,
                         const MinimizeOptions& options) {
  const std::size_t n = start.size();
  if (lower.size() != n)
    throw std::invalid_argument("start and bounds differ in size");
  for (std::size_t i = 0; i < n; ++i) start[i] = std::max(start[i], lower[i]);

  CountingObjective f(objective);
  Minimum m;
  std::vector<double> x = std::move(start);
  double fx = f(x);
  if (!std::isfinite(fx))
    throw std::invalid_argument("cost is not finite at the start point");

  Eigen::VectorXd g = gradient(f, x, fx, lower);
  Eigen::MatrixXd hinv = initial_inverse(f, x, lower);
  double dq = kInf;
  bool fresh_inverse = true;
  bool restarted = false;
  std::vector<double> xt(n);
  std::vector<char> active(n);
  double gnorm = kInf;

  for (std::size_t iter = 0;; ++iter) {
    m.n_iterations = iter;
    Eigen::VectorXd pg = g;
    for (std::size_t i = 0; i < n; ++i) {
      active[i] = x[i] <= lower[i] && g[i] > 0;
      if (active[i]) pg[i] = 0;
    }
    gnorm = pg.norm();
    if (gnorm < options.grad_tol && (dq < options.dq_tol || iter == 0)) {
      m.converged = true;
      break;
    }
    if (f.count() >= options.max_evaluations) break;

    Eigen::VectorXd d = -(hinv * pg);
    for (std::size_t i = 0; i < n; ++i)
      if (active[i]) d[i] = 0;
    if (!(d.dot(pg) < 0)) {
      hinv = initial_inverse(f, x, lower);
      fresh_inverse = true;
      d = -(hinv * pg);
      for (std::size_t i = 0; i < n; ++i)
        if (active[i]) d[i] = 0;
      if (!(d.dot(pg) < 0)) d = -pg;
    }

    // backtracking line search on the projected path
    const double slope = d.dot(g);
    double t = 1;
    double ft = kInf;
    bool accepted = false;
    for (int ls = 0; ls < 60 && f.count() < options.max_evaluations; ++ls) {
      double gs = 0;
      bool moved = false;
      for (std::size_t i = 0; i < n; ++i) {
        xt[i] = std::max(x[i] + t * d[i], lower[i]);
        gs += g[i] * (xt[i] - x[i]);
        moved = moved || xt[i] != x[i];
      }
      if (!moved) break;
      ft = f(xt);
      if (std::isfinite(ft) && ft <= fx + 1e-4 * gs) {
        accepted = true;
        break;
      }
      double next = 0.5 * t;
      if (std::isfinite(ft)) {
        const double denom = 2 * (ft - fx - slope * t);
        if (denom > 0) next = -slope * t * t / denom;
        next = std::clamp(next, 0.1 * t, 0.5 * t);
      } else {
        next = 0.2 * t;
      }
      t = next;
    }

    if (!accepted) {
      if (f.count() >= options.max_evaluations) break;
      if (!fresh_inverse) {
        hinv = initial_inverse(f, x, lower);
        fresh_inverse = true;
        continue;
      }
      if (gnorm < options.grad_tol) {
        // no further decrease is resolvable at finite-difference precision
        m.converged = true;
        break;
      }
      if (restarted) break;
      restarted = true;
      for (std::size_t i = 0; i < n; ++i)
        x[i] = std::max(x[i] + 1e-3 * std::max(1.0, std::abs(x[i])), lower[i]);
      fx = f(x);
      if (!std::isfinite(fx)) break;
      g = gradient(f, x, fx, lower);
      hinv = initial_inverse(f, x, lower);
      dq = kInf;
      continue;
    }

    Eigen::VectorXd gt = gradient(f, xt, ft, lower);
    Eigen::VectorXd s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = xt[i] - x[i];
    const Eigen::VectorXd y = gt - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = hinv * y;
      const double yhy = y.dot(hy);
      hinv += ((1 + rho * yhy) * rho) * (s * s.transpose()) -
              rho * (hy * s.transpose() + s * hy.transpose());
    }
    dq = fx - ft;
    std::swap(x, xt);
    fx = ft;
    g = std::move(gt);
    fresh_inverse = false;
  }

  m.x = std::move(x);
  m.q = fx;
  m.n_evaluations = f.count();
  m.gradient_norm = gnorm;
  return m;
}

Eigen::MatrixXd hessian(const Objective& f, std::span<const double> at,
                        std::span<const double> lower) {
  const std::size_t n = at.size();
  if (lower.size() != n)
    throw std::invalid_argument("point and bounds differ in size");
  std::vector<double> c(at.begin(), at.end());
  std::vector<double> h(n);
  for (std::size_t i = 0; i < n; ++i) {
    h[i] = curvature_step(c[i]);
    c[i] = std::max(c[i], lower[i] + h[i]);
  }
  const double f0 = f(c);
  Eigen::MatrixXd hm(n, n);
  std::vector<double> x = c;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = c[i] + h[i];
    const double fp = f(x);
    x[i] = c[i] - h[i];
    const double fm = f(x);
    x[i] = c[i];
    hm(i, i) = (fp - 2 * f0 + fm) / (h[i] * h[i]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double acc = 0;
      for (int si : {1, -1}) {
        for (int sj : {1, -1}) {
          x[i] = c[i] + si * h[i];
          x[j] = c[j] + sj * h[j];
          acc += si * sj * f(x);
        }
      }
      x[i] = c[i];
      x[j] = c[j];
      hm(i, j) = hm(j, i) = acc / (4 * h[i] * h[j]);
    }
  }
  return 0.5 * (hm + hm.transpose());
}

std::optional<Eigen::MatrixXd> hesse(const CostFunction& cost,
                                     std::span<const double> at) {
  if (at.size() != cost.nparams())
    throw std::invalid_argument("parameter vector has the wrong size");
  const auto lower = cost.lower_bounds();
  const Eigen::MatrixXd h = hessian(std::cref(cost), at, lower);
  if (!h.allFinite()) return std::nullopt;
  Eigen::LLT<Eigen::MatrixXd> llt(h);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const auto n = static_cast<Eigen::Index>(h.rows());
  const Eigen::MatrixXd full = 2.0 * llt.solve(Eigen::MatrixXd::Identity(n, n));
  const auto k = static_cast<Eigen::Index>(cost.nyields());
  Eigen::MatrixXd block = full.topLeftCorner(k, k);
  block = 0.5 * (block + block.transpose()).eval();
  for (Eigen::Index i = 0; i < k; ++i)
    if (!(block(i, i) > 0)) return std::nullopt;
  return block;
}

std::vector<double> default_start(const CostFunction& cost) {
  std::vector<double> start(cost.nparams(), 1.0);
  const double y = cost.model().data().total() /
                   static_cast<double>(cost.nyields());
  std::fill_n(start.begin(), cost.nyields(), y);
  return start;
}

FitResult minimize(const CostFunction& cost, std::vector<double> start,
                   std::span<const double> lower,
                   const MinimizeOptions& options) {
  if (start.size() != cost.nparams() || lower.size() != cost.nparams())
    throw std::invalid_argument("start or bounds have the wrong size");
  Minimum m = minimize_bounded(std::cref(cost), std::move(start), lower, options);

  FitResult r;
  const std::size_t k = cost.nyields();
  r.yields.assign(m.x.begin(), m.x.begin() + static_cast<std::ptrdiff_t>(k));
  r.qmin = m.q;
  r.ndof = cost.ndof();
  r.n_evaluations = m.n_evaluations;
  r.covariance = hesse(cost, m.x);
  r.converged = m.converged && r.covariance.has_value();
  r.yield_errors.assign(k, kNaN);
  if (r.covariance) {
    for (std::size_t i = 0; i < k; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      r.yield_errors[i] = std::sqrt((*r.covariance)(ii, ii));
    }
  }
  r.betas = cost.diagnostics(m.x);
  r.parameters = std::move(m.x);
  return r;
}

FitResult fit(const CostFunction& cost, const MinimizeOptions& options) {
  const auto lower = cost.lower_bounds();
  return minimize(cost, default_start(cost), lower, options);
}

double gamma_q(double a, double x) {
  if (!(a > 0) || !(x >= 0))
    throw std::domain_error("gamma_q needs a > 0 and x >= 0");
  if (x == 0) return 1.0;
  if (std::isinf(x)) return 0.0;
  const double log_prefactor = -x + a * std::log(x) - std::lgamma(a);
  constexpr int kMaxIter = 100000;
  if (x < a + 1) {
    // series for the lower function P(a, x)
    double ap = a;
    double del = 1.0 / a;
    double sum = del;
    for (int i = 0; i < kMaxIter; ++i) {
      ap += 1;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * kEps) break;
    }
    return 1.0 - sum * std::exp(log_prefactor);
  }
  // modified Lentz continued fraction for Q(a, x)
  constexpr double kTiny = 1e-300;
  double b = x + 1 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1) < kEps) break;
  }
  return std::exp(log_prefactor) * h;
}

double chi2_sf(double x, double ndof) {
  if (!(ndof > 0)) throw std::domain_error("chi2_sf needs ndof > 0");
  if (x <= 0) return 1.0;
  return gamma_q(0.5 * ndof, 0.5 * x);
}

std::optional<double> gof(const FitResult& result) {
  if (result.ndof <= 0) return std::nullopt;
  return chi2_sf(result.qmin, result.ndof);
}

}  // namespace bbfit
