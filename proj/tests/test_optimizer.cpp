#include <doctest.h>

#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "bbfit/optimizer.hpp"
#include "bbfit/toy.hpp"
#include "oracles.hpp"

using namespace bbfit;

namespace {

// Single-bin-dominant two-component problem: component 0 lives in the first
// half of the bins, component 1 in the second half, with a small overlap.
TemplateModel dominant_model(std::mt19937_64& rng, double scale) {
  const std::size_t nb = 8;
  std::vector<double> a0(nb), a1(nb), data(nb);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (std::size_t b = 0; b < nb; ++b) {
    const bool first = b < nb / 2;
    a0[b] = std::round((first ? 50 : 2) * u(rng) * scale);
    a1[b] = std::round((first ? 3 : 60) * u(rng) * scale);
  }
  double m0 = 0, m1 = 0;
  for (std::size_t b = 0; b < nb; ++b) m0 += a0[b], m1 += a1[b];
  for (std::size_t b = 0; b < nb; ++b) {
    const double mu = 250 * a0[b] / m0 + 750 * a1[b] / m1;
    data[b] = std::poisson_distribution<int>(mu)(rng);
  }
  return TemplateModel(uniform_edges(nb, 0, 1), from_counts(data),
                       {{"s", from_counts(a0)}, {"b", from_counts(a1)}});
}

}  // namespace

TEST_CASE("minimize_bounded on smooth functions") {
  SUBCASE("badly scaled quadratic") {
    auto f = [](std::span<const double> x) {
      return (x[0] - 300) * (x[0] - 300) / 300 + 50 * (x[1] - 0.9) * (x[1] - 0.9) +
             (x[0] - 300) * (x[1] - 0.9) / 10;
    };
    const std::vector<double> lo{0, 0};
    const auto m = minimize_bounded(f, {10, 5}, lo);
    CHECK(m.converged);
    CHECK(m.x[0] == doctest::Approx(300).epsilon(1e-5));
    CHECK(m.x[1] == doctest::Approx(0.9).epsilon(1e-5));
  }
  SUBCASE("active lower bound") {
    auto f = [](std::span<const double> x) {
      return (x[0] + 2) * (x[0] + 2) + (x[1] - 1) * (x[1] - 1);
    };
    const std::vector<double> lo{0, 0};
    const auto m = minimize_bounded(f, {3, 3}, lo);
    CHECK(m.converged);
    CHECK(m.x[0] == 0);
    CHECK(m.x[1] == doctest::Approx(1).epsilon(1e-6));
  }
  SUBCASE("Rosenbrock") {
    auto f = [](std::span<const double> x) {
      return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2);
    };
    const std::vector<double> lo{-10, -10};
    MinimizeOptions o;
    o.grad_tol = 1e-6;
    const auto m = minimize_bounded(f, {-1.2, 1}, lo, o);
    CHECK(m.converged);
    CHECK(m.x[0] == doctest::Approx(1).epsilon(1e-4));
  }
  SUBCASE("non-finite start") {
    auto f = [](std::span<const double>) { return NAN; };
    const std::vector<double> lo{0};
    CHECK_THROWS_AS(minimize_bounded(f, {1}, lo), std::invalid_argument);
  }
  SUBCASE("evaluation budget") {
    auto f = [](std::span<const double> x) {
      return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2);
    };
    const std::vector<double> lo{-10, -10};
    MinimizeOptions o;
    o.max_evaluations = 30;
    const auto m = minimize_bounded(f, {-1.2, 1}, lo, o);
    CHECK_FALSE(m.converged);
    CHECK(m.q < f(std::vector<double>{-1.2, 1}));
  }
}

TEST_CASE("fit at the global minimum of a saturated model") {
  // data = mu0 at y = 20 in every bin
  const TemplateModel m({0, 1, 2, 3}, from_counts(std::vector<double>{2, 6, 12}),
                        {{"t", from_counts(std::vector<double>{1, 3, 6})}});
  const CostFunction cost(Method::Approx, m);
  const auto r = fit(cost);
  CHECK(r.converged);
  CHECK(r.qmin == doctest::Approx(0).scale(1).epsilon(1e-12));
  CHECK(r.yields[0] == 20);
  CHECK(r.ndof == 2);
  CHECK(gof(r).value() == doctest::Approx(1));
}

TEST_CASE("K = 1 fit matches a golden-section search") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> t(10), d(10);
    for (auto& x : t) x = std::poisson_distribution<int>(20)(rng);
    for (auto& x : d) x = std::poisson_distribution<int>(40)(rng);
    t[0] += 1;
    const TemplateModel m(uniform_edges(10, 0, 1), from_counts(d), {{"t", from_counts(t)}});
    for (Method meth : {Method::Approx, Method::Conway}) {
      const CostFunction cost(meth, m);
      const auto r = fit(cost);
      REQUIRE(r.converged);
      const double best = oracle::golden_min(
          [&](double y) { return cost(std::vector<double>{y}); }, 1, 2000);
      CHECK(r.yields[0] == doctest::Approx(best).epsilon(1e-4));
    }
  }
}

TEST_CASE("fit agrees with a grid search on dominant two-component problems") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    const auto m = dominant_model(rng, 1.0 + trial);
    const CostFunction cost(Method::Approx, m);
    const auto r = fit(cost);
    REQUIRE(r.converged);
    // coarse grid, then a grid at 0.1 % of the truth around the coarse optimum
    const double s0 = 0.25, s1 = 0.75;
    auto grid = [&](double c0, double c1, double h0, double h1, int half) {
      double best = INFINITY, b0 = c0, b1 = c1;
      for (int i = -half; i <= half; ++i)
        for (int j = -half; j <= half; ++j) {
          const std::vector<double> y{c0 + i * h0, c1 + j * h1};
          if (y[0] < 0 || y[1] < 0) continue;
          const double q = cost(y);
          if (q < best) best = q, b0 = y[0], b1 = y[1];
        }
      return std::pair{b0, b1};
    };
    auto [c0, c1] = grid(250, 750, 40 * s0, 40 * s1, 30);
    std::tie(c0, c1) = grid(c0, c1, s0 * 4, s1 * 4, 30);
    std::tie(c0, c1) = grid(c0, c1, s0, s1, 30);
    CHECK(std::abs(r.yields[0] - c0) <= s0 * 1.0001);
    CHECK(std::abs(r.yields[1] - c1) <= s1 * 1.0001);
  }
}

TEST_CASE("component order permutes the estimates") {
  std::mt19937_64 rng(12);
  const auto m = dominant_model(rng, 2.0);
  const TemplateModel mr(std::vector<double>(m.edges().begin(), m.edges().end()), m.data(),
                         {m.components()[1], m.components()[0]});
  for (Method meth : {Method::Approx, Method::Conway}) {
    const auto r = fit(CostFunction(meth, m));
    const auto rr = fit(CostFunction(meth, mr));
    CHECK(r.yields[0] == doctest::Approx(rr.yields[1]).epsilon(1e-6));
    CHECK(r.yields[1] == doctest::Approx(rr.yields[0]).epsilon(1e-6));
  }
}

TEST_CASE("hessian and covariance") {
  SUBCASE("quadratic gives variance v") {
    const double v = 37.5;
    auto f = [&](std::span<const double> x) { return (x[0] - 100) * (x[0] - 100) / v; };
    const std::vector<double> lo{0};
    const std::vector<double> at{100};
    const auto h = hessian(f, at, lo);
    CHECK(2.0 / h(0, 0) == doctest::Approx(v).epsilon(1e-6));
  }
  SUBCASE("symmetric by construction") {
    auto f = [](std::span<const double> x) {
      return std::exp(0.1 * x[0]) + x[0] * x[1] * x[1] + std::cos(x[2] * x[0]);
    };
    const std::vector<double> lo{-10, -10, -10};
    const std::vector<double> at{0.3, 1.2, -0.7};
    const auto h = hessian(f, at, lo);
    CHECK((h - h.transpose()).norm() == 0);
  }
  SUBCASE("single Poisson bin") {
    // a huge template makes the template exact: Q = q_poisson(n; y)
    const TemplateModel m({0, 1}, from_counts(std::vector<double>{100}),
                          {{"t", from_counts(std::vector<double>{1e12})}});
    const CostFunction cost(Method::Approx, m);
    const std::vector<double> at{100};
    const auto cov = hesse(cost, at);
    REQUIRE(cov);
    CHECK((*cov)(0, 0) == doctest::Approx(100).epsilon(0.01));
  }
  SUBCASE("pure Poisson model matches the extended-ML variance") {
    ToyConfig cfg;
    const auto p = bin_probabilities(cfg);
    auto stream = rng_stream(3, 0);
    const auto toy = draw(cfg, stream);
    std::vector<double> t0(cfg.nbins), t1(cfg.nbins);
    for (std::size_t b = 0; b < cfg.nbins; ++b) {
      t0[b] = p.signal[b] * 1e12;
      t1[b] = p.background[b] * 1e12;
    }
    const TemplateModel m(uniform_edges(cfg.nbins, 0, 2), toy.data,
                          {{"s", from_counts(t0)}, {"b", from_counts(t1)}});
    const auto r = fit(CostFunction(Method::Approx, m));
    REQUIRE(r.converged);
    // observed Fisher information of the binned extended likelihood
    Eigen::Matrix2d info = Eigen::Matrix2d::Zero();
    for (std::size_t b = 0; b < cfg.nbins; ++b) {
      const double pb[] = {t0[b] / m.norms()[0], t1[b] / m.norms()[1]};
      const double mu = r.yields[0] * pb[0] + r.yields[1] * pb[1];
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) info(i, j) += toy.data.sumw(b) * pb[i] * pb[j] / (mu * mu);
    }
    const Eigen::Matrix2d cov = info.inverse();
    CHECK((*r.covariance)(0, 0) == doctest::Approx(cov(0, 0)).epsilon(0.02));
    CHECK((*r.covariance)(1, 1) == doctest::Approx(cov(1, 1)).epsilon(0.02));
    CHECK((*r.covariance)(0, 1) == doctest::Approx(cov(0, 1)).epsilon(0.02));
    CHECK(r.yield_errors[0] == doctest::Approx(std::sqrt((*r.covariance)(0, 0))));
  }
  SUBCASE("not positive definite") {
    auto f = [](std::span<const double> x) { return -(x[0] - 1) * (x[0] - 1); };
    const std::vector<double> lo{-10};
    const std::vector<double> at{1};
    CHECK(hessian(f, at, lo)(0, 0) < 0);
  }
}

TEST_CASE("exact and approximate fits agree for large templates") {
  ToyConfig cfg;
  cfg.n_mc = 10000;
  auto stream = rng_stream(5, 0);
  const auto m = to_model(cfg, draw(cfg, stream));
  const auto ra = fit(CostFunction(Method::Approx, m));
  const auto re = fit(CostFunction(Method::Exact, m));
  REQUIRE(ra.converged);
  REQUIRE(re.converged);
  // far-tail signal bins are empty at this template size and carry no slot
  CHECK(re.parameters.size() == 2 + exact_slots(m).size());
  for (int k = 0; k < 2; ++k) {
    CHECK((*re.covariance)(k, k) == doctest::Approx((*ra.covariance)(k, k)).epsilon(0.1));
    CHECK(re.yields[k] == doctest::Approx(ra.yields[k]).epsilon(0.01));
  }
  // approx fit lands within 5 sigma of the truth
  CHECK(std::abs(ra.yields[0] - 250) < 5 * ra.yield_errors[0]);
  CHECK(std::abs(ra.yields[1] - 750) < 5 * ra.yield_errors[1]);
}

TEST_CASE("default_start") {
  ToyConfig cfg;
  cfg.n_mc = 1000;
  auto stream = rng_stream(1, 0);
  const auto toy = draw(cfg, stream);
  const auto m = to_model(cfg, toy);
  const CostFunction approx(Method::Approx, m);
  const auto s = default_start(approx);
  REQUIRE(s.size() == 2);
  CHECK(s[0] == doctest::Approx(m.data().total() / 2));
  CHECK(s[1] == s[0]);
  const CostFunction exact(Method::Exact, m);
  const auto se = default_start(exact);
  CHECK(se.size() == 2 + exact.slots().size());
  for (std::size_t i = 2; i < se.size(); ++i) CHECK(se[i] == 1.0);

  const TemplateModel one({0, 1, 2}, from_counts(std::vector<double>{300, 700}),
                          {{"t", from_counts(std::vector<double>{1, 2})}});
  CHECK(default_start(CostFunction(Method::Approx, one))[0] == 1000);
}

TEST_CASE("chi-square survival function") {
  CHECK(chi2_sf(0, 13) == 1);
  CHECK(chi2_sf(13, 13) == doctest::Approx(0.4478116743194914).epsilon(1e-12));
  CHECK(chi2_sf(1e6, 13) < 1e-300);
  const double pts[][3] = {{1, 1, 0.31731050786291115},
                           {3.84, 1, 0.05004352124870519},
                           {20, 10, 0.029252688076961124},
                           {100, 80, 0.064570368921133},
                           {0.5, 3, 0.9188914116546758},
                           {200, 150, 0.003973185970821635}};
  for (const auto& p : pts) CHECK(chi2_sf(p[0], p[1]) == doctest::Approx(p[2]).epsilon(1e-11));
  // independent implementation across both branches of the evaluation
  for (double a : {0.5, 1.0, 2.5, 6.5, 40.0})
    for (double x : {0.01, 0.3, 1.0, 3.0, 7.0, 20.0, 60.0})
      CHECK(gamma_q(a, x) == doctest::Approx(boost::math::gamma_q(a, x)).epsilon(1e-10));
  CHECK_THROWS_AS(chi2_sf(1, 0), std::domain_error);

  FitResult r;
  r.ndof = 0;
  CHECK_FALSE(gof(r).has_value());
  r.ndof = 13;
  r.qmin = 13;
  CHECK(gof(r).value() == doctest::Approx(0.4478).epsilon(1e-4));
}
