#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "bbfit/study.hpp"

using namespace bbfit;

namespace {

PullRecord rec(Method m, std::size_t n_mc, std::size_t i, double z, bool conv = true) {
  return {m, n_mc, i, 250 + z, 1.0, z, 13.0, conv};
}

}  // namespace

TEST_CASE("run_study record layout") {
  StudyOptions o;
  o.n_mc_grid = {100};
  o.n_toys = 1;
  o.methods = {Method::Approx};
  CHECK(run_study(o).size() == 1);

  o.n_mc_grid = {100, 500};
  o.n_toys = 3;
  o.methods = {Method::Conway, Method::Approx};
  const auto r = run_study(o);
  REQUIRE(r.size() == 12);
  CHECK(r[0].method == Method::Conway);
  CHECK(r[0].n_mc == 100);
  CHECK(r[3].n_mc == 500);
  CHECK(r[5].toy_index == 2);
  CHECK(r[6].method == Method::Approx);
  for (const auto& x : r) {
    CHECK(x.converged == std::isfinite(x.pull));
  }

  o.n_toys = 0;
  CHECK_THROWS_AS(run_study(o), std::invalid_argument);
}

TEST_CASE("parallel and serial ensembles are identical") {
  StudyOptions o;
  o.n_mc_grid = {50, 200};
  o.n_toys = 6;
  o.methods = {Method::Approx, Method::Conway, Method::Exact};
  o.base.seed = 7;
  const auto serial = run_study_serial(o);
  for (int jobs : {1, 3}) {
    o.jobs = jobs;
    const auto par = run_study(o);
    std::ostringstream a, b;
    write_records_csv(a, serial);
    write_records_csv(b, par);
    CHECK(a.str() == b.str());
  }
}

TEST_CASE("methods see the same toy regardless of the requested set") {
  ToyConfig cfg;
  cfg.n_mc = 200;
  cfg.seed = 3;
  const Method all[] = {Method::Exact, Method::Conway, Method::Approx};
  const Method one[] = {Method::Approx};
  const auto a = fit_toy(cfg, 4, all);
  const auto b = fit_toy(cfg, 4, one);
  CHECK(a[2].signal_estimate == b[0].signal_estimate);
  CHECK(a[2].qmin == b[0].qmin);
}

TEST_CASE("empty templates give non-converged records") {
  ToyConfig cfg;
  cfg.n_mc = 0;
  const Method m[] = {Method::Approx};
  const auto r = fit_toy(cfg, 0, m);
  REQUIRE(r.size() == 1);
  CHECK_FALSE(r[0].converged);
  CHECK(std::isnan(r[0].pull));
}

TEST_CASE("summarize") {
  SUBCASE("all zero pulls") {
    std::vector<PullRecord> r;
    for (int i = 0; i < 5; ++i) r.push_back(rec(Method::Approx, 100, i, 0));
    const auto s = summarize(r);
    REQUIRE(s.size() == 1);
    CHECK(s[0].moments->mean_z == 0);
    CHECK(s[0].moments->std_z == 0);
  }
  SUBCASE("two points") {
    const std::vector<PullRecord> r{rec(Method::Approx, 100, 0, -1), rec(Method::Approx, 100, 1, 1)};
    const auto s = summarize(r);
    CHECK(s[0].moments->mean_z == 0);
    CHECK(s[0].moments->std_z == doctest::Approx(std::sqrt(2.0)));
    CHECK(s[0].moments->sem_mean == doctest::Approx(1.0));
    CHECK(s[0].moments->sem_std == doctest::Approx(std::sqrt(2.0) / 2));
  }
  SUBCASE("standard normal pulls") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    std::vector<PullRecord> r;
    for (int i = 0; i < 1000; ++i) r.push_back(rec(Method::Exact, 10, i, g(rng)));
    const auto s = summarize(r);
    CHECK(std::abs(s[0].moments->mean_z) < 3 / std::sqrt(1000.0));
    CHECK(std::abs(s[0].moments->std_z - 1) < 3 / std::sqrt(2000.0));
  }
  SUBCASE("grouping, ordering and exclusion") {
    std::vector<PullRecord> r{rec(Method::Exact, 50, 0, 1), rec(Method::Exact, 50, 1, 2),
                              rec(Method::Approx, 500, 0, 1), rec(Method::Approx, 500, 1, 3),
                              rec(Method::Approx, 500, 2, 100, false),
                              rec(Method::Approx, 50, 0, 0.5)};
    const auto s = summarize(r);
    REQUIRE(s.size() == 3);
    CHECK(s[0].method == Method::Approx);
    CHECK(s[0].n_mc == 50);
    CHECK_FALSE(s[0].moments.has_value());  // one fit only
    CHECK(s[1].n_mc == 500);
    CHECK(s[1].n_total == 3);
    CHECK(s[1].n_converged == 2);
    CHECK(s[1].moments->mean_z == 2);
    CHECK(s[2].method == Method::Exact);
  }
  CHECK_THROWS_AS(summarize(std::vector<PullRecord>{}), std::invalid_argument);
}

TEST_CASE("csv formats") {
  const std::vector<PullRecord> r{rec(Method::Approx, 100, 0, 0.123456789123),
                                  {Method::Exact, 100, 1, NAN, NAN, NAN, NAN, false}};
  std::ostringstream os;
  write_records_csv(os, r);
  CHECK(os.str() ==
        "method,n_mc,toy_index,signal_estimate,signal_error,pull,qmin,converged\n"
        "approx,100,0,250.123457,1,0.123456789,13,1\n"
        "exact,100,1,nan,nan,nan,nan,0\n");
  std::ostringstream ss;
  write_summary_csv(ss, summarize(r));
  CHECK(ss.str() ==
        "method,n_mc,n_converged,mean_z,sem_mean,std_z,sem_std\n"
        "approx,100,1,nan,nan,nan,nan\n"
        "exact,100,0,nan,nan,nan,nan\n");
}

TEST_CASE("bench") {
  ToyConfig cfg;
  auto s = rng_stream(1, 0);
  const auto m = to_model(cfg, draw(cfg, s));
  const Method all[] = {Method::Approx, Method::Conway};
  const auto rows = bench(m, all, 3, 1);
  REQUIRE(rows.size() == 2);
  double fastest = 1e9;
  for (const auto& r : rows) {
    CHECK(r.ratio >= 1.0);
    fastest = std::min(fastest, r.ratio);
  }
  CHECK(fastest == 1.0);
  const Method one[] = {Method::Approx};
  CHECK(bench(m, one, 3, 0)[0].ratio == 1.0);
  CHECK_THROWS_AS(bench(m, one, 2), std::invalid_argument);
}
