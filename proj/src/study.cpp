#include "bbfit/study.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bbfit {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

PullRecord failed_record(Method m, std::size_t n_mc, std::size_t toy) {
  return {m, n_mc, toy, kNaN, kNaN, kNaN, kNaN, false};
}

std::string fmt9(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void check_options(const StudyOptions& o) {
  if (o.n_toys < 1) throw std::invalid_argument("n_toys must be >= 1");
  if (o.methods.empty()) throw std::invalid_argument("no methods requested");
  if (o.n_mc_grid.empty()) throw std::invalid_argument("empty n_mc grid");
  o.base.validate();
}

// Writes the records of one (grid point, toy) task into their fixed slots.
void run_task(const StudyOptions& o, std::size_t g, std::size_t toy,
              std::vector<PullRecord>& out) {
  ToyConfig cfg = o.base;
  cfg.n_mc = o.n_mc_grid[g];
  const auto recs = fit_toy(cfg, toy, o.methods, o.fit);
  const std::size_t ng = o.n_mc_grid.size();
  for (std::size_t m = 0; m < o.methods.size(); ++m)
    out[(m * ng + g) * o.n_toys + toy] = recs[m];
}

}  // namespace

std::vector<PullRecord> fit_toy(const ToyConfig& config, std::size_t toy_index,
                                std::span<const Method> methods,
                                const MinimizeOptions& options) {
  auto stream = rng_stream(config.seed, toy_index);
  const ToyDraw toy = draw(config, stream);
  std::vector<PullRecord> out;
  out.reserve(methods.size());
  std::optional<TemplateModel> model;
  try {
    model.emplace(to_model(config, toy));
  } catch (const std::invalid_argument&) {
    // an empty template cannot be fitted
  }
  for (Method m : methods) {
    if (!model) {
      out.push_back(failed_record(m, config.n_mc, toy_index));
      continue;
    }
    PullRecord r = failed_record(m, config.n_mc, toy_index);
    try {
      const FitResult fr = fit(CostFunction(m, *model), options);
      r.signal_estimate = fr.yields[0];
      r.signal_error = fr.yield_errors[0];
      r.qmin = fr.qmin;
      r.converged = fr.converged;
      if (fr.converged && r.signal_error > 0)
        r.pull = (r.signal_estimate - toy.truth_signal) / r.signal_error;
    } catch (const std::invalid_argument&) {
      // cost not finite at the start point; recorded as not converged
    }
    out.push_back(r);
  }
  return out;
}

std::vector<PullRecord> run_study_serial(const StudyOptions& o) {
  check_options(o);
  std::vector<PullRecord> out(o.methods.size() * o.n_mc_grid.size() * o.n_toys);
  for (std::size_t g = 0; g < o.n_mc_grid.size(); ++g)
    for (std::size_t t = 0; t < o.n_toys; ++t) run_task(o, g, t, out);
  return out;
}

std::vector<PullRecord> run_study(const StudyOptions& o) {
  check_options(o);
  std::vector<PullRecord> out(o.methods.size() * o.n_mc_grid.size() * o.n_toys);
  const auto ntasks = static_cast<long long>(o.n_mc_grid.size() * o.n_toys);
#ifdef _OPENMP
  const int threads = o.jobs > 0 ? o.jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#endif
  for (long long i = 0; i < ntasks; ++i) {
    const auto task = static_cast<std::size_t>(i);
    run_task(o, task / o.n_toys, task % o.n_toys, out);
  }
  return out;
}

std::vector<PullStats> summarize(std::span<const PullRecord> records) {
  if (records.empty()) throw std::invalid_argument("no records to summarize");
  struct Key {
    std::string method;
    std::size_t n_mc;
    bool operator<(const Key& o) const {
      return std::tie(method, n_mc) < std::tie(o.method, o.n_mc);
    }
  };
  struct Group {
    Method method;
    std::size_t n_total = 0;
    std::vector<double> z;
  };
  std::map<Key, Group> groups;
  for (const auto& r : records) {
    auto& g = groups[{std::string(method_name(r.method)), r.n_mc}];
    g.method = r.method;
    ++g.n_total;
    if (r.converged && std::isfinite(r.pull)) g.z.push_back(r.pull);
  }
  std::vector<PullStats> out;
  for (const auto& [key, g] : groups) {
    PullStats s{g.method, key.n_mc, g.n_total, g.z.size(), std::nullopt};
    const double n = static_cast<double>(g.z.size());
    if (g.z.size() >= 2) {
      double mean = 0;
      for (double z : g.z) mean += z;
      mean /= n;
      double ss = 0;
      for (double z : g.z) ss += (z - mean) * (z - mean);
      const double sd = std::sqrt(ss / (n - 1));
      s.moments = PullStats::Moments{mean, sd / std::sqrt(n), sd,
                                     sd / std::sqrt(2 * n)};
    }
    out.push_back(s);
  }
  return out;
}

void write_records_csv(std::ostream& os, std::span<const PullRecord> records) {
  os << "method,n_mc,toy_index,signal_estimate,signal_error,pull,qmin,converged\n";
  for (const auto& r : records) {
    os << method_name(r.method) << ',' << r.n_mc << ',' << r.toy_index << ','
       << fmt9(r.signal_estimate) << ',' << fmt9(r.signal_error) << ','
       << fmt9(r.pull) << ',' << fmt9(r.qmin) << ',' << (r.converged ? 1 : 0)
       << '\n';
  }
}

void write_summary_csv(std::ostream& os, std::span<const PullStats> stats) {
  os << "method,n_mc,n_converged,mean_z,sem_mean,std_z,sem_std\n";
  for (const auto& s : stats) {
    os << method_name(s.method) << ',' << s.n_mc << ',' << s.n_converged;
    if (s.moments) {
      os << ',' << fmt9(s.moments->mean_z) << ',' << fmt9(s.moments->sem_mean)
         << ',' << fmt9(s.moments->std_z) << ',' << fmt9(s.moments->sem_std);
    } else {
      os << ",nan,nan,nan,nan";
    }
    os << '\n';
  }
}

std::vector<BenchRow> bench(const TemplateModel& model,
                            std::span<const Method> methods,
                            std::size_t repetitions, std::size_t warmup,
                            const MinimizeOptions& options) {
  if (repetitions < 3) throw std::invalid_argument("repetitions must be >= 3");
  using clock = std::chrono::steady_clock;
  std::vector<BenchRow> rows;
  for (Method m : methods) {
    const CostFunction cost(m, model);
    for (std::size_t i = 0; i < warmup; ++i) (void)fit(cost, options);
    std::vector<double> t(repetitions);
    for (auto& ti : t) {
      const auto start = clock::now();
      const FitResult r = fit(cost, options);
      ti = std::chrono::duration<double>(clock::now() - start).count();
      (void)r;
    }
    std::nth_element(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(t.size() / 2), t.end());
    double med = t[t.size() / 2];
    if (t.size() % 2 == 0) {
      const double lower = *std::max_element(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(t.size() / 2));
      med = 0.5 * (med + lower);
    }
    rows.push_back({m, med, 1.0});
  }
  if (!rows.empty()) {
    const double fastest =
        std::min_element(rows.begin(), rows.end(), [](auto& a, auto& b) {
          return a.median_seconds < b.median_seconds;
        })->median_seconds;
    for (auto& r : rows) r.ratio = r.median_seconds / fastest;
  }
  return rows;
}

}  // namespace bbfit
