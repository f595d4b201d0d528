#pragma once

// Ensembles of toy fits: pull records, pull statistics and fit timing.

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "bbfit/likelihood.hpp"
#include "bbfit/optimizer.hpp"
#include "bbfit/toy.hpp"

namespace bbfit {

struct PullRecord {
  Method method;
  std::size_t n_mc;
  std::size_t toy_index;
  double signal_estimate;
  double signal_error;
  double pull;  // NaN unless converged with a positive error
  double qmin;
  bool converged;
};

struct PullStats {
  Method method;
  std::size_t n_mc;
  std::size_t n_total;
  std::size_t n_converged;
  // Absent when fewer than two fits converged.
  struct Moments {
    double mean_z;
    double sem_mean;
    double std_z;
    double sem_std;
  };
  std::optional<Moments> moments;
};

struct StudyOptions {
  ToyConfig base;  // n_mc is overridden by the grid
  std::vector<std::size_t> n_mc_grid;
  std::size_t n_toys = 1;
  std::vector<Method> methods;
  int jobs = 0;  // 0: OpenMP default
  MinimizeOptions fit;
};

// Fits every method to the toy (seed, toy_index) at the given template size.
// The toy does not depend on which methods are requested.
std::vector<PullRecord> fit_toy(const ToyConfig& config, std::size_t toy_index,
                                std::span<const Method> methods,
                                const MinimizeOptions& options = {});

// Records are ordered by (method as given, n_mc as given, toy_index), so the
// output does not depend on the number of workers.
std::vector<PullRecord> run_study(const StudyOptions& options);

// Single-threaded reference for run_study.
std::vector<PullRecord> run_study_serial(const StudyOptions& options);

// Groups by (method name, n_mc) in ascending order. Throws
// std::invalid_argument on empty input.
std::vector<PullStats> summarize(std::span<const PullRecord> records);

void write_records_csv(std::ostream& os, std::span<const PullRecord> records);
void write_summary_csv(std::ostream& os, std::span<const PullStats> stats);

struct BenchRow {
  Method method;
  double median_seconds;
  double ratio;  // relative to the fastest method
};

// Median wall time of a full fit (minimization and covariance) per method on
// the same model, after `warmup` untimed fits. Throws std::invalid_argument
// for repetitions < 3.
std::vector<BenchRow> bench(const TemplateModel& model,
                            std::span<const Method> methods,
                            std::size_t repetitions = 11,
                            std::size_t warmup = 2,
                            const MinimizeOptions& options = {});

}  // namespace bbfit
