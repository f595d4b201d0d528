#pragma once

// Pseudo-experiments for a two-component toy: a normal signal peak on a
// truncated exponential background. Data and both templates are drawn bin by
// bin from Poisson distributions around analytic bin expectations.

#include <cstdint>
#include <random>
#include <vector>

#include "bbfit/data_model.hpp"

namespace bbfit {

struct ToyConfig {
  double signal_yield = 250;
  double background_yield = 750;
  double signal_mean = 1.0;
  double signal_sigma = 0.1;
  double background_slope = 1.0;  // density proportional to exp(-slope x)
  double range_lo = 0.0;
  double range_hi = 2.0;
  std::size_t nbins = 15;
  std::size_t n_mc = 100;  // expected template entries per component
  std::uint64_t seed = 1;

  // Throws std::invalid_argument.
  void validate() const;
};

struct BinProbabilities {
  std::vector<double> signal;
  std::vector<double> background;
};

// Probability of each bin under the signal and background densities, both
// truncated to [range_lo, range_hi].
BinProbabilities bin_probabilities(const ToyConfig& config);

// Deterministic random stream for one toy. Streams for distinct toy indices
// start from unrelated states of a 64-bit Mersenne Twister.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t toy_index);

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  std::uint64_t poisson(double mean);

 private:
  std::uint64_t poisson_inversion(double mean);
  std::uint64_t poisson_ptrs(double mean);

  std::mt19937_64 engine_;
};

RngStream rng_stream(std::uint64_t seed, std::uint64_t toy_index);

struct ToyDraw {
  BinnedSample data;
  std::vector<BinnedSample> templates;  // signal, background
  double truth_signal;
  double truth_background;
};

// Data first, then the signal template, then the background template, all in
// bin order.
ToyDraw draw(const ToyConfig& config, RngStream& stream);

// Throws std::invalid_argument when a template came out empty.
TemplateModel to_model(const ToyConfig& config, const ToyDraw& toy);

}  // namespace bbfit
