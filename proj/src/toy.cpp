#include "bbfit/toy.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace bbfit {

namespace {

// Probability mass of a standard normal between u < v, computed on the side
// of the distribution that avoids cancellation.
double normal_mass(double u, double v) {
  constexpr double r = 1.0 / std::numbers::sqrt2;
  if (u >= 0) return 0.5 * (std::erfc(u * r) - std::erfc(v * r));
  if (v <= 0) return 0.5 * (std::erfc(-v * r) - std::erfc(-u * r));
  return 1.0 - 0.5 * (std::erfc(-u * r) + std::erfc(v * r));
}

// Integral of exp(-slope x) over [lo, hi].
double exp_mass(double slope, double lo, double hi) {
  if (slope == 0) return hi - lo;
  return std::exp(-slope * lo) * -std::expm1(-slope * (hi - lo)) / slope;
}

}  // namespace

void ToyConfig::validate() const {
  if (nbins < 1) throw std::invalid_argument("nbins must be >= 1");
  if (!(range_lo < range_hi))
    throw std::invalid_argument("range must satisfy lo < hi");
  if (!(signal_sigma > 0))
    throw std::invalid_argument("signal_sigma must be > 0");
  if (!(signal_yield >= 0) || !(background_yield >= 0))
    throw std::invalid_argument("yields must be >= 0");
  if (!std::isfinite(signal_mean) || !std::isfinite(background_slope) ||
      !std::isfinite(signal_yield) || !std::isfinite(background_yield))
    throw std::invalid_argument("toy parameters must be finite");
}

BinProbabilities bin_probabilities(const ToyConfig& config) {
  config.validate();
  const auto edges = uniform_edges(config.nbins, config.range_lo, config.range_hi);
  const double mu = config.signal_mean;
  const double sigma = config.signal_sigma;
  const double lam = config.background_slope;
  const double sig_norm = normal_mass((config.range_lo - mu) / sigma,
                                      (config.range_hi - mu) / sigma);
  const double bkg_norm = exp_mass(lam, config.range_lo, config.range_hi);
  BinProbabilities p;
  p.signal.resize(config.nbins);
  p.background.resize(config.nbins);
  for (std::size_t b = 0; b < config.nbins; ++b) {
    const double lo = edges[b];
    const double hi = edges[b + 1];
    p.signal[b] = normal_mass((lo - mu) / sigma, (hi - mu) / sigma) / sig_norm;
    p.background[b] = exp_mass(lam, lo, hi) / bkg_norm;
  }
  return p;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t toy_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(toy_index),
                    static_cast<std::uint32_t>(toy_index >> 32),
                    0x62626669u};
  engine_.seed(seq);
}

RngStream rng_stream(std::uint64_t seed, std::uint64_t toy_index) {
  return RngStream(seed, toy_index);
}

double RngStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::poisson(double mean) {
  if (!(mean >= 0) || !std::isfinite(mean))
    throw std::invalid_argument("Poisson mean must be finite and >= 0");
  if (mean == 0) return 0;
  if (mean < 30) return poisson_inversion(mean);
  return poisson_ptrs(mean);
}

std::uint64_t RngStream::poisson_inversion(double mean) {
  const double u = uniform();
  double p = std::exp(-mean);
  double cdf = p;
  std::uint64_t k = 0;
  // the cap only matters if u lands in the last ~1e-16 of the tail
  while (u >= cdf && k < 1000) {
    ++k;
    p *= mean / static_cast<double>(k);
    cdf += p;
  }
  return k;
}

// Transformed rejection with squeeze (Hoermann 1993).
std::uint64_t RngStream::poisson_ptrs(double mean) {
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2);
  for (;;) {
    const double u = uniform() - 0.5;
    const double v = uniform();
    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
    if (k < 0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
        -mean + k * loglam - std::lgamma(k + 1))
      return static_cast<std::uint64_t>(k);
  }
}

ToyDraw draw(const ToyConfig& config, RngStream& stream) {
  const auto p = bin_probabilities(config);
  const std::size_t nb = config.nbins;
  std::vector<double> data(nb), sig(nb), bkg(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    const auto s = stream.poisson(config.signal_yield * p.signal[b]);
    const auto g = stream.poisson(config.background_yield * p.background[b]);
    data[b] = static_cast<double>(s + g);
  }
  const double n_mc = static_cast<double>(config.n_mc);
  for (std::size_t b = 0; b < nb; ++b)
    sig[b] = static_cast<double>(stream.poisson(n_mc * p.signal[b]));
  for (std::size_t b = 0; b < nb; ++b)
    bkg[b] = static_cast<double>(stream.poisson(n_mc * p.background[b]));
  return ToyDraw{from_counts(data),
                 {from_counts(sig), from_counts(bkg)},
                 config.signal_yield,
                 config.background_yield};
}

TemplateModel to_model(const ToyConfig& config, const ToyDraw& toy) {
  return TemplateModel(
      uniform_edges(config.nbins, config.range_lo, config.range_hi), toy.data,
      {Component{"signal", toy.templates.at(0)},
       Component{"background", toy.templates.at(1)}});
}

}  // namespace bbfit
