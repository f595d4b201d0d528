#pragma once

// Histogram-shaped containers for data and Monte-Carlo templates.
//
// A BinnedSample stores, per bin, the sum of weights and the sum of squared
// weights. Unweighted samples have sumw2 == sumw. Bin edges are only kept on
// the TemplateModel for I/O and toy generation; none of the likelihoods use
// edge values.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace bbfit {

class BinnedSample {
 public:
  // Throws std::invalid_argument when the invariants do not hold:
  // equal nonzero lengths, finite nonnegative entries, sumw == 0 => sumw2 == 0.
  BinnedSample(std::vector<double> sumw, std::vector<double> sumw2);

  static BinnedSample from_counts(std::span<const double> counts);

  std::size_t nbins() const { return sumw_.size(); }
  std::span<const double> sumw() const { return sumw_; }
  std::span<const double> sumw2() const { return sumw2_; }
  double sumw(std::size_t bin) const { return sumw_[bin]; }
  double sumw2(std::size_t bin) const { return sumw2_[bin]; }
  double total() const;

  // True if every bin has sumw2 == sumw, i.e. the sample is compatible with
  // unit weights.
  bool is_unweighted() const;

 private:
  std::vector<double> sumw_;
  std::vector<double> sumw2_;
};

BinnedSample from_counts(std::span<const double> counts);

struct EffectiveCount {
  double n_eff;  // (sum w)^2 / sum w^2
  double s;      // sum w / sum w^2
};

// Empty bins (sumw2 == 0) map to n_eff = 0, s = 1.
EffectiveCount effective(double sumw, double sumw2);
EffectiveCount effective(const BinnedSample& sample, std::size_t bin);

struct Component {
  std::string name;
  BinnedSample sample;
};

class TemplateModel {
 public:
  TemplateModel(std::vector<double> edges, BinnedSample data,
                std::vector<Component> components);

  std::size_t nbins() const { return data_.nbins(); }
  std::size_t ncomponents() const { return components_.size(); }
  std::span<const double> edges() const { return edges_; }
  const BinnedSample& data() const { return data_; }
  const std::vector<Component>& components() const { return components_; }
  const BinnedSample& component(std::size_t k) const {
    return components_[k].sample;
  }
  // M_k, the sum over bins of the template sumw.
  std::span<const double> norms() const { return norms_; }

  // Sum over components of the template sumw in one bin.
  double pooled_sumw(std::size_t bin) const;
  double pooled_sumw2(std::size_t bin) const;

  // Number of bins where at least one template is nonzero; the other bins
  // carry no information on the yields and are excluded from every cost.
  std::size_t active_bins() const;

  bool is_unweighted() const;

 private:
  std::vector<double> edges_;
  BinnedSample data_;
  std::vector<Component> components_;
  std::vector<double> norms_;
};

// sum_k y_k a_k[bin] / M_k
double mu0(const TemplateModel& model, std::span<const double> yields,
           std::size_t bin);

// Uniform edges over [lo, hi].
std::vector<double> uniform_edges(std::size_t nbins, double lo, double hi);

}  // namespace bbfit
