#include "bbfit/data_model.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace bbfit {

namespace {

void check_entries(std::span<const double> v, const char* what) {
  for (std::size_t b = 0; b < v.size(); ++b) {
    if (!std::isfinite(v[b]) || v[b] < 0) {
      throw std::invalid_argument(std::string(what) + "[" + std::to_string(b) +
                                  "] must be finite and nonnegative");
    }
  }
}

}  // namespace

BinnedSample::BinnedSample(std::vector<double> sumw, std::vector<double> sumw2)
    : sumw_(std::move(sumw)), sumw2_(std::move(sumw2)) {
  if (sumw_.empty()) throw std::invalid_argument("sample has zero bins");
  if (sumw_.size() != sumw2_.size())
    throw std::invalid_argument("sumw and sumw2 differ in length");
  check_entries(sumw_, "sumw");
  check_entries(sumw2_, "sumw2");
  for (std::size_t b = 0; b < sumw_.size(); ++b) {
    if (sumw_[b] == 0 && sumw2_[b] != 0)
      throw std::invalid_argument("sumw2[" + std::to_string(b) +
                                  "] must be zero where sumw is zero");
  }
}

BinnedSample BinnedSample::from_counts(std::span<const double> counts) {
  std::vector<double> c(counts.begin(), counts.end());
  return BinnedSample(c, c);
}

BinnedSample from_counts(std::span<const double> counts) {
  return BinnedSample::from_counts(counts);
}

double BinnedSample::total() const {
  return std::accumulate(sumw_.begin(), sumw_.end(), 0.0);
}

bool BinnedSample::is_unweighted() const { return sumw_ == sumw2_; }

EffectiveCount effective(double sumw, double sumw2) {
  if (sumw2 == 0) return {0.0, 1.0};
  // exact for unit weights: sumw == sumw2 gives (sumw, 1) without rounding
  if (sumw == sumw2) return {sumw, 1.0};
  return {sumw * sumw / sumw2, sumw / sumw2};
}

EffectiveCount effective(const BinnedSample& sample, std::size_t bin) {
  if (bin >= sample.nbins()) throw std::out_of_range("bin index out of range");
  return effective(sample.sumw(bin), sample.sumw2(bin));
}

TemplateModel::TemplateModel(std::vector<double> edges, BinnedSample data,
                             std::vector<Component> components)
    : edges_(std::move(edges)),
      data_(std::move(data)),
      components_(std::move(components)) {
  if (components_.empty())
    throw std::invalid_argument("model needs at least one template");
  if (edges_.size() != data_.nbins() + 1)
    throw std::invalid_argument("bin_edges must have nbins+1 entries");
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    if (!std::isfinite(edges_[i]))
      throw std::invalid_argument("bin_edges must be finite");
    if (i > 0 && !(edges_[i] > edges_[i - 1]))
      throw std::invalid_argument("bin_edges must be strictly increasing");
  }
  norms_.reserve(components_.size());
  for (const auto& c : components_) {
    if (c.sample.nbins() != data_.nbins())
      throw std::invalid_argument("template '" + c.name +
                                  "' has a different number of bins");
    const double m = c.sample.total();
    if (!(m > 0))
      throw std::invalid_argument("template '" + c.name + "' is empty");
    norms_.push_back(m);
  }
}

double TemplateModel::pooled_sumw(std::size_t bin) const {
  double a = 0;
  for (const auto& c : components_) a += c.sample.sumw(bin);
  return a;
}

double TemplateModel::pooled_sumw2(std::size_t bin) const {
  double a = 0;
  for (const auto& c : components_) a += c.sample.sumw2(bin);
  return a;
}

std::size_t TemplateModel::active_bins() const {
  std::size_t n = 0;
  for (std::size_t b = 0; b < nbins(); ++b)
    if (pooled_sumw(b) > 0) ++n;
  return n;
}

bool TemplateModel::is_unweighted() const {
  if (!data_.is_unweighted()) return false;
  for (const auto& c : components_)
    if (!c.sample.is_unweighted()) return false;
  return true;
}

double mu0(const TemplateModel& model, std::span<const double> yields,
           std::size_t bin) {
  const auto norms = model.norms();
  double mu = 0;
  for (std::size_t k = 0; k < model.ncomponents(); ++k)
    mu += yields[k] / norms[k] * model.component(k).sumw(bin);
  return mu;
}

std::vector<double> uniform_edges(std::size_t nbins, double lo, double hi) {
  if (nbins == 0) throw std::invalid_argument("nbins must be positive");
  if (!(lo < hi)) throw std::invalid_argument("range must satisfy lo < hi");
  std::vector<double> edges(nbins + 1);
  for (std::size_t i = 0; i <= nbins; ++i)
    edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(nbins);
  edges[nbins] = hi;
  return edges;
}

}  // namespace bbfit
