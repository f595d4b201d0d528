#include "bbfit/io.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace bbfit {

using nlohmann::json;

namespace {

std::vector<double> number_array(const json& j, const std::string& where) {
  if (!j.is_array()) throw std::invalid_argument(where + " must be an array");
  std::vector<double> v;
  v.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number())
      throw std::invalid_argument(where + " must contain only numbers");
    v.push_back(x.get<double>());
  }
  return v;
}

BinnedSample sample_from_json(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("sumw"))
    throw std::invalid_argument(where + " must be an object with \"sumw\"");
  auto sumw = number_array(j["sumw"], where + ".sumw");
  auto sumw2 = j.contains("sumw2") ? number_array(j["sumw2"], where + ".sumw2")
                                   : sumw;
  try {
    return BinnedSample(std::move(sumw), std::move(sumw2));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(where + ": " + e.what());
  }
}

json sample_to_json(const BinnedSample& s) {
  return {{"sumw", std::vector<double>(s.sumw().begin(), s.sumw().end())},
          {"sumw2", std::vector<double>(s.sumw2().begin(), s.sumw2().end())}};
}

}  // namespace

TemplateModel model_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("input must be a JSON object");
  for (const char* key : {"bin_edges", "data", "templates"})
    if (!j.contains(key))
      throw std::invalid_argument(std::string("missing field \"") + key + "\"");
  auto edges = number_array(j["bin_edges"], "bin_edges");
  auto data = sample_from_json(j["data"], "data");
  const auto& tj = j["templates"];
  if (!tj.is_array() || tj.empty())
    throw std::invalid_argument("templates must be a nonempty array");
  std::vector<Component> comps;
  for (std::size_t k = 0; k < tj.size(); ++k) {
    const std::string where = "templates[" + std::to_string(k) + "]";
    std::string name = tj[k].contains("name") && tj[k]["name"].is_string()
                           ? tj[k]["name"].get<std::string>()
                           : "t" + std::to_string(k);
    comps.push_back({std::move(name), sample_from_json(tj[k], where)});
  }
  return TemplateModel(std::move(edges), std::move(data), std::move(comps));
}

json model_to_json(const TemplateModel& model) {
  json t = json::array();
  for (const auto& c : model.components()) {
    json e = sample_to_json(c.sample);
    e["name"] = c.name;
    t.push_back(std::move(e));
  }
  return {{"bin_edges",
           std::vector<double>(model.edges().begin(), model.edges().end())},
          {"data", sample_to_json(model.data())},
          {"templates", std::move(t)}};
}

json fit_result_to_json(const FitResult& r) {
  json j;
  j["yields"] = r.yields;
  j["errors"] = json::array();
  for (double e : r.yield_errors) {
    if (std::isfinite(e))
      j["errors"].push_back(e);
    else
      j["errors"].push_back(nullptr);
  }
  if (r.covariance) {
    json c = json::array();
    for (Eigen::Index i = 0; i < r.covariance->rows(); ++i) {
      json row = json::array();
      for (Eigen::Index k = 0; k < r.covariance->cols(); ++k)
        row.push_back((*r.covariance)(i, k));
      c.push_back(std::move(row));
    }
    j["covariance"] = std::move(c);
  } else {
    j["covariance"] = nullptr;
  }
  j["qmin"] = r.qmin;
  j["ndof"] = r.ndof;
  if (auto p = gof(r))
    j["p_value"] = *p;
  else
    j["p_value"] = nullptr;
  j["converged"] = r.converged;
  j["n_evaluations"] = r.n_evaluations;
  return j;
}

ToyConfig toy_config_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("toy config must be an object");
  ToyConfig c;
  auto num = [&](const char* key, double& field) {
    if (!j.contains(key)) return;
    if (!j[key].is_number())
      throw std::invalid_argument(std::string(key) + " must be a number");
    field = j[key].get<double>();
  };
  auto count = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_unsigned())
      throw std::invalid_argument(std::string(key) +
                                  " must be a nonnegative integer");
    field = j[key].get<std::remove_reference_t<decltype(field)>>();
  };
  num("signal_yield", c.signal_yield);
  num("background_yield", c.background_yield);
  num("signal_mean", c.signal_mean);
  num("signal_sigma", c.signal_sigma);
  num("background_slope", c.background_slope);
  if (j.contains("range")) {
    const auto r = number_array(j["range"], "range");
    if (r.size() != 2) throw std::invalid_argument("range must have two entries");
    c.range_lo = r[0];
    c.range_hi = r[1];
  }
  count("nbins", c.nbins);
  count("n_mc", c.n_mc);
  count("seed", c.seed);
  c.validate();
  return c;
}

json toy_config_to_json(const ToyConfig& c) {
  return {{"signal_yield", c.signal_yield},
          {"background_yield", c.background_yield},
          {"signal_mean", c.signal_mean},
          {"signal_sigma", c.signal_sigma},
          {"background_slope", c.background_slope},
          {"range", {c.range_lo, c.range_hi}},
          {"nbins", c.nbins},
          {"n_mc", c.n_mc},
          {"seed", c.seed}};
}

}  // namespace bbfit
