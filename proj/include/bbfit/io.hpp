#pragma once

// JSON encodings of models, fit results and toy configurations.
//
// Model schema:
//   {"bin_edges": [...nbins+1],
//    "data": {"sumw": [...], "sumw2": [...]},            sumw2 optional
//    "templates": [{"name": "...", "sumw": [...], "sumw2": [...]}, ...]}

#include <nlohmann/json.hpp>

#include "bbfit/optimizer.hpp"
#include "bbfit/toy.hpp"

namespace bbfit {

// Throws std::invalid_argument naming the offending field.
TemplateModel model_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const TemplateModel& model);

// {"yields", "errors", "covariance", "qmin", "ndof", "p_value", "converged",
//  "n_evaluations"}; covariance and p_value are null when undefined.
nlohmann::json fit_result_to_json(const FitResult& result);

// Missing fields keep their defaults. "range" is a two-element array.
ToyConfig toy_config_from_json(const nlohmann::json& j);
nlohmann::json toy_config_to_json(const ToyConfig& config);

}  // namespace bbfit
