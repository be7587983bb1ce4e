#pragma once

#include "json.hpp"
#include "sb/benchmarks.hpp"
#include "sb/covariance.hpp"
#include "sb/estimators.hpp"
#include "sb/mrp.hpp"
#include "sb/rootsa.hpp"
#include "sb/subgraph_select.hpp"
#include "sb/variance_estimation.hpp"

namespace sb {

nlohmann::json to_json(const Vector& v);
nlohmann::json to_json(const Matrix& m);
nlohmann::json to_json(const ValidationReport& r);
nlohmann::json to_json(const HorizonProfile& p);
nlohmann::json to_json(const CovarianceReport& r);
nlohmann::json to_json(const EstimateResult& r);
nlohmann::json to_json(const RootSaConfig& c);
nlohmann::json to_json(const RootSaResult& r);
nlohmann::json to_json(const VarianceEstimate& v, bool include_powers = false);
nlohmann::json to_json(const SelectionResult& r);
nlohmann::json to_json(const MrpFamily& f);

}  // namespace sb
