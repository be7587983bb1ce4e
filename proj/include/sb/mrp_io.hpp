#pragma once

#include <filesystem>

#include "json.hpp"
#include "sb/mrp.hpp"

namespace sb {

// {n_states, transitions: [[s, s', p]...], rewards: [{state, kind, params}...], initial: [[s, p]...]}
// kind/params: "deterministic" {value}, "uniform" {lo, hi}, "discrete" {values, probs}.
// Throws ParseError on malformed input and, when check is set, the validate() codes on model violations.
Mrp mrp_from_json(const nlohmann::json& spec, bool check = true);
nlohmann::json mrp_to_json(const Mrp& mrp);

Mrp load_mrp(const std::filesystem::path& path, bool check = true);
void save_mrp(const Mrp& mrp, const std::filesystem::path& path);

}  // namespace sb
