// JSON forms of the domain types shared by the snapshot files and the HTTP
// API. Internal to the core library.
#pragma once

#include <json.hpp>

#include "harmlens/counterfactual.hpp"
#include "harmlens/harms.hpp"
#include "harmlens/snapshot.hpp"
#include "harmlens/space.hpp"

namespace harmlens::json_codec {

using nlohmann::json;

json to_json(const CategoryDistribution& d);
CategoryDistribution distribution_from_json(const json& j);

json to_json(const HarmProfile& h);
HarmProfile profile_from_json(const json& j);

json to_json(const GlyphSpec& g);
GlyphSpec glyph_from_json(const json& j);

json to_json(const HarmSummary& s);
HarmSummary summary_from_json(const json& j);

json to_json(const PopulationStats& p);
PopulationStats population_from_json(const json& j);

json to_json(const Point2& p);
Point2 point_from_json(const json& j);

json to_json(const Demographics& d);
Demographics demographics_from_json(const json& j);

/// Ranked list with original item ids looked up in `items`.
json to_json(const RankedList& list, const std::vector<ItemInfo>& items);

/// Genre name -> mass object, for readability in API responses.
json named_distribution(const CategoryDistribution& d,
                        const std::vector<std::string>& genres);

std::string_view to_string(DivergenceForm form);
DivergenceForm parse_divergence_form(std::string_view s);

}  // namespace harmlens::json_codec
