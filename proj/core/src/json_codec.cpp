#include "json_codec.hpp"

#include "harmlens/error.hpp"

namespace harmlens::json_codec {

json to_json(const CategoryDistribution& d) {
  return json(std::vector<double>(d.mass().begin(), d.mass().end()));
}

CategoryDistribution distribution_from_json(const json& j) {
  return CategoryDistribution::from_mass(j.get<std::vector<double>>());
}

json to_json(const HarmProfile& h) {
  return {{"user_id", h.user_id},     {"mc", h.mc},
          {"st", h.st},               {"fb", h.fb},
          {"dv_actual", h.dv_actual}, {"dv_predicted", h.dv_predicted}};
}

HarmProfile profile_from_json(const json& j) {
  HarmProfile h;
  h.user_id = j.at("user_id").get<int>();
  h.mc = j.at("mc").get<double>();
  h.st = j.at("st").get<double>();
  h.fb = j.at("fb").get<double>();
  h.dv_actual = j.at("dv_actual").get<double>();
  h.dv_predicted = j.at("dv_predicted").get<double>();
  return h;
}

json to_json(const GlyphSpec& g) {
  return {{"user_id", g.user_id},
          {"sun_radius", g.sun_radius},
          {"moon_radius", g.moon_radius},
          {"ring_thickness", g.ring_thickness},
          {"inner_color_value", g.inner_color_value},
          {"stereotype_angle", g.stereotype_angle},
          {"stereotype_value", g.stereotype_value},
          {"is_prototype", g.is_prototype}};
}

GlyphSpec glyph_from_json(const json& j) {
  GlyphSpec g;
  g.user_id = j.at("user_id").get<int>();
  g.sun_radius = j.at("sun_radius").get<double>();
  g.moon_radius = j.at("moon_radius").get<double>();
  g.ring_thickness = j.at("ring_thickness").get<double>();
  g.inner_color_value = j.at("inner_color_value").get<double>();
  g.stereotype_angle = j.at("stereotype_angle").get<double>();
  g.stereotype_value = j.at("stereotype_value").get<double>();
  g.is_prototype = j.at("is_prototype").get<bool>();
  return g;
}

json to_json(const HarmSummary& s) {
  return {{"min", s.min},
          {"max", s.max},
          {"mean", s.mean},
          {"median", s.median},
          {"histogram",
           {{"lo", s.histogram.lo},
            {"hi", s.histogram.hi},
            {"counts", s.histogram.counts}}}};
}

HarmSummary summary_from_json(const json& j) {
  HarmSummary s;
  s.min = j.at("min").get<double>();
  s.max = j.at("max").get<double>();
  s.mean = j.at("mean").get<double>();
  s.median = j.at("median").get<double>();
  const auto& h = j.at("histogram");
  s.histogram.lo = h.at("lo").get<double>();
  s.histogram.hi = h.at("hi").get<double>();
  s.histogram.counts = h.at("counts").get<std::vector<std::size_t>>();
  return s;
}

std::string_view to_string(DivergenceForm form) {
  return form == DivergenceForm::kSymmetrizedKl ? "symmetrized_kl"
                                                : "js_midpoint";
}

DivergenceForm parse_divergence_form(std::string_view s) {
  if (s == "symmetrized_kl") return DivergenceForm::kSymmetrizedKl;
  if (s == "js_midpoint") return DivergenceForm::kJensenShannonMidpoint;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown divergence form '" + std::string(s) + "'");
}

json to_json(const PopulationStats& p) {
  return {{"mean_actual", to_json(p.mean_actual)},
          {"mean_predicted", to_json(p.mean_predicted)},
          {"system_mc", p.system_mc},
          {"num_users", p.num_users},
          {"mc", to_json(p.mc)},
          {"st", to_json(p.st)},
          {"fb", to_json(p.fb)},
          {"options",
           {{"alpha", p.options.alpha},
            {"eps", p.options.eps},
            {"form", to_string(p.options.form)},
            {"histogram_bins", p.options.histogram_bins}}}};
}

PopulationStats population_from_json(const json& j) {
  PopulationStats p;
  p.mean_actual = distribution_from_json(j.at("mean_actual"));
  p.mean_predicted = distribution_from_json(j.at("mean_predicted"));
  p.system_mc = j.at("system_mc").get<double>();
  p.num_users = j.at("num_users").get<std::size_t>();
  p.mc = summary_from_json(j.at("mc"));
  p.st = summary_from_json(j.at("st"));
  p.fb = summary_from_json(j.at("fb"));
  const auto& o = j.at("options");
  p.options.alpha = o.at("alpha").get<double>();
  p.options.eps = o.at("eps").get<double>();
  p.options.form = parse_divergence_form(o.at("form").get<std::string>());
  p.options.histogram_bins = o.at("histogram_bins").get<int>();
  return p;
}

json to_json(const Point2& p) { return json::array({p.x, p.y}); }

Point2 point_from_json(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

json to_json(const Demographics& d) {
  return {{"gender", std::string(1, d.gender)},
          {"age_bracket", d.age_bracket},
          {"occupation", d.occupation}};
}

Demographics demographics_from_json(const json& j) {
  Demographics d;
  const auto g = j.at("gender").get<std::string>();
  if (g != "M" && g != "F") {
    throw Error(ErrorCode::kSnapshotCorrupt, "bad gender '" + g + "'");
  }
  d.gender = g.front();
  d.age_bracket = j.at("age_bracket").get<int>();
  d.occupation = j.at("occupation").get<int>();
  return d;
}

json to_json(const RankedList& list, const std::vector<ItemInfo>& items) {
  json out = json::array();
  for (const auto& s : list.items) {
    const auto& info = items.at(s.item);
    out.push_back(
        {{"item_id", info.item_id}, {"title", info.title}, {"score", s.score}});
  }
  return out;
}

json named_distribution(const CategoryDistribution& d,
                        const std::vector<std::string>& genres) {
  json out = json::object();
  for (std::size_t c = 0; c < d.size() && c < genres.size(); ++c) {
    out[genres[c]] = d[c];
  }
  return out;
}

}  // namespace harmlens::json_codec
