#include "harmlens/service.hpp"

#include <httplib.h>

#include <charconv>
#include <set>

#include "harmlens/error.hpp"
#include "json_codec.hpp"

namespace harmlens {
namespace {

using json_codec::json;

constexpr std::string_view kHarmNames[] = {"miscalibration", "stereotype",
                                           "filter_bubble"};

HttpResponse ok(const json& body) { return {200, body.dump() + "\n"}; }

HttpResponse error_response(int status, std::string_view code,
                            const std::string& message,
                            const json& fields = nullptr) {
  json err = {{"code", code}, {"message", message}};
  if (!fields.is_null()) err["fields"] = fields;
  return {status, json{{"error", err}}.dump() + "\n"};
}

std::optional<int> parse_id(std::string_view s) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    return std::nullopt;
  }
  return value;
}

double single_harm_value(const GlyphSpec& g, std::string_view harm) {
  if (harm == "miscalibration") return g.inner_color_value;
  if (harm == "stereotype") return g.stereotype_value;
  return g.ring_thickness;
}

json demographics_json(const Demographics& d) { return json_codec::to_json(d); }

json side_json(const UserRecord& u, const Snapshot& s) {
  return {{"user_id", u.user_id},
          {"demographics", demographics_json(u.demographics)},
          {"p", json_codec::named_distribution(u.p, s.genre_catalog)},
          {"q", json_codec::named_distribution(u.q, s.genre_catalog)},
          {"profile", json_codec::to_json(u.profile)},
          {"glyph", json_codec::to_json(u.glyph)},
          {"recommendations", json_codec::to_json(u.recommendations, s.items)}};
}

// Reads a query from `body`, collecting per-field problems in `fields`.
std::optional<CounterfactualQuery> parse_query(const json& body,
                                               json& fields) {
  CounterfactualQuery q;
  if (!body.is_object()) {
    fields["body"] = "must be a JSON object";
    return std::nullopt;
  }
  if (!body.contains("user_id")) {
    fields["user_id"] = "required";
  } else if (!body["user_id"].is_number_integer()) {
    fields["user_id"] = "must be an integer";
  } else {
    q.user_id = body["user_id"].get<int>();
  }

  std::optional<CounterfactualKind> kind;
  if (!body.contains("kind")) {
    fields["kind"] = "required";
  } else if (!body["kind"].is_string() ||
             !(kind = parse_counterfactual_kind(
                   body["kind"].get<std::string>()))) {
    fields["kind"] = "must be \"demographic\" or \"preference\"";
  }

  if (kind == CounterfactualKind::kDemographic) {
    q.kind = *kind;
    std::optional<DemographicAttribute> attribute;
    if (!body.contains("attribute")) {
      fields["attribute"] = "required";
    } else if (!body["attribute"].is_string() ||
               !(attribute = parse_demographic_attribute(
                     body["attribute"].get<std::string>()))) {
      fields["attribute"] =
          "must be \"gender\", \"age_bracket\" or \"occupation\"";
    } else {
      q.attribute = *attribute;
    }
    if (!body.contains("target_value")) {
      fields["target_value"] = "required";
    } else if (body["target_value"].is_string()) {
      q.target_value = body["target_value"].get<std::string>();
    } else if (body["target_value"].is_number_integer()) {
      q.target_value = std::to_string(body["target_value"].get<long long>());
    } else {
      fields["target_value"] = "must be a string or integer";
    }
  } else if (kind == CounterfactualKind::kPreference) {
    q.kind = *kind;
    if (!body.contains("category")) {
      fields["category"] = "required";
    } else if (!body["category"].is_string()) {
      fields["category"] = "must be a genre name";
    } else {
      q.category = body["category"].get<std::string>();
    }
    if (!body.contains("delta")) {
      fields["delta"] = "required";
    } else if (!body["delta"].is_number()) {
      fields["delta"] = "must be a number";
    } else {
      q.delta = body["delta"].get<double>();
    }
    if (body.contains("require_same_demographics")) {
      if (!body["require_same_demographics"].is_boolean()) {
        fields["require_same_demographics"] = "must be a boolean";
      } else {
        q.require_same_demographics =
            body["require_same_demographics"].get<bool>();
      }
    }
  }
  if (!fields.empty()) return std::nullopt;
  return q;
}

json query_json(const CounterfactualQuery& q) {
  json j = {{"user_id", q.user_id}, {"kind", to_string(q.kind)}};
  if (q.kind == CounterfactualKind::kDemographic) {
    j["attribute"] = to_string(q.attribute);
    j["target_value"] = q.target_value;
  } else {
    j["category"] = q.category;
    j["delta"] = q.delta;
    j["require_same_demographics"] = q.require_same_demographics;
  }
  return j;
}

}  // namespace

Api::Api(Snapshot snapshot)
    : snapshot_(std::move(snapshot)),
      population_(snapshot_.counterfactual_population()) {}

HttpResponse Api::get_meta() const {
  const auto& s = snapshot_;
  const auto& st = s.stats;
  return ok({{"format_version", s.manifest.format_version},
             {"dataset_hash", s.manifest.dataset_hash},
             {"config", s.manifest.config},
             {"seeds", s.manifest.seeds},
             {"created_at", s.manifest.created_at},
             {"content_hashes", s.manifest.content_hashes},
             {"genres", s.genre_catalog},
             {"harms", kHarmNames},
             {"users", s.users.size()},
             {"prototypes", s.clustering.medoid_user_ids},
             {"projection", to_string(s.embedding.method)},
             {"stats",
              {{"raw_ratings", st.raw_ratings},
               {"interactions", st.interactions},
               {"users", st.users},
               {"items", st.items},
               {"genres", st.genres},
               {"train_interactions", st.train_interactions},
               {"test_interactions", st.test_interactions},
               {"test_auc", st.test_auc}}}});
}

HttpResponse Api::get_space(std::optional<std::string_view> mode,
                            std::optional<std::string_view> harm) const {
  const std::string_view m = mode.value_or("glyph");
  if (m != "glyph" && m != "single_harm") {
    return error_response(400, "bad_request",
                          "mode must be glyph or single_harm",
                          {{"mode", "unknown mode '" + std::string(m) + "'"}});
  }
  if (harm && std::find(std::begin(kHarmNames), std::end(kHarmNames), *harm) ==
                  std::end(kHarmNames)) {
    return error_response(
        400, "bad_request", "unknown harm '" + std::string(*harm) + "'",
        {{"harm", "must be miscalibration, stereotype or filter_bubble"}});
  }
  if (m == "single_harm" && !harm) {
    return error_response(400, "bad_request",
                          "single_harm mode requires a harm parameter",
                          {{"harm", "required"}});
  }
  const std::set<int> prototypes(snapshot_.clustering.medoid_user_ids.begin(),
                                 snapshot_.clustering.medoid_user_ids.end());
  json points = json::array();
  for (const auto& u : snapshot_.users) {
    json p = {{"user_id", u.user_id},
              {"x", u.coords.x},
              {"y", u.coords.y},
              {"cluster", u.cluster},
              {"is_prototype", prototypes.contains(u.user_id)}};
    if (m == "glyph") {
      p["glyph"] = json_codec::to_json(u.glyph);
    } else {
      p["value"] = single_harm_value(u.glyph, *harm);
    }
    points.push_back(std::move(p));
  }
  json body = {{"mode", m},
               {"points", points},
               {"mean_point",
                {{"x", snapshot_.embedding.mean_actual_coord.x},
                 {"y", snapshot_.embedding.mean_actual_coord.y}}},
               {"mean_predicted_point",
                {{"x", snapshot_.embedding.mean_predicted_coord.x},
                 {"y", snapshot_.embedding.mean_predicted_coord.y}}}};
  body["harm"] = harm ? json(*harm) : json(nullptr);
  return ok(body);
}

HttpResponse Api::get_user(std::string_view user_id) const {
  const auto id = parse_id(user_id);
  if (!id) {
    return error_response(400, "bad_request", "user id must be an integer",
                          {{"user_id", "not an integer"}});
  }
  const auto* u = snapshot_.find_user(*id);
  if (u == nullptr) {
    return error_response(404, "not_found",
                          "unknown user " + std::to_string(*id));
  }
  json deltas = json::array();
  for (std::size_t c = 0; c < snapshot_.genre_catalog.size(); ++c) {
    const double d = u->q[c] - u->p[c];
    deltas.push_back(
        {{"genre", snapshot_.genre_catalog[c]},
         {"delta", d},
         {"direction", d > 0.0 ? "inflated" : d < 0.0 ? "deflated"
                                                       : "unchanged"}});
  }
  json body = side_json(*u, snapshot_);
  body["genre_deltas"] = deltas;
  body["cluster"] = u->cluster;
  body["prototype_user_id"] =
      snapshot_.clustering.medoid_user_ids.at(static_cast<std::size_t>(u->cluster));
  body["coords"] = {{"x", u->coords.x}, {"y", u->coords.y}};
  return ok(body);
}

HttpResponse Api::get_harm_distribution() const {
  const auto& pop = snapshot_.population;
  return ok({{"users", snapshot_.users.size()},
             {"system_mc", pop.system_mc},
             {"harms",
              {{"miscalibration", json_codec::to_json(pop.mc)},
               {"stereotype", json_codec::to_json(pop.st)},
               {"filter_bubble", json_codec::to_json(pop.fb)}}}});
}

HttpResponse Api::post_counterfactual(std::string_view body) const {
  json parsed;
  try {
    parsed = json::parse(body);
  } catch (const json::exception&) {
    return error_response(400, "invalid_json", "request body is not JSON");
  }
  json fields = json::object();
  const auto query = parse_query(parsed, fields);
  if (!query) {
    return error_response(400, "validation_error", "invalid counterfactual query",
                          fields);
  }
  try {
    const auto match = run_counterfactual(*query, population_);
    const auto* self = snapshot_.find_user(query->user_id);
    const auto* other = snapshot_.find_user(match.matched_user_id);
    return ok({{"status", "matched"},
               {"query", query_json(*query)},
               {"match",
                {{"matched_user_id", match.matched_user_id},
                 {"distance", match.distance},
                 {"relaxation_level", match.relaxation_level},
                 {"query_profile", json_codec::to_json(match.query_profile)},
                 {"matched_profile", json_codec::to_json(match.matched_profile)},
                 {"matched_recommendations",
                  json_codec::to_json(match.matched_recommendations,
                                      snapshot_.items)},
                 {"query_user", side_json(*self, snapshot_)},
                 {"matched_user", side_json(*other, snapshot_)}}}});
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::kNoMatch:
        return ok({{"status", "no_match"},
                   {"query", query_json(*query)},
                   {"message", e.what()}});
      case ErrorCode::kUnknownEntity:
        return error_response(404, "not_found", e.what(),
                              {{"user_id", "unknown user"}});
      case ErrorCode::kInvalidTreatment:
        return error_response(400, "invalid_treatment", e.what(),
                              {{"target_value", e.what()}});
      case ErrorCode::kInvalidShift:
        return error_response(400, "invalid_shift", e.what(),
                              {{"delta", e.what()}});
      case ErrorCode::kInvalidArgument: {
        const char* field = query->kind == CounterfactualKind::kDemographic
                                ? "target_value"
                                : "category";
        return error_response(400, "validation_error", e.what(),
                              {{field, e.what()}});
      }
      default:
        return error_response(500, "internal", e.what());
    }
  }
}

struct Server::Impl {
  explicit Impl(const Api& a) : api(a) {}

  const Api& api;
  httplib::Server http;
};

namespace {

void reply(httplib::Response& res, const HttpResponse& r) {
  res.status = r.status;
  res.set_content(r.body, r.content_type);
}

std::optional<std::string> param(const httplib::Request& req,
                                 const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  return req.get_param_value(name);
}

}  // namespace

Server::Server(const Api& api, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>(api)) {
  auto& http = impl_->http;
  const Api* a = &api;
  http.Get("/api/meta", [a](const httplib::Request&, httplib::Response& res) {
    reply(res, a->get_meta());
  });
  http.Get("/api/space", [a](const httplib::Request& req,
                             httplib::Response& res) {
    const auto mode = param(req, "mode");
    const auto harm = param(req, "harm");
    reply(res, a->get_space(mode, harm));
  });
  http.Get(R"(/api/users/([^/]+))",
           [a](const httplib::Request& req, httplib::Response& res) {
             reply(res, a->get_user(req.matches[1].str()));
           });
  http.Get("/api/harms/distribution",
           [a](const httplib::Request&, httplib::Response& res) {
             reply(res, a->get_harm_distribution());
           });
  http.Post("/api/counterfactual",
            [a](const httplib::Request& req, httplib::Response& res) {
              reply(res, a->post_counterfactual(req.body));
            });
  if (static_dir && !static_dir->empty()) {
    http.set_mount_point("/", static_dir->string());
  }
}

Server::~Server() = default;

int Server::bind(const std::string& host, int port) {
  auto& http = impl_->http;
  if (port == 0) {
    const int bound = http.bind_to_any_port(host);
    if (bound < 0) {
      throw Error(ErrorCode::kInvalidArgument, "cannot bind " + host);
    }
    return bound;
  }
  if (!http.bind_to_port(host, port)) {
    throw Error(ErrorCode::kInvalidArgument,
                "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void Server::listen() { impl_->http.listen_after_bind(); }

void Server::stop() { impl_->http.stop(); }

}  // namespace harmlens
