#include "harmlens/counterfactual.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "harmlens/error.hpp"

namespace harmlens {
namespace {

const CounterfactualUser& require_user(const CounterfactualPopulation& pop,
                                       int user_id) {
  const auto* u = pop.find(user_id);
  if (u == nullptr) {
    throw Error(ErrorCode::kUnknownEntity,
                "unknown user " + std::to_string(user_id));
  }
  return *u;
}

// Canonical string form of a target value; throws on values the attribute
// cannot take.
std::string canonical_value(DemographicAttribute attribute,
                            std::string_view raw) {
  if (attribute == DemographicAttribute::kGender) {
    if (raw == "M" || raw == "F") return std::string(raw);
    throw Error(ErrorCode::kInvalidArgument,
                "gender target must be M or F, got '" + std::string(raw) +
                    "'");
  }
  int value = 0;
  const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), value);
  if (raw.empty() || ec != std::errc() || ptr != raw.data() + raw.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(to_string(attribute)) +
                    " target must be an integer code, got '" +
                    std::string(raw) + "'");
  }
  return std::to_string(value);
}

MatchResult make_result(const CounterfactualUser& query,
                        const CounterfactualUser& match, double distance,
                        int level) {
  MatchResult r;
  r.matched_user_id = match.user_id;
  r.distance = distance;
  r.matched_recommendations = match.recommendations;
  r.matched_profile = match.profile;
  r.query_profile = query.profile;
  r.relaxation_level = level;
  return r;
}

// Nearest candidate to `target` among users accepted by `accept`, ties to
// the lower id (users are scanned in ascending id order).
template <typename Accept>
const CounterfactualUser* nearest(const CounterfactualPopulation& pop,
                                  const CategoryDistribution& target,
                                  Accept&& accept, double& best_distance) {
  const CounterfactualUser* best = nullptr;
  best_distance = std::numeric_limits<double>::infinity();
  for (const auto& u : pop.users) {
    if (!accept(u)) continue;
    const double d = hellinger_distance(target, u.p);
    if (best == nullptr || d < best_distance) {
      best = &u;
      best_distance = d;
    }
  }
  return best;
}

}  // namespace

std::string_view to_string(CounterfactualKind kind) {
  return kind == CounterfactualKind::kDemographic ? "demographic"
                                                  : "preference";
}

std::string_view to_string(DemographicAttribute attribute) {
  switch (attribute) {
    case DemographicAttribute::kGender: return "gender";
    case DemographicAttribute::kAgeBracket: return "age_bracket";
    case DemographicAttribute::kOccupation: return "occupation";
  }
  return "unknown";
}

std::optional<CounterfactualKind> parse_counterfactual_kind(
    std::string_view s) {
  if (s == "demographic") return CounterfactualKind::kDemographic;
  if (s == "preference") return CounterfactualKind::kPreference;
  return std::nullopt;
}

std::optional<DemographicAttribute> parse_demographic_attribute(
    std::string_view s) {
  if (s == "gender") return DemographicAttribute::kGender;
  if (s == "age_bracket") return DemographicAttribute::kAgeBracket;
  if (s == "occupation") return DemographicAttribute::kOccupation;
  return std::nullopt;
}

const CounterfactualUser* CounterfactualPopulation::find(int user_id) const {
  const auto it = std::lower_bound(
      users.begin(), users.end(), user_id,
      [](const CounterfactualUser& u, int id) { return u.user_id < id; });
  if (it == users.end() || it->user_id != user_id) return nullptr;
  return &*it;
}

std::string attribute_value(const Demographics& d,
                            DemographicAttribute attribute) {
  switch (attribute) {
    case DemographicAttribute::kGender: return std::string(1, d.gender);
    case DemographicAttribute::kAgeBracket: return std::to_string(d.age_bracket);
    case DemographicAttribute::kOccupation: return std::to_string(d.occupation);
  }
  return {};
}

std::vector<DemographicAttribute> relaxation_order(
    DemographicAttribute treatment) {
  std::vector<DemographicAttribute> order;
  for (auto a : {DemographicAttribute::kOccupation,
                 DemographicAttribute::kAgeBracket,
                 DemographicAttribute::kGender}) {
    if (a != treatment) order.push_back(a);
  }
  return order;
}

MatchResult demographic_counterfactual(const CounterfactualQuery& query,
                                       const CounterfactualPopulation& pop) {
  if (query.kind != CounterfactualKind::kDemographic) {
    throw Error(ErrorCode::kInvalidArgument, "not a demographic query");
  }
  const auto& self = require_user(pop, query.user_id);
  const std::string target = canonical_value(query.attribute, query.target_value);
  if (attribute_value(self.demographics, query.attribute) == target) {
    throw Error(ErrorCode::kInvalidTreatment,
                "user already has " + std::string(to_string(query.attribute)) +
                    " = " + target);
  }

  // Level L keeps the non-treatment attributes past the first L in the
  // relaxation order.
  const auto order = relaxation_order(query.attribute);
  for (std::size_t level = 0; level <= order.size(); ++level) {
    const auto accept = [&](const CounterfactualUser& u) {
      if (u.user_id == self.user_id) return false;
      if (attribute_value(u.demographics, query.attribute) != target) {
        return false;
      }
      for (std::size_t a = level; a < order.size(); ++a) {
        if (attribute_value(u.demographics, order[a]) !=
            attribute_value(self.demographics, order[a])) {
          return false;
        }
      }
      return true;
    };
    double distance = 0.0;
    if (const auto* match = nearest(pop, self.p, accept, distance)) {
      return make_result(self, *match, distance, static_cast<int>(level));
    }
  }
  throw Error(ErrorCode::kNoMatch,
              "no user with " + std::string(to_string(query.attribute)) +
                  " = " + target);
}

CategoryDistribution shift_preference(const CategoryDistribution& p,
                                      std::size_t category, double delta) {
  if (category >= p.size()) {
    throw Error(ErrorCode::kInvalidArgument, "category out of range");
  }
  if (!std::isfinite(delta)) {
    throw Error(ErrorCode::kInvalidShift, "delta must be finite");
  }
  std::vector<double> shifted(p.mass().begin(), p.mass().end());
  shifted[category] = std::max(0.0, shifted[category] + delta);
  double sum = 0.0;
  for (double x : shifted) sum += x;
  if (!(sum > 0.0)) {
    throw Error(ErrorCode::kInvalidShift,
                "shifted preference has no remaining mass");
  }
  return CategoryDistribution::normalized(std::move(shifted));
}

MatchResult preference_counterfactual(const CounterfactualQuery& query,
                                      const CounterfactualPopulation& pop) {
  if (query.kind != CounterfactualKind::kPreference) {
    throw Error(ErrorCode::kInvalidArgument, "not a preference query");
  }
  const auto& self = require_user(pop, query.user_id);
  const auto it = std::find(pop.genre_catalog.begin(), pop.genre_catalog.end(),
                            query.category);
  if (it == pop.genre_catalog.end()) {
    throw Error(ErrorCode::kInvalidArgument,
                "unknown category '" + query.category + "'");
  }
  const auto target = shift_preference(
      self.p, static_cast<std::size_t>(it - pop.genre_catalog.begin()),
      query.delta);
  const auto accept = [&](const CounterfactualUser& u) {
    if (u.user_id == self.user_id) return false;
    return !query.require_same_demographics ||
           u.demographics == self.demographics;
  };
  double distance = 0.0;
  if (const auto* match = nearest(pop, target, accept, distance)) {
    return make_result(self, *match, distance, 0);
  }
  throw Error(ErrorCode::kNoMatch, "no candidate users");
}

MatchResult run_counterfactual(const CounterfactualQuery& query,
                               const CounterfactualPopulation& pop) {
  return query.kind == CounterfactualKind::kDemographic
             ? demographic_counterfactual(query, pop)
             : preference_counterfactual(query, pop);
}

}  // namespace harmlens
