#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "harmlens/distribution.hpp"
#include "harmlens/harms.hpp"
#include "harmlens/ingest.hpp"
#include "harmlens/recommender.hpp"

namespace harmlens {

enum class CounterfactualKind { kDemographic, kPreference };
enum class DemographicAttribute { kGender, kAgeBracket, kOccupation };

std::string_view to_string(CounterfactualKind kind);
std::string_view to_string(DemographicAttribute attribute);
std::optional<CounterfactualKind> parse_counterfactual_kind(std::string_view s);
std::optional<DemographicAttribute> parse_demographic_attribute(
    std::string_view s);

struct CounterfactualQuery {
  int user_id = 0;
  CounterfactualKind kind = CounterfactualKind::kDemographic;
  // demographic
  DemographicAttribute attribute = DemographicAttribute::kGender;
  std::string target_value;  // "M"/"F" for gender, integer code otherwise
  // preference
  std::string category;
  double delta = 0.0;
  bool require_same_demographics = false;
};

/// What the matcher knows about one user. `recommendations` holds item
/// indices of the population's item table.
struct CounterfactualUser {
  int user_id = 0;
  Demographics demographics;
  CategoryDistribution p;
  HarmProfile profile;
  RankedList recommendations;
};

struct CounterfactualPopulation {
  std::vector<CounterfactualUser> users;  // ascending user_id
  std::vector<std::string> genre_catalog;

  const CounterfactualUser* find(int user_id) const;
};

struct MatchResult {
  int matched_user_id = 0;
  double distance = 0.0;  // Hellinger
  RankedList matched_recommendations;
  HarmProfile matched_profile;
  HarmProfile query_profile;
  int relaxation_level = 0;  // non-treatment attributes dropped
};

/// Value of `attribute` for `d`, in the string form used by queries.
std::string attribute_value(const Demographics& d,
                            DemographicAttribute attribute);

/// Non-treatment attributes in the order they are relaxed: occupation, then
/// age bracket, then gender, skipping the treatment.
std::vector<DemographicAttribute> relaxation_order(
    DemographicAttribute treatment);

/// Nearest user (Hellinger on p, ties to the lower id) among those with
/// `attribute == target_value` and equal remaining demographics; constraints
/// are dropped one at a time while no candidate exists.
/// Errors: kUnknownEntity, kInvalidArgument (bad target value),
/// kInvalidTreatment (target equals the user's value), kNoMatch.
MatchResult demographic_counterfactual(const CounterfactualQuery& query,
                                       const CounterfactualPopulation& pop);

/// p' = normalize(max(0, p + delta * e_category)); the nearest other user to
/// p', optionally restricted to identical demographics.
/// Errors: kUnknownEntity, kInvalidArgument (unknown category),
/// kInvalidShift (p' is all zero), kNoMatch.
MatchResult preference_counterfactual(const CounterfactualQuery& query,
                                      const CounterfactualPopulation& pop);

/// Shifted preference used by preference_counterfactual().
CategoryDistribution shift_preference(const CategoryDistribution& p,
                                      std::size_t category, double delta);

/// Dispatches on query.kind.
MatchResult run_counterfactual(const CounterfactualQuery& query,
                               const CounterfactualPopulation& pop);

}  // namespace harmlens
