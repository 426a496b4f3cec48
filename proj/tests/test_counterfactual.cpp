#include <doctest.h>

#include "harmlens/counterfactual.hpp"
#include "harmlens/error.hpp"
#include "support/cf_agreement.hpp"
#include "support/fixtures.hpp"

using namespace harmlens;
using fixtures::dist;

namespace {

CounterfactualUser user(int id, Demographics d, CategoryDistribution p) {
  CounterfactualUser u;
  u.user_id = id;
  u.demographics = d;
  u.p = std::move(p);
  u.profile.user_id = id;
  return u;
}

ErrorCode code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kInvalidArgument;
}

CounterfactualQuery demographic(int id, DemographicAttribute a, std::string v) {
  CounterfactualQuery q;
  q.user_id = id;
  q.kind = CounterfactualKind::kDemographic;
  q.attribute = a;
  q.target_value = std::move(v);
  return q;
}

CounterfactualQuery preference(int id, std::string category, double delta,
                               bool same = false) {
  CounterfactualQuery q;
  q.user_id = id;
  q.kind = CounterfactualKind::kPreference;
  q.category = std::move(category);
  q.delta = delta;
  q.require_same_demographics = same;
  return q;
}

}  // namespace

TEST_CASE("demographic fixture picks the nearer counterpart") {
  CounterfactualPopulation pop;
  pop.genre_catalog = {"Action", "Drama"};
  pop.users = {user(1, {'F', 25, 4}, dist({0.8, 0.2})),
               user(2, {'M', 25, 4}, dist({0.75, 0.25})),
               user(3, {'M', 25, 4}, dist({0.2, 0.8}))};
  const auto r = run_counterfactual(
      demographic(1, DemographicAttribute::kGender, "M"), pop);
  CHECK(r.matched_user_id == 2);
  CHECK(r.relaxation_level == 0);
  CHECK(r.distance == doctest::Approx(hellinger_distance(pop.users[0].p, pop.users[1].p)));
  CHECK(r.query_profile.user_id == 1);
  CHECK(r.matched_profile.user_id == 2);

  CHECK(code_of([&] {
          run_counterfactual(demographic(1, DemographicAttribute::kGender, "F"), pop);
        }) == ErrorCode::kInvalidTreatment);
  CHECK(code_of([&] {
          run_counterfactual(demographic(1, DemographicAttribute::kAgeBracket, "56"), pop);
        }) == ErrorCode::kNoMatch);
  CHECK(code_of([&] {
          run_counterfactual(demographic(42, DemographicAttribute::kGender, "M"), pop);
        }) == ErrorCode::kUnknownEntity);
  CHECK(code_of([&] {
          run_counterfactual(demographic(1, DemographicAttribute::kGender, "X"), pop);
        }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("relaxation drops occupation first, then age") {
  CounterfactualPopulation pop;
  pop.genre_catalog = {"A", "B"};
  pop.users = {user(1, {'F', 25, 4}, dist({0.5, 0.5})),
               user(2, {'M', 35, 4}, dist({0.5, 0.5})),   // age differs
               user(3, {'M', 25, 9}, dist({0.1, 0.9}))};  // occupation differs
  const auto r = run_counterfactual(
      demographic(1, DemographicAttribute::kGender, "M"), pop);
  CHECK(r.matched_user_id == 3);
  CHECK(r.relaxation_level == 1);

  pop.users.erase(pop.users.begin() + 2);
  const auto r2 = run_counterfactual(
      demographic(1, DemographicAttribute::kGender, "M"), pop);
  CHECK(r2.matched_user_id == 2);
  CHECK(r2.relaxation_level == 2);

  CHECK(relaxation_order(DemographicAttribute::kGender) ==
        std::vector{DemographicAttribute::kOccupation, DemographicAttribute::kAgeBracket});
  CHECK(relaxation_order(DemographicAttribute::kOccupation) ==
        std::vector{DemographicAttribute::kAgeBracket, DemographicAttribute::kGender});
}

TEST_CASE("preference shift") {
  SUBCASE("fixture") {
    CounterfactualPopulation pop;
    pop.genre_catalog = {"Sci-Fi", "Drama"};
    pop.users = {user(1, {'F', 25, 4}, dist({0.1, 0.9})),
                 user(2, {'M', 18, 1}, dist({0.05, 0.95})),
                 user(3, {'M', 56, 2}, dist({0.3, 0.7}))};
    const auto shifted = shift_preference(pop.users[0].p, 0, 0.3);
    CHECK(shifted[0] == doctest::Approx(0.4 / 1.3).epsilon(1e-15));
    CHECK(shifted[1] == doctest::Approx(0.9 / 1.3).epsilon(1e-15));
    CHECK(run_counterfactual(preference(1, "Sci-Fi", 0.3), pop).matched_user_id == 3);
    // No shift: globally nearest other user.
    CHECK(run_counterfactual(preference(1, "Sci-Fi", 0.0), pop).matched_user_id == 2);
    CHECK(code_of([&] { run_counterfactual(preference(1, "Western", 0.1), pop); }) ==
          ErrorCode::kInvalidArgument);
    CHECK(code_of([&] { run_counterfactual(preference(1, "Sci-Fi", 0.1, true), pop); }) ==
          ErrorCode::kNoMatch);
  }
  SUBCASE("clamp then renormalize") {
    const auto s = shift_preference(dist({0.1, 0.3, 0.6}), 0, -1.0);
    CHECK(s[0] == 0.0);
    CHECK(s[1] == doctest::Approx(1.0 / 3));
    CHECK(s[2] == doctest::Approx(2.0 / 3));
  }
  SUBCASE("all mass removed") {
    CHECK(code_of([] { shift_preference(dist({1.0, 0.0}), 0, -2.0); }) ==
          ErrorCode::kInvalidShift);
  }
}

TEST_CASE("matcher agrees with brute force on 200 random queries") {
  const auto r = fixtures::counterfactual_agreement(77, 200);
  for (const auto& m : r.mismatches) CHECK_MESSAGE(false, m);
  CHECK(r.agree == 200);
  // The fixture exercises every relaxation level.
  CHECK(r.levels_seen[0] > 0);
  CHECK(r.levels_seen[1] > 0);
  CHECK(r.levels_seen[2] > 0);
  MESSAGE("relaxation levels used: " << r.levels_seen[0] << "/" << r.levels_seen[1]
                                     << "/" << r.levels_seen[2]);
}
