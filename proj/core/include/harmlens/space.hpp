#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "harmlens/distribution.hpp"
#include "harmlens/harms.hpp"

namespace harmlens {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

enum class ProjectionMethod { kHellingerPca, kExternal };

std::string_view to_string(ProjectionMethod method);
ProjectionMethod parse_projection_method(std::string_view name);

/// Projects each distribution to 2D. kHellingerPca maps p to sqrt(p) and
/// keeps the top two principal components; each component's
/// largest-magnitude loading is made positive (lowest index on ties).
/// Throws Error(kInsufficientData) for fewer than 2 points and
/// Error(kInvalidArgument) for kExternal, which has no built-in projection.
std::vector<Point2> project_2d(std::span<const CategoryDistribution> points,
                               ProjectionMethod method =
                                   ProjectionMethod::kHellingerPca,
                               std::uint64_t seed = 0);

struct UserEmbedding {
  std::map<int, Point2> coords;  // keyed by user id
  Point2 mean_actual_coord;      // projected population mean of p
  Point2 mean_predicted_coord;   // projected population mean of q
  ProjectionMethod method = ProjectionMethod::kHellingerPca;
  std::uint64_t seed = 0;
};

/// Projects the users' distributions together with the two population
/// means, which are appended as pseudo-points.
UserEmbedding embed_users(std::span<const int> user_ids,
                          std::span<const CategoryDistribution> distributions,
                          const CategoryDistribution& mean_actual,
                          const CategoryDistribution& mean_predicted,
                          ProjectionMethod method =
                              ProjectionMethod::kHellingerPca,
                          std::uint64_t seed = 0);

struct Clustering {
  int k = 0;
  std::vector<int> medoid_user_ids;  // ascending; cluster c has medoid c
  std::map<int, int> assignment;     // user id -> cluster index
  double total_deviation = 0.0;
  std::vector<double> deviation_trace;  // after BUILD, then after each swap
};

/// Distance between points a and b, by position.
using DistanceFn = std::function<double(std::size_t a, std::size_t b)>;

/// PAM over n = ids.size() points: greedy BUILD, then the best single
/// medoid/non-medoid swap while it strictly lowers the total deviation.
/// Equal gains go to the lowest candidate id. Throws Error(kInvalidK) unless
/// 1 <= k <= n.
Clustering pam(std::span<const int> ids, int k, const DistanceFn& distance);

/// PAM under the Hellinger distance. `seed` is recorded only; PAM itself is
/// deterministic.
Clustering k_medoids(std::span<const int> user_ids,
                     std::span<const CategoryDistribution> distributions,
                     int k, std::uint64_t seed = 0);

struct GlyphConfig {
  double min_radius = 2.0;
  double max_radius = 10.0;
};

struct GlyphSpec {
  int user_id = 0;
  double sun_radius = 0.0;         // from dv_actual
  double moon_radius = 0.0;        // from dv_predicted
  double ring_thickness = 0.0;     // normalized max(0, -fb), [0, 1]
  double inner_color_value = 0.0;  // normalized mc, [0, 1]
  double stereotype_angle = 0.0;   // radians, toward the projected mean of p
  double stereotype_value = 0.0;   // st / max |st|, [-1, 1]
  bool is_prototype = false;
};

/// Glyph encoding of one user's harms, normalized over the population
/// ranges in `pop`. A degenerate range normalizes to 0.
/// Throws Error(kUnknownEntity) if the user has no coordinates.
GlyphSpec glyph_params(const HarmProfile& profile, const PopulationStats& pop,
                       const UserEmbedding& embedding,
                       const GlyphConfig& config = {},
                       bool is_prototype = false);

}  // namespace harmlens
