#include "harmlens/space.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "harmlens/error.hpp"

namespace harmlens {
namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

double normalize_range(double v, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  return clamp01((v - lo) / (hi - lo));
}

// Makes the largest-|loading| entry positive; the first index wins ties.
void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < v.size(); ++k) {
    if (std::abs(v[k]) > std::abs(v[best])) best = k;
  }
  if (v[best] < 0.0) v = -v;
}

}  // namespace

std::string_view to_string(ProjectionMethod method) {
  switch (method) {
    case ProjectionMethod::kHellingerPca: return "hellinger_pca";
    case ProjectionMethod::kExternal: return "external";
  }
  return "unknown";
}

ProjectionMethod parse_projection_method(std::string_view name) {
  if (name == "hellinger_pca") return ProjectionMethod::kHellingerPca;
  if (name == "external") return ProjectionMethod::kExternal;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown projection method '" + std::string(name) + "'");
}

std::vector<Point2> project_2d(std::span<const CategoryDistribution> points,
                               ProjectionMethod method, std::uint64_t /*seed*/) {
  if (points.size() < 2) {
    throw Error(ErrorCode::kInsufficientData,
                "projection needs at least 2 points");
  }
  if (method == ProjectionMethod::kExternal) {
    throw Error(ErrorCode::kInvalidArgument,
                "external projections are loaded, not computed");
  }
  const auto n = static_cast<Eigen::Index>(points.size());
  const auto dim = static_cast<Eigen::Index>(points.front().size());
  Eigen::MatrixXd x(n, dim);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& p = points[static_cast<std::size_t>(r)];
    if (static_cast<Eigen::Index>(p.size()) != dim) {
      throw Error(ErrorCode::kInvalidArgument, "distributions differ in size");
    }
    for (Eigen::Index c = 0; c < dim; ++c) {
      x(r, c) = std::sqrt(p[static_cast<std::size_t>(c)]);
    }
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::MatrixXd cov = x.transpose() * x;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);

  // Eigenvalues come back ascending.
  Eigen::MatrixXd axes = Eigen::MatrixXd::Zero(dim, 2);
  for (Eigen::Index a = 0; a < std::min<Eigen::Index>(2, dim); ++a) {
    axes.col(a) = eig.eigenvectors().col(dim - 1 - a);
    fix_sign(axes.col(a));
  }
  const Eigen::MatrixXd projected = x * axes;
  std::vector<Point2> out(points.size());
  for (Eigen::Index r = 0; r < n; ++r) {
    out[static_cast<std::size_t>(r)] = {projected(r, 0), projected(r, 1)};
  }
  return out;
}

UserEmbedding embed_users(std::span<const int> user_ids,
                          std::span<const CategoryDistribution> distributions,
                          const CategoryDistribution& mean_actual,
                          const CategoryDistribution& mean_predicted,
                          ProjectionMethod method, std::uint64_t seed) {
  if (user_ids.size() != distributions.size()) {
    throw Error(ErrorCode::kInvalidArgument, "user ids are not aligned");
  }
  std::vector<CategoryDistribution> points(distributions.begin(),
                                           distributions.end());
  points.push_back(mean_actual);
  points.push_back(mean_predicted);
  const auto coords = project_2d(points, method, seed);

  UserEmbedding e;
  e.method = method;
  e.seed = seed;
  for (std::size_t u = 0; u < user_ids.size(); ++u) {
    e.coords[user_ids[u]] = coords[u];
  }
  e.mean_actual_coord = coords[user_ids.size()];
  e.mean_predicted_coord = coords[user_ids.size() + 1];
  return e;
}

Clustering pam(std::span<const int> ids, int k, const DistanceFn& distance) {
  const std::size_t n = ids.size();
  if (k < 1 || static_cast<std::size_t>(k) > n) {
    throw Error(ErrorCode::kInvalidK, "k must be in [1, " +
                                          std::to_string(n) + "], got " +
                                          std::to_string(k));
  }
  const auto kk = static_cast<std::size_t>(k);
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // Positions in ascending id order, so that scanning candidates in this
  // order and keeping strict improvements breaks ties by lowest id.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });

  std::vector<std::size_t> medoids;
  std::vector<char> is_medoid(n, 0);
  std::vector<double> dnear(n, kInf);

  // BUILD
  {
    std::size_t best = order.front();
    double best_total = kInf;
    for (auto c : order) {
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) total += distance(c, j);
      if (total < best_total) {
        best_total = total;
        best = c;
      }
    }
    medoids.push_back(best);
    is_medoid[best] = 1;
    for (std::size_t j = 0; j < n; ++j) dnear[j] = distance(best, j);
  }
  while (medoids.size() < kk) {
    std::size_t best = n;
    double best_gain = -1.0;
    for (auto c : order) {
      if (is_medoid[c]) continue;
      double gain = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        gain += std::max(0.0, dnear[j] - distance(c, j));
      }
      if (gain > best_gain) {
        best_gain = gain;
        best = c;
      }
    }
    medoids.push_back(best);
    is_medoid[best] = 1;
    for (std::size_t j = 0; j < n; ++j) {
      dnear[j] = std::min(dnear[j], distance(best, j));
    }
  }

  std::vector<std::size_t> near(n, 0);
  std::vector<double> dsecond(n, kInf);
  const auto assign = [&]() {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double d1 = kInf;
      double d2 = kInf;
      std::size_t s1 = 0;
      for (std::size_t s = 0; s < kk; ++s) {
        const double d = distance(medoids[s], j);
        if (d < d1) {
          d2 = d1;
          d1 = d;
          s1 = s;
        } else if (d < d2) {
          d2 = d;
        }
      }
      near[j] = s1;
      dnear[j] = d1;
      dsecond[j] = d2;
      total += d1;
    }
    return total;
  };

  Clustering out;
  out.k = k;
  double total = assign();
  out.deviation_trace.push_back(total);

  // SWAP: apply the best improving exchange until none improves.
  std::vector<double> extra(kk);
  while (true) {
    double best_delta = 0.0;
    std::size_t best_candidate = n;
    std::size_t best_slot = 0;
    for (auto c : order) {
      if (is_medoid[c]) continue;
      std::fill(extra.begin(), extra.end(), 0.0);
      double shared = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double d = distance(c, j);
        const double keep = std::min(dnear[j], d) - dnear[j];
        const double lose = std::min(dsecond[j], d) - dnear[j];
        shared += keep;
        extra[near[j]] += lose - keep;
      }
      for (std::size_t s = 0; s < kk; ++s) {
        const double delta = shared + extra[s];
        if (delta < best_delta) {
          best_delta = delta;
          best_candidate = c;
          best_slot = s;
        }
      }
    }
    const double tolerance = 1e-12 * std::max(1.0, total);
    if (best_candidate == n || !(best_delta < -tolerance)) break;
    is_medoid[medoids[best_slot]] = 0;
    medoids[best_slot] = best_candidate;
    is_medoid[best_candidate] = 1;
    total = assign();
    out.deviation_trace.push_back(total);
  }

  std::sort(medoids.begin(), medoids.end(),
            [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
  out.total_deviation = assign();
  for (auto m : medoids) out.medoid_user_ids.push_back(ids[m]);
  for (std::size_t j = 0; j < n; ++j) {
    out.assignment[ids[j]] = static_cast<int>(near[j]);
  }
  return out;
}

Clustering k_medoids(std::span<const int> user_ids,
                     std::span<const CategoryDistribution> distributions,
                     int k, std::uint64_t /*seed*/) {
  if (user_ids.size() != distributions.size()) {
    throw Error(ErrorCode::kInvalidArgument, "user ids are not aligned");
  }
  if (distributions.empty()) {
    throw Error(ErrorCode::kInvalidK, "no points to cluster");
  }
  const std::size_t dim = distributions.front().size();
  std::vector<double> roots(distributions.size() * dim);
  for (std::size_t u = 0; u < distributions.size(); ++u) {
    if (distributions[u].size() != dim) {
      throw Error(ErrorCode::kInvalidArgument, "distributions differ in size");
    }
    for (std::size_t c = 0; c < dim; ++c) {
      roots[u * dim + c] = std::sqrt(distributions[u][c]);
    }
  }
  return pam(user_ids, k, [&](std::size_t a, std::size_t b) {
    const double* x = roots.data() + a * dim;
    const double* y = roots.data() + b * dim;
    double acc = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
      const double d = x[c] - y[c];
      acc += d * d;
    }
    return std::sqrt(0.5 * acc);
  });
}

GlyphSpec glyph_params(const HarmProfile& profile, const PopulationStats& pop,
                       const UserEmbedding& embedding,
                       const GlyphConfig& config, bool is_prototype) {
  const auto it = embedding.coords.find(profile.user_id);
  if (it == embedding.coords.end()) {
    throw Error(ErrorCode::kUnknownEntity,
                "user " + std::to_string(profile.user_id) +
                    " has no coordinates");
  }
  const double max_diversity =
      pop.mean_actual.size() > 1
          ? std::log(static_cast<double>(pop.mean_actual.size()))
          : 0.0;
  const auto radius = [&](double diversity) {
    const double t =
        max_diversity > 0.0 ? clamp01(diversity / max_diversity) : 0.0;
    return config.min_radius + (config.max_radius - config.min_radius) * t;
  };

  GlyphSpec g;
  g.user_id = profile.user_id;
  g.sun_radius = radius(profile.dv_actual);
  g.moon_radius = radius(profile.dv_predicted);
  g.ring_thickness =
      normalize_range(std::max(0.0, -profile.fb), std::max(0.0, -pop.fb.max),
                      std::max(0.0, -pop.fb.min));
  g.inner_color_value = normalize_range(profile.mc, pop.mc.min, pop.mc.max);
  const double st_scale = std::max(std::abs(pop.st.min), std::abs(pop.st.max));
  g.stereotype_value =
      st_scale > 0.0 ? std::clamp(profile.st / st_scale, -1.0, 1.0) : 0.0;
  const Point2 at = it->second;
  g.stereotype_angle = std::atan2(embedding.mean_actual_coord.y - at.y,
                                  embedding.mean_actual_coord.x - at.x);
  g.is_prototype = is_prototype;
  return g;
}

}  // namespace harmlens
