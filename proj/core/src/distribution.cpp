#include "harmlens/distribution.hpp"

#include <cmath>
#include <numeric>

#include "harmlens/error.hpp"

namespace harmlens {

CategoryDistribution CategoryDistribution::from_mass(std::vector<double> mass) {
  if (mass.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "distribution has no categories");
  }
  double sum = 0.0;
  for (double m : mass) {
    if (!std::isfinite(m) || m < 0.0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "distribution entries must be finite and non-negative");
    }
    sum += m;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw Error(ErrorCode::kInvalidArgument,
                "distribution does not sum to 1 (sum=" + std::to_string(sum) +
                    ")");
  }
  return CategoryDistribution(std::move(mass));
}

CategoryDistribution CategoryDistribution::normalized(
    std::vector<double> weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "weights must be finite and non-negative");
    }
    sum += w;
  }
  if (!(sum > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "weights sum to zero");
  }
  for (double& w : weights) w /= sum;
  return CategoryDistribution(std::move(weights));
}

CategoryDistribution CategoryDistribution::uniform(std::size_t size) {
  if (size == 0) {
    throw Error(ErrorCode::kInvalidArgument, "distribution has no categories");
  }
  return CategoryDistribution(
      std::vector<double>(size, 1.0 / static_cast<double>(size)));
}

CategoryDistribution CategoryDistribution::one_hot(std::size_t size,
                                                   std::size_t index) {
  if (index >= size) {
    throw Error(ErrorCode::kInvalidArgument, "one-hot index out of range");
  }
  std::vector<double> mass(size, 0.0);
  mass[index] = 1.0;
  return CategoryDistribution(std::move(mass));
}

CategoryDistribution mean_distribution(
    std::span<const CategoryDistribution> distributions) {
  if (distributions.empty()) {
    throw Error(ErrorCode::kInsufficientData, "mean of zero distributions");
  }
  const std::size_t n = distributions.front().size();
  std::vector<double> sum(n, 0.0);
  for (const auto& d : distributions) {
    if (d.size() != n) {
      throw Error(ErrorCode::kInvalidArgument,
                  "distributions differ in size");
    }
    for (std::size_t c = 0; c < n; ++c) sum[c] += d[c];
  }
  const double count = static_cast<double>(distributions.size());
  for (double& s : sum) s /= count;
  return CategoryDistribution::from_mass(std::move(sum));
}

double hellinger_distance(const CategoryDistribution& p,
                          const CategoryDistribution& q) {
  if (p.size() != q.size()) {
    throw Error(ErrorCode::kInvalidArgument, "distributions differ in size");
  }
  double acc = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    const double d = std::sqrt(p[c]) - std::sqrt(q[c]);
    acc += d * d;
  }
  return std::sqrt(0.5 * acc);
}

}  // namespace harmlens
