#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace harmlens {

/// Probability vector over item categories (genres). Entries are
/// non-negative and sum to one within kSumTolerance.
class CategoryDistribution {
 public:
  static constexpr double kSumTolerance = 1e-9;

  CategoryDistribution() = default;

  /// Validates `mass` as-is. Throws Error(kInvalidArgument) if an entry is
  /// negative or non-finite, or the sum is off by more than kSumTolerance.
  static CategoryDistribution from_mass(std::vector<double> mass);

  /// Scales non-negative weights to sum to one. Throws if all are zero.
  static CategoryDistribution normalized(std::vector<double> weights);

  static CategoryDistribution uniform(std::size_t size);
  static CategoryDistribution one_hot(std::size_t size, std::size_t index);

  std::size_t size() const noexcept { return mass_.size(); }
  bool empty() const noexcept { return mass_.empty(); }
  double operator[](std::size_t c) const { return mass_[c]; }
  std::span<const double> mass() const noexcept { return mass_; }

  friend bool operator==(const CategoryDistribution&,
                         const CategoryDistribution&) = default;

 private:
  explicit CategoryDistribution(std::vector<double> mass)
      : mass_(std::move(mass)) {}

  std::vector<double> mass_;
};

/// Unweighted arithmetic mean of equally sized distributions.
CategoryDistribution mean_distribution(
    std::span<const CategoryDistribution> distributions);

/// Hellinger distance sqrt(1/2 * sum (sqrt p - sqrt q)^2), in [0, 1].
double hellinger_distance(const CategoryDistribution& p,
                          const CategoryDistribution& q);

}  // namespace harmlens
