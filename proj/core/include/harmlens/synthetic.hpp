#pragma once

#include <cstdint>
#include <filesystem>

namespace harmlens {

/// Parameters of a MovieLens-shaped synthetic dataset. Users have sparse
/// genre tastes loosely tied to gender and age; items have 1-3 genres and a
/// long-tailed popularity.
struct SyntheticOptions {
  int users = 300;
  int items = 400;
  int min_ratings_per_user = 25;
  int max_ratings_per_user = 120;
  std::uint64_t seed = 7;
};

/// Writes ratings.dat, users.dat and movies.dat in ML-1M format.
void write_synthetic_movielens(const std::filesystem::path& directory,
                               const SyntheticOptions& options = {});

}  // namespace harmlens
