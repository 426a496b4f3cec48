#include "harmlens/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <vector>

#include "harmlens/error.hpp"
#include "harmlens/ingest.hpp"

namespace harmlens {
namespace {

constexpr std::array<int, 7> kAgeBrackets = {1, 18, 25, 35, 45, 50, 56};

// Genres each gender leans toward, as indices into kMovieLensGenres.
constexpr std::array<int, 4> kMaleLean = {0, 1, 14, 16};    // Action, Adventure, Sci-Fi, War
constexpr std::array<int, 4> kFemaleLean = {4, 7, 11, 13};  // Comedy, Drama, Musical, Romance

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::kInvalidArgument, "cannot write " + path.string());
  }
  return out;
}

}  // namespace

void write_synthetic_movielens(const std::filesystem::path& directory,
                               const SyntheticOptions& o) {
  if (o.users < 1 || o.items < 1 || o.min_ratings_per_user < 1 ||
      o.max_ratings_per_user < o.min_ratings_per_user ||
      o.max_ratings_per_user > o.items) {
    throw Error(ErrorCode::kInvalidArgument, "synthetic options need users, items >= 1 and "
                "1 <= min ratings <= max ratings <= items");
  }
  std::filesystem::create_directories(directory);
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n_genres = static_cast<int>(kMovieLensGenres.size());

  std::vector<std::vector<int>> item_genres(o.items);
  std::vector<double> popularity(o.items);
  {
    auto movies = open_out(directory / "movies.dat");
    std::uniform_int_distribution<int> genre(0, n_genres - 1);
    std::uniform_int_distribution<int> count(1, 3);
    for (int i = 0; i < o.items; ++i) {
      auto& g = item_genres[i];
      const int c = count(rng);
      while (static_cast<int>(g.size()) < c) {
        const int x = genre(rng);
        if (std::find(g.begin(), g.end(), x) == g.end()) g.push_back(x);
      }
      std::sort(g.begin(), g.end());
      popularity[i] = 1.0 / std::pow(i + 1.0, 0.8);
      movies << (i + 1) << "::Synthetic Movie " << (i + 1) << " ("
             << 1950 + i % 50 << ")::";
      for (std::size_t k = 0; k < g.size(); ++k) {
        if (k > 0) movies << '|';
        movies << kMovieLensGenres[g[k]];
      }
      movies << '\n';
    }
  }

  auto users = open_out(directory / "users.dat");
  auto ratings = open_out(directory / "ratings.dat");
  std::uniform_int_distribution<int> age(0, kAgeBrackets.size() - 1);
  std::uniform_int_distribution<int> occupation(0, 20);
  std::uniform_int_distribution<int> n_ratings(o.min_ratings_per_user,
                                               o.max_ratings_per_user);
  std::uniform_int_distribution<int> genre(0, n_genres - 1);
  std::uniform_int_distribution<int> lean(0, 3);
  std::uniform_int_distribution<int> low(1, 3);
  std::int64_t clock = 956'703'932;

  for (int u = 1; u <= o.users; ++u) {
    const char gender = unit(rng) < 0.7 ? 'M' : 'F';
    const int age_bracket = kAgeBrackets[age(rng)];
    users << u << "::" << gender << "::" << age_bracket
          << "::" << occupation(rng) << "::" << 10000 + u << '\n';

    // Two or three liked genres, the first drawn from the gender lean and
    // the oldest brackets favouring Drama.
    std::vector<double> taste(n_genres, 0.02);
    taste[(gender == 'M' ? kMaleLean : kFemaleLean)[lean(rng)]] += 1.0;
    taste[genre(rng)] += 0.6;
    if (age_bracket >= 45) taste[7] += 0.5;

    std::vector<double> weight(o.items);
    std::vector<double> affinity(o.items);
    for (int i = 0; i < o.items; ++i) {
      double a = 0.0;
      for (int g : item_genres[i]) a = std::max(a, taste[g]);
      affinity[i] = a;
      weight[i] = popularity[i] * (0.02 + affinity[i]);
    }
    // Weighted sampling without replacement via exponential keys.
    std::vector<std::pair<double, int>> keys(o.items);
    for (int i = 0; i < o.items; ++i) {
      keys[i] = {-std::log(1.0 - unit(rng)) / weight[i], i};
    }
    const int n = n_ratings(rng);
    std::partial_sort(keys.begin(), keys.begin() + n, keys.end());
    for (int k = 0; k < n; ++k) {
      const int i = keys[k].second;
      const double p_like = std::min(0.95, 0.25 + 0.6 * affinity[i]);
      const int r = unit(rng) < p_like ? (unit(rng) < 0.5 ? 4 : 5) : low(rng);
      clock += 1 + static_cast<std::int64_t>(unit(rng) * 600);
      ratings << u << "::" << (i + 1) << "::" << r << "::" << clock << '\n';
    }
  }
}

}  // namespace harmlens
