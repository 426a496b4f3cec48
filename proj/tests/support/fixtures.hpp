#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "harmlens/distribution.hpp"
#include "harmlens/ingest.hpp"

namespace fixtures {

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("harmlens_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path,
                       const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// (user, item, timestamp) with contiguous indices; every item gets genre 0
// unless `item_genres` is given.
inline harmlens::InteractionSet make_set(
    std::size_t users, std::size_t items,
    const std::vector<std::tuple<std::uint32_t, std::uint32_t, std::int64_t>>&
        rows,
    std::vector<std::vector<std::uint8_t>> item_genres = {},
    std::size_t genres = 1) {
  harmlens::InteractionSet s;
  for (std::size_t u = 0; u < users; ++u) s.user_ids.push_back(int(u) + 1);
  for (std::size_t i = 0; i < items; ++i) s.item_ids.push_back(int(i) + 1);
  if (item_genres.empty()) item_genres.assign(items, {0});
  s.item_genres = std::move(item_genres);
  for (std::size_t g = 0; g < genres; ++g) {
    s.genre_catalog.push_back("G" + std::to_string(g));
  }
  for (const auto& [u, i, ts] : rows) s.interactions.push_back({u, i, ts});
  std::sort(s.interactions.begin(), s.interactions.end(),
            [](const auto& a, const auto& b) {
              return std::tie(a.user, a.timestamp, a.item) <
                     std::tie(b.user, b.timestamp, b.item);
            });
  return s;
}

// Random point of the simplex; each entry is zeroed with `zero_prob`.
inline harmlens::CategoryDistribution random_simplex(std::mt19937_64& rng,
                                                     std::size_t n,
                                                     double zero_prob = 0.0) {
  std::exponential_distribution<double> e(1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w(n);
  double total = 0.0;
  for (auto& x : w) {
    x = u(rng) < zero_prob ? 0.0 : e(rng);
    total += x;
  }
  if (total == 0.0) w[rng() % n] = 1.0;
  return harmlens::CategoryDistribution::normalized(std::move(w));
}

inline harmlens::CategoryDistribution dist(std::vector<double> mass) {
  return harmlens::CategoryDistribution::from_mass(std::move(mass));
}

}  // namespace fixtures
