#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "harmlens/distribution.hpp"

namespace harmlens {

/// The 18 MovieLens 1M genres, in the order of the dataset's README.
inline constexpr std::array<std::string_view, 18> kMovieLensGenres = {
    "Action",    "Adventure", "Animation", "Children's", "Comedy",
    "Crime",     "Documentary", "Drama",   "Fantasy",    "Film-Noir",
    "Horror",    "Musical",   "Mystery",   "Romance",    "Sci-Fi",
    "Thriller",  "War",       "Western"};

struct Demographics {
  char gender = 'M';  // 'M' or 'F'
  int age_bracket = 0;
  int occupation = 0;

  friend bool operator==(const Demographics&, const Demographics&) = default;
};

struct Rating {
  int user_id = 0;
  int item_id = 0;
  int rating = 0;
  std::int64_t timestamp = 0;
};

struct Movie {
  std::string title;  // UTF-8
  std::vector<std::uint8_t> genres;  // indices into the genre catalog
};

struct RawDataset {
  std::vector<Rating> ratings;
  std::map<int, Demographics> users;
  std::map<int, Movie> movies;
  std::vector<std::string> genre_catalog;
};

struct Interaction {
  std::uint32_t user = 0;  // contiguous user index
  std::uint32_t item = 0;  // contiguous item index
  std::int64_t timestamp = 0;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

/// Implicit-feedback interactions over contiguous user/item indices.
/// Interactions are kept sorted by (user, timestamp, item). Index i maps to
/// the original MovieLens id user_ids[i] / item_ids[i]; both id lists are
/// ascending. A train or test split shares the indices of its source.
struct InteractionSet {
  std::vector<Interaction> interactions;
  std::vector<int> user_ids;
  std::vector<int> item_ids;
  std::vector<std::vector<std::uint8_t>> item_genres;  // per item index
  std::vector<std::string> genre_catalog;

  std::size_t num_users() const noexcept { return user_ids.size(); }
  std::size_t num_items() const noexcept { return item_ids.size(); }
  std::size_t size() const noexcept { return interactions.size(); }

  std::optional<std::uint32_t> find_user(int user_id) const;
  std::optional<std::uint32_t> find_item(int item_id) const;

  /// Item indices per user index, in interaction order.
  std::vector<std::vector<std::uint32_t>> items_by_user() const;
};

struct Split {
  InteractionSet train;
  InteractionSet test;
  double fraction = 0.8;
};

struct PreprocessOptions {
  int min_rating = 4;
  int min_interactions = 20;
};

/// Reads ratings.dat, users.dat and movies.dat from `directory`.
/// Throws Error(kDatasetNotFound) or ParseError.
RawDataset load_movielens(const std::filesystem::path& directory);

/// Parsers for the individual `::`-delimited files. `source_name` is used in
/// ParseError messages.
std::vector<Rating> parse_ratings(std::istream& in,
                                  const std::string& source_name);
std::map<int, Demographics> parse_users(std::istream& in,
                                        const std::string& source_name);
std::map<int, Movie> parse_movies(std::istream& in,
                                  const std::string& source_name);

/// Binarizes ratings (>= min_rating), removes users below min_interactions
/// in a single pass and drops items left without interactions.
/// Throws Error(kEmptyDataset) when nothing survives.
InteractionSet preprocess(const RawDataset& raw,
                          const PreprocessOptions& options = {});

/// Same as preprocess() but repeats the user and item filters until neither
/// removes anything. Reference only; the pipeline uses preprocess().
InteractionSet preprocess_iterated(const RawDataset& raw,
                                   const PreprocessOptions& options = {});

/// Per user with n interactions, the earliest floor(fraction * n + 0.5) go to
/// train. Timestamp ties are ordered by ascending item id.
Split split_chronological(const InteractionSet& data,
                          double train_fraction = 0.8);

/// Each item spreads a unit of mass equally over its genres; the sum is
/// divided by the number of items. Throws Error(kEmptyProfile) on no items.
CategoryDistribution category_distribution(
    std::span<const std::uint32_t> items,
    std::span<const std::vector<std::uint8_t>> item_genres,
    std::size_t num_categories);

/// p(c|u) for every user index of `data`. Users without interactions get
/// Error(kEmptyProfile).
std::vector<CategoryDistribution> user_distributions(const InteractionSet& data);

/// Line-oriented text form of the interaction list (one
/// `user_id\titem_id\ttimestamp` row per interaction, original ids).
void write_interactions(std::ostream& out, const InteractionSet& data);

/// Reads rows written by write_interactions() into an empty copy of
/// `schema` (same indices and catalog). Throws ParseError.
InteractionSet read_interactions(std::istream& in, const InteractionSet& schema,
                                 const std::string& source_name);

/// `schema` with its interaction list cleared.
InteractionSet empty_like(const InteractionSet& schema);

/// Converts Latin-1 bytes to UTF-8 unless the input is already valid UTF-8.
std::string to_utf8(std::string_view text);

}  // namespace harmlens
