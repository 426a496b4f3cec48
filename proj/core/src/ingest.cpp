#include "harmlens/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_map>

#include "harmlens/error.hpp"

namespace harmlens {
namespace {

std::vector<std::string_view> split_on(std::string_view line,
                                       std::string_view delim) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + delim.size();
  }
}

template <typename Int>
Int parse_int(std::string_view field, const std::string& source,
              std::size_t line_no, const char* what) {
  Int value{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw ParseError(source, line_no,
                     std::string("invalid ") + what + " '" +
                         std::string(field) + "'");
  }
  return value;
}

// Calls fn(line, line_no) for every non-blank line, CR stripped.
template <typename Fn>
void for_each_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    fn(std::string_view(line), line_no);
  }
}

std::vector<Rating> parse_ratings_checked(
    std::istream& in, const std::string& source,
    const std::map<int, Demographics>* users,
    const std::map<int, Movie>* movies) {
  std::vector<Rating> ratings;
  for_each_line(in, [&](std::string_view line, std::size_t line_no) {
    const auto fields = split_on(line, "::");
    if (fields.size() != 4) {
      throw ParseError(source, line_no,
                       "expected 4 fields UserID::MovieID::Rating::Timestamp, "
                       "got " + std::to_string(fields.size()));
    }
    Rating r;
    r.user_id = parse_int<int>(fields[0], source, line_no, "user id");
    r.item_id = parse_int<int>(fields[1], source, line_no, "movie id");
    r.rating = parse_int<int>(fields[2], source, line_no, "rating");
    r.timestamp =
        parse_int<std::int64_t>(fields[3], source, line_no, "timestamp");
    if (r.rating < 1 || r.rating > 5) {
      throw ParseError(source, line_no,
                       "rating out of range 1..5: " + std::to_string(r.rating));
    }
    if (users != nullptr && !users->contains(r.user_id)) {
      throw ParseError(source, line_no,
                       "unknown user id " + std::to_string(r.user_id));
    }
    if (movies != nullptr && !movies->contains(r.item_id)) {
      throw ParseError(source, line_no,
                       "unknown movie id " + std::to_string(r.item_id));
    }
    ratings.push_back(r);
  });
  return ratings;
}

std::ifstream open_dataset_file(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw Error(ErrorCode::kDatasetNotFound,
                "dataset file not found: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kDatasetNotFound, "cannot open " + path.string());
  }
  return in;
}

struct Kept {
  int user_id;
  int item_id;
  std::int64_t timestamp;
};

// Binarized ratings with duplicate (user, item) pairs collapsed onto the
// earliest timestamp.
std::vector<Kept> binarize(const RawDataset& raw, int min_rating) {
  std::vector<Kept> kept;
  kept.reserve(raw.ratings.size());
  for (const auto& r : raw.ratings) {
    if (r.rating >= min_rating) kept.push_back({r.user_id, r.item_id, r.timestamp});
  }
  std::sort(kept.begin(), kept.end(), [](const Kept& a, const Kept& b) {
    if (a.user_id != b.user_id) return a.user_id < b.user_id;
    if (a.item_id != b.item_id) return a.item_id < b.item_id;
    return a.timestamp < b.timestamp;
  });
  kept.erase(std::unique(kept.begin(), kept.end(),
                         [](const Kept& a, const Kept& b) {
                           return a.user_id == b.user_id &&
                                  a.item_id == b.item_id;
                         }),
             kept.end());
  return kept;
}

// Drops users with fewer than min_interactions rows. Returns true if any row
// was removed. `kept` is sorted by user.
bool filter_users(std::vector<Kept>& kept, int min_interactions) {
  std::unordered_map<int, int> counts;
  for (const auto& k : kept) ++counts[k.user_id];
  const auto before = kept.size();
  std::erase_if(kept, [&](const Kept& k) {
    return counts[k.user_id] < min_interactions;
  });
  return kept.size() != before;
}

InteractionSet build_set(const RawDataset& raw, const std::vector<Kept>& kept) {
  if (kept.empty()) {
    throw Error(ErrorCode::kEmptyDataset,
                "no interactions left after filtering");
  }
  InteractionSet out;
  out.genre_catalog = raw.genre_catalog;

  std::set<int> users;
  std::set<int> items;
  for (const auto& k : kept) {
    users.insert(k.user_id);
    items.insert(k.item_id);
  }
  out.user_ids.assign(users.begin(), users.end());
  out.item_ids.assign(items.begin(), items.end());
  out.item_genres.reserve(out.item_ids.size());
  for (int id : out.item_ids) {
    const auto it = raw.movies.find(id);
    if (it == raw.movies.end()) {
      throw Error(ErrorCode::kUnknownEntity,
                  "rated movie missing from catalog: " + std::to_string(id));
    }
    out.item_genres.push_back(it->second.genres);
  }

  out.interactions.reserve(kept.size());
  for (const auto& k : kept) {
    out.interactions.push_back({*out.find_user(k.user_id),
                                *out.find_item(k.item_id), k.timestamp});
  }
  std::sort(out.interactions.begin(), out.interactions.end(),
            [](const Interaction& a, const Interaction& b) {
              if (a.user != b.user) return a.user < b.user;
              if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
              return a.item < b.item;
            });
  return out;
}

void check_options(const PreprocessOptions& options) {
  if (options.min_rating < 1 || options.min_rating > 5) {
    throw Error(ErrorCode::kInvalidArgument, "min_rating must be in 1..5");
  }
  if (options.min_interactions < 1) {
    throw Error(ErrorCode::kInvalidArgument, "min_interactions must be >= 1");
  }
}

bool is_valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    if (c < 0x80) {
      extra = 0;
    } else if ((c & 0xE0) == 0xC0 && c >= 0xC2) {
      extra = 1;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
    } else if ((c & 0xF8) == 0xF0 && c <= 0xF4) {
      extra = 3;
    } else {
      return false;
    }
    if (i + extra >= s.size() && extra > 0) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
    }
    i += extra + 1;
  }
  return true;
}

}  // namespace

std::optional<std::uint32_t> InteractionSet::find_user(int user_id) const {
  const auto it = std::lower_bound(user_ids.begin(), user_ids.end(), user_id);
  if (it == user_ids.end() || *it != user_id) return std::nullopt;
  return static_cast<std::uint32_t>(it - user_ids.begin());
}

std::optional<std::uint32_t> InteractionSet::find_item(int item_id) const {
  const auto it = std::lower_bound(item_ids.begin(), item_ids.end(), item_id);
  if (it == item_ids.end() || *it != item_id) return std::nullopt;
  return static_cast<std::uint32_t>(it - item_ids.begin());
}

std::vector<std::vector<std::uint32_t>> InteractionSet::items_by_user() const {
  std::vector<std::vector<std::uint32_t>> out(num_users());
  for (const auto& x : interactions) out[x.user].push_back(x.item);
  return out;
}

std::string to_utf8(std::string_view text) {
  if (is_valid_utf8(text)) return std::string(text);
  std::string out;
  out.reserve(text.size() + 8);
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80) {
      out.push_back(ch);
    } else {
      out.push_back(static_cast<char>(0xC0 | (c >> 6)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    }
  }
  return out;
}

std::vector<Rating> parse_ratings(std::istream& in,
                                  const std::string& source_name) {
  return parse_ratings_checked(in, source_name, nullptr, nullptr);
}

std::map<int, Demographics> parse_users(std::istream& in,
                                        const std::string& source_name) {
  std::map<int, Demographics> users;
  for_each_line(in, [&](std::string_view line, std::size_t line_no) {
    const auto fields = split_on(line, "::");
    if (fields.size() != 5) {
      throw ParseError(source_name, line_no,
                       "expected 5 fields UserID::Gender::Age::Occupation::Zip");
    }
    const int id = parse_int<int>(fields[0], source_name, line_no, "user id");
    Demographics d;
    if (fields[1] != "M" && fields[1] != "F") {
      throw ParseError(source_name, line_no,
                       "gender must be M or F, got '" +
                           std::string(fields[1]) + "'");
    }
    d.gender = fields[1].front();
    d.age_bracket = parse_int<int>(fields[2], source_name, line_no, "age");
    d.occupation =
        parse_int<int>(fields[3], source_name, line_no, "occupation");
    if (!users.emplace(id, d).second) {
      throw ParseError(source_name, line_no,
                       "duplicate user id " + std::to_string(id));
    }
  });
  return users;
}

std::map<int, Movie> parse_movies(std::istream& in,
                                  const std::string& source_name) {
  std::map<int, Movie> movies;
  for_each_line(in, [&](std::string_view line, std::size_t line_no) {
    const std::size_t first = line.find("::");
    const std::size_t last = line.rfind("::");
    if (first == std::string_view::npos || first == last) {
      throw ParseError(source_name, line_no,
                       "expected 3 fields MovieID::Title::Genres");
    }
    const int id = parse_int<int>(line.substr(0, first), source_name, line_no,
                                  "movie id");
    Movie m;
    m.title = to_utf8(line.substr(first + 2, last - first - 2));
    const auto genre_field = line.substr(last + 2);
    for (auto g : split_on(genre_field, "|")) {
      const auto it =
          std::find(kMovieLensGenres.begin(), kMovieLensGenres.end(), g);
      if (it == kMovieLensGenres.end()) {
        throw ParseError(source_name, line_no,
                         "unknown genre '" + std::string(g) + "'");
      }
      const auto idx = static_cast<std::uint8_t>(it - kMovieLensGenres.begin());
      if (std::find(m.genres.begin(), m.genres.end(), idx) == m.genres.end()) {
        m.genres.push_back(idx);
      }
    }
    std::sort(m.genres.begin(), m.genres.end());
    if (!movies.emplace(id, std::move(m)).second) {
      throw ParseError(source_name, line_no,
                       "duplicate movie id " + std::to_string(id));
    }
  });
  return movies;
}

RawDataset load_movielens(const std::filesystem::path& directory) {
  if (!std::filesystem::is_directory(directory)) {
    throw Error(ErrorCode::kDatasetNotFound,
                "dataset directory not found: " + directory.string());
  }
  RawDataset raw;
  raw.genre_catalog.assign(kMovieLensGenres.begin(), kMovieLensGenres.end());
  {
    auto in = open_dataset_file(directory / "users.dat");
    raw.users = parse_users(in, "users.dat");
  }
  {
    auto in = open_dataset_file(directory / "movies.dat");
    raw.movies = parse_movies(in, "movies.dat");
  }
  auto in = open_dataset_file(directory / "ratings.dat");
  raw.ratings =
      parse_ratings_checked(in, "ratings.dat", &raw.users, &raw.movies);
  return raw;
}

InteractionSet preprocess(const RawDataset& raw,
                          const PreprocessOptions& options) {
  check_options(options);
  auto kept = binarize(raw, options.min_rating);
  filter_users(kept, options.min_interactions);
  return build_set(raw, kept);
}

InteractionSet preprocess_iterated(const RawDataset& raw,
                                   const PreprocessOptions& options) {
  check_options(options);
  auto kept = binarize(raw, options.min_rating);
  // Items only drop out when they lose every interaction, which cannot lower
  // any remaining user's count, so this settles after one user pass. The
  // loop keeps the fixed-point definition explicit.
  while (filter_users(kept, options.min_interactions)) {
  }
  return build_set(raw, kept);
}

InteractionSet empty_like(const InteractionSet& schema) {
  InteractionSet out;
  out.user_ids = schema.user_ids;
  out.item_ids = schema.item_ids;
  out.item_genres = schema.item_genres;
  out.genre_catalog = schema.genre_catalog;
  return out;
}

Split split_chronological(const InteractionSet& data, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidFraction,
                "train fraction must be in (0, 1), got " +
                    std::to_string(train_fraction));
  }
  Split split{empty_like(data), empty_like(data), train_fraction};

  // interactions are sorted by (user, timestamp, item); item index order is
  // item id order, so each user's run is already in split order.
  const auto& xs = data.interactions;
  std::size_t begin = 0;
  while (begin < xs.size()) {
    std::size_t end = begin;
    while (end < xs.size() && xs[end].user == xs[begin].user) ++end;
    const std::size_t n = end - begin;
    if (n < 2) {
      throw Error(ErrorCode::kInvalidArgument,
                  "user " + std::to_string(data.user_ids[xs[begin].user]) +
                      " has fewer than 2 interactions");
    }
    const auto n_train = static_cast<std::size_t>(
        std::floor(train_fraction * static_cast<double>(n) + 0.5));
    for (std::size_t k = begin; k < end; ++k) {
      (k - begin < n_train ? split.train : split.test)
          .interactions.push_back(xs[k]);
    }
    begin = end;
  }
  return split;
}

CategoryDistribution category_distribution(
    std::span<const std::uint32_t> items,
    std::span<const std::vector<std::uint8_t>> item_genres,
    std::size_t num_categories) {
  if (items.empty()) {
    throw Error(ErrorCode::kEmptyProfile, "no items to build a profile from");
  }
  std::vector<double> mass(num_categories, 0.0);
  for (auto item : items) {
    if (item >= item_genres.size()) {
      throw Error(ErrorCode::kUnknownEntity,
                  "item index out of range: " + std::to_string(item));
    }
    const auto& genres = item_genres[item];
    if (genres.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "item without genres");
    }
    const double share = 1.0 / static_cast<double>(genres.size());
    for (auto g : genres) {
      if (g >= num_categories) {
        throw Error(ErrorCode::kInvalidArgument, "genre index out of range");
      }
      mass[g] += share;
    }
  }
  const double n = static_cast<double>(items.size());
  for (double& m : mass) m /= n;
  return CategoryDistribution::from_mass(std::move(mass));
}

std::vector<CategoryDistribution> user_distributions(
    const InteractionSet& data) {
  const auto by_user = data.items_by_user();
  std::vector<CategoryDistribution> out;
  out.reserve(by_user.size());
  for (const auto& items : by_user) {
    out.push_back(category_distribution(items, data.item_genres,
                                        data.genre_catalog.size()));
  }
  return out;
}

void write_interactions(std::ostream& out, const InteractionSet& data) {
  out << "# user_id\titem_id\ttimestamp\n";
  for (const auto& x : data.interactions) {
    out << data.user_ids[x.user] << '\t' << data.item_ids[x.item] << '\t'
        << x.timestamp << '\n';
  }
}

InteractionSet read_interactions(std::istream& in, const InteractionSet& schema,
                                 const std::string& source_name) {
  InteractionSet out = empty_like(schema);
  for_each_line(in, [&](std::string_view line, std::size_t line_no) {
    if (line.front() == '#') return;
    const auto fields = split_on(line, "\t");
    if (fields.size() != 3) {
      throw ParseError(source_name, line_no, "expected 3 tab-separated fields");
    }
    const int user_id =
        parse_int<int>(fields[0], source_name, line_no, "user id");
    const int item_id =
        parse_int<int>(fields[1], source_name, line_no, "item id");
    const auto ts =
        parse_int<std::int64_t>(fields[2], source_name, line_no, "timestamp");
    const auto u = out.find_user(user_id);
    const auto i = out.find_item(item_id);
    if (!u || !i) {
      throw ParseError(source_name, line_no, "id not in index");
    }
    out.interactions.push_back({*u, *i, ts});
  });
  return out;
}

}  // namespace harmlens
