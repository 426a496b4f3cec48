#include "harmlens/snapshot.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "harmlens/error.hpp"
#include "harmlens/hashing.hpp"
#include "json_codec.hpp"

namespace harmlens {
namespace {

using json_codec::json;
namespace fs = std::filesystem;

constexpr const char* kManifest = "manifest.json";

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) {
    throw Error(ErrorCode::kInvalidArgument, "cannot write " + path.string());
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kSnapshotCorrupt, "missing " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSnapshotCorrupt,
                path.filename().string() + ": " + e.what());
  }
}

std::string stats_document(const Snapshot& s) {
  const auto& st = s.stats;
  json j = {{"raw_ratings", st.raw_ratings},
            {"interactions", st.interactions},
            {"users", st.users},
            {"items", st.items},
            {"genres", st.genres},
            {"train_interactions", st.train_interactions},
            {"test_interactions", st.test_interactions},
            {"test_auc", st.test_auc},
            {"genre_catalog", s.genre_catalog}};
  return j.dump(2) + "\n";
}

std::string items_document(const Snapshot& s) {
  json arr = json::array();
  for (const auto& item : s.items) {
    json genres = json::array();
    for (auto g : item.genres) genres.push_back(s.genre_catalog.at(g));
    arr.push_back(
        {{"item_id", item.item_id}, {"title", item.title}, {"genres", genres}});
  }
  return arr.dump() + "\n";
}

std::string users_document(const Snapshot& s) {
  json arr = json::array();
  for (const auto& u : s.users) {
    json recs = json::array();
    for (const auto& r : u.recommendations.items) {
      recs.push_back({{"item_id", s.items.at(r.item).item_id},
                      {"score", r.score}});
    }
    arr.push_back({{"user_id", u.user_id},
                   {"demographics", json_codec::to_json(u.demographics)},
                   {"p", json_codec::to_json(u.p)},
                   {"q", json_codec::to_json(u.q)},
                   {"top_n", u.recommendations.n},
                   {"recommendations", recs}});
  }
  return arr.dump() + "\n";
}

std::string harms_document(const Snapshot& s) {
  std::string out;
  for (const auto& u : s.users) {
    out += json_codec::to_json(u.profile).dump();
    out += '\n';
  }
  return out;
}

std::string population_document(const Snapshot& s) {
  return json_codec::to_json(s.population).dump(2) + "\n";
}

std::string embedding_document(const Snapshot& s) {
  json points = json::array();
  for (const auto& u : s.users) {
    points.push_back({{"user_id", u.user_id},
                      {"x", u.coords.x},
                      {"y", u.coords.y}});
  }
  json j = {{"method", to_string(s.embedding.method)},
            {"seed", s.embedding.seed},
            {"mean_actual", json_codec::to_json(s.embedding.mean_actual_coord)},
            {"mean_predicted",
             json_codec::to_json(s.embedding.mean_predicted_coord)},
            {"points", points}};
  return j.dump() + "\n";
}

std::string clustering_document(const Snapshot& s) {
  json assignment = json::array();
  for (const auto& u : s.users) {
    assignment.push_back({{"user_id", u.user_id}, {"cluster", u.cluster}});
  }
  json j = {{"k", s.clustering.k},
            {"medoid_user_ids", s.clustering.medoid_user_ids},
            {"total_deviation", s.clustering.total_deviation},
            {"deviation_trace", s.clustering.deviation_trace},
            {"assignment", assignment}};
  return j.dump() + "\n";
}

std::string glyphs_document(const Snapshot& s) {
  json arr = json::array();
  for (const auto& u : s.users) arr.push_back(json_codec::to_json(u.glyph));
  return arr.dump() + "\n";
}

using DocumentFn = std::string (*)(const Snapshot&);

const std::vector<std::pair<std::string, DocumentFn>>& documents() {
  static const std::vector<std::pair<std::string, DocumentFn>> kDocs = {
      {"clustering.json", &clustering_document},
      {"embedding.json", &embedding_document},
      {"glyphs.json", &glyphs_document},
      {"harms.jsonl", &harms_document},
      {"items.json", &items_document},
      {"population.json", &population_document},
      {"stats.json", &stats_document},
      {"users.json", &users_document},
  };
  return kDocs;
}

[[noreturn]] void corrupt(const std::string& what) {
  throw Error(ErrorCode::kSnapshotCorrupt, what);
}

// Checks that a per-user collection covers exactly `ids`.
void check_keys(const std::set<int>& keys, const std::set<int>& ids,
                const char* file) {
  if (keys != ids) {
    corrupt(std::string(file) + " does not cover the same users as users.json");
  }
}

}  // namespace

const UserRecord* Snapshot::find_user(int user_id) const {
  const auto it = std::lower_bound(
      users.begin(), users.end(), user_id,
      [](const UserRecord& u, int id) { return u.user_id < id; });
  if (it == users.end() || it->user_id != user_id) return nullptr;
  return &*it;
}

CounterfactualPopulation Snapshot::counterfactual_population() const {
  CounterfactualPopulation pop;
  pop.genre_catalog = genre_catalog;
  pop.users.reserve(users.size());
  for (const auto& u : users) {
    pop.users.push_back(
        {u.user_id, u.demographics, u.p, u.profile, u.recommendations});
  }
  return pop;
}

const std::vector<std::string>& snapshot_files() {
  static const std::vector<std::string> kFiles = [] {
    std::vector<std::string> names;
    for (const auto& [name, fn] : documents()) names.push_back(name);
    return names;
  }();
  return kFiles;
}

void write_snapshot(const Snapshot& snapshot, const fs::path& directory) {
  fs::create_directories(directory);
  std::map<std::string, std::string> hashes;
  for (const auto& [name, make] : documents()) {
    const std::string text = make(snapshot);
    write_text(directory / name, text);
    hashes[name] = sha256_hex(text);
  }
  const auto& m = snapshot.manifest;
  json manifest = {{"format_version", kSnapshotFormatVersion},
                   {"dataset_hash", m.dataset_hash},
                   {"config", m.config},
                   {"seeds", m.seeds},
                   {"created_at", m.created_at},
                   {"content_hashes", hashes}};
  write_text(directory / kManifest, manifest.dump(2) + "\n");
}

Snapshot read_snapshot(const fs::path& directory) {
  if (!fs::is_directory(directory)) {
    throw Error(ErrorCode::kDatasetNotFound,
                "snapshot directory not found: " + directory.string());
  }
  Snapshot s;
  try {
    const json manifest = parse_json(directory / kManifest);
    s.manifest.format_version = manifest.at("format_version").get<int>();
    if (s.manifest.format_version != kSnapshotFormatVersion) {
      corrupt("unsupported snapshot format version");
    }
    s.manifest.dataset_hash = manifest.at("dataset_hash").get<std::string>();
    s.manifest.config =
        manifest.at("config").get<std::map<std::string, std::string>>();
    s.manifest.seeds =
        manifest.at("seeds").get<std::map<std::string, std::uint64_t>>();
    s.manifest.created_at = manifest.at("created_at").get<std::string>();
    s.manifest.content_hashes =
        manifest.at("content_hashes").get<std::map<std::string, std::string>>();

    for (const auto& name : snapshot_files()) {
      const auto it = s.manifest.content_hashes.find(name);
      if (it == s.manifest.content_hashes.end()) {
        corrupt("manifest has no hash for " + name);
      }
      if (sha256_file(directory / name) != it->second) {
        corrupt("content hash mismatch for " + name);
      }
    }

    const json stats = parse_json(directory / "stats.json");
    s.stats.raw_ratings = stats.at("raw_ratings").get<std::size_t>();
    s.stats.interactions = stats.at("interactions").get<std::size_t>();
    s.stats.users = stats.at("users").get<std::size_t>();
    s.stats.items = stats.at("items").get<std::size_t>();
    s.stats.genres = stats.at("genres").get<std::size_t>();
    s.stats.train_interactions =
        stats.at("train_interactions").get<std::size_t>();
    s.stats.test_interactions = stats.at("test_interactions").get<std::size_t>();
    s.stats.test_auc = stats.at("test_auc").get<double>();
    s.genre_catalog = stats.at("genre_catalog").get<std::vector<std::string>>();

    std::map<int, std::uint32_t> item_index;
    for (const auto& j : parse_json(directory / "items.json")) {
      ItemInfo info;
      info.item_id = j.at("item_id").get<int>();
      info.title = j.at("title").get<std::string>();
      for (const auto& g : j.at("genres")) {
        const auto name = g.get<std::string>();
        const auto pos = std::find(s.genre_catalog.begin(),
                                   s.genre_catalog.end(), name);
        if (pos == s.genre_catalog.end()) corrupt("unknown genre " + name);
        info.genres.push_back(
            static_cast<std::uint8_t>(pos - s.genre_catalog.begin()));
      }
      item_index[info.item_id] = static_cast<std::uint32_t>(s.items.size());
      s.items.push_back(std::move(info));
    }

    std::set<int> ids;
    for (const auto& j : parse_json(directory / "users.json")) {
      UserRecord u;
      u.user_id = j.at("user_id").get<int>();
      u.demographics = json_codec::demographics_from_json(j.at("demographics"));
      u.p = json_codec::distribution_from_json(j.at("p"));
      u.q = json_codec::distribution_from_json(j.at("q"));
      u.recommendations.user = static_cast<std::uint32_t>(s.users.size());
      u.recommendations.n = j.at("top_n").get<int>();
      for (const auto& r : j.at("recommendations")) {
        const auto it = item_index.find(r.at("item_id").get<int>());
        if (it == item_index.end()) corrupt("recommended item not in catalog");
        u.recommendations.items.push_back(
            {it->second, r.at("score").get<double>()});
      }
      if (!s.users.empty() && s.users.back().user_id >= u.user_id) {
        corrupt("users.json is not sorted by user_id");
      }
      ids.insert(u.user_id);
      s.users.push_back(std::move(u));
    }

    const auto find_mut = [&s](int id) -> UserRecord* {
      const auto it = std::lower_bound(
          s.users.begin(), s.users.end(), id,
          [](const UserRecord& u, int key) { return u.user_id < key; });
      return it != s.users.end() && it->user_id == id ? &*it : nullptr;
    };

    std::set<int> keys;
    {
      std::istringstream lines(read_text(directory / "harms.jsonl"));
      std::string line;
      while (std::getline(lines, line)) {
        if (line.empty()) continue;
        const auto h = json_codec::profile_from_json(json::parse(line));
        auto* u = find_mut(h.user_id);
        if (u == nullptr) corrupt("harms.jsonl has an unknown user");
        u->profile = h;
        keys.insert(h.user_id);
      }
      check_keys(keys, ids, "harms.jsonl");
    }

    keys.clear();
    for (const auto& j : parse_json(directory / "glyphs.json")) {
      const auto g = json_codec::glyph_from_json(j);
      auto* u = find_mut(g.user_id);
      if (u == nullptr) corrupt("glyphs.json has an unknown user");
      u->glyph = g;
      keys.insert(g.user_id);
    }
    check_keys(keys, ids, "glyphs.json");

    keys.clear();
    const json embedding = parse_json(directory / "embedding.json");
    s.embedding.method =
        parse_projection_method(embedding.at("method").get<std::string>());
    s.embedding.seed = embedding.at("seed").get<std::uint64_t>();
    s.embedding.mean_actual_coord =
        json_codec::point_from_json(embedding.at("mean_actual"));
    s.embedding.mean_predicted_coord =
        json_codec::point_from_json(embedding.at("mean_predicted"));
    for (const auto& j : embedding.at("points")) {
      const int id = j.at("user_id").get<int>();
      const Point2 p{j.at("x").get<double>(), j.at("y").get<double>()};
      auto* u = find_mut(id);
      if (u == nullptr) corrupt("embedding.json has an unknown user");
      u->coords = p;
      s.embedding.coords[id] = p;
      keys.insert(id);
    }
    check_keys(keys, ids, "embedding.json");

    keys.clear();
    const json clustering = parse_json(directory / "clustering.json");
    s.clustering.k = clustering.at("k").get<int>();
    s.clustering.medoid_user_ids =
        clustering.at("medoid_user_ids").get<std::vector<int>>();
    s.clustering.total_deviation =
        clustering.at("total_deviation").get<double>();
    s.clustering.deviation_trace =
        clustering.at("deviation_trace").get<std::vector<double>>();
    for (const auto& j : clustering.at("assignment")) {
      const int id = j.at("user_id").get<int>();
      const int cluster = j.at("cluster").get<int>();
      auto* u = find_mut(id);
      if (u == nullptr) corrupt("clustering.json has an unknown user");
      if (cluster < 0 || cluster >= s.clustering.k) {
        corrupt("cluster index out of range");
      }
      u->cluster = cluster;
      s.clustering.assignment[id] = cluster;
      keys.insert(id);
    }
    check_keys(keys, ids, "clustering.json");

    s.population = json_codec::population_from_json(
        parse_json(directory / "population.json"));
  } catch (const json::exception& e) {
    corrupt(std::string("malformed snapshot: ") + e.what());
  }
  return s;
}

}  // namespace harmlens
