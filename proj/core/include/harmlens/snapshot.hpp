#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "harmlens/counterfactual.hpp"
#include "harmlens/harms.hpp"
#include "harmlens/ingest.hpp"
#include "harmlens/recommender.hpp"
#include "harmlens/space.hpp"

namespace harmlens {

inline constexpr int kSnapshotFormatVersion = 1;

struct SnapshotManifest {
  int format_version = kSnapshotFormatVersion;
  std::string dataset_hash;
  std::map<std::string, std::string> config;
  std::map<std::string, std::uint64_t> seeds;
  std::string created_at;  // informational, not hashed
  std::map<std::string, std::string> content_hashes;  // file -> sha256
};

struct InteractionStats {
  std::size_t raw_ratings = 0;
  std::size_t interactions = 0;
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t genres = 0;
  std::size_t train_interactions = 0;
  std::size_t test_interactions = 0;
  double test_auc = 0.0;
};

struct ItemInfo {
  int item_id = 0;
  std::string title;
  std::vector<std::uint8_t> genres;
};

struct UserRecord {
  int user_id = 0;
  Demographics demographics;
  CategoryDistribution p;
  CategoryDistribution q;
  RankedList recommendations;  // item indices into Snapshot::items
  HarmProfile profile;
  GlyphSpec glyph;
  Point2 coords;
  int cluster = 0;
};

/// Everything the service answers from. Immutable once built.
struct Snapshot {
  SnapshotManifest manifest;
  InteractionStats stats;
  std::vector<std::string> genre_catalog;
  std::vector<ItemInfo> items;   // by item index
  std::vector<UserRecord> users; // ascending user_id
  PopulationStats population;
  Clustering clustering;
  UserEmbedding embedding;  // coords duplicated in users[].coords

  const UserRecord* find_user(int user_id) const;
  CounterfactualPopulation counterfactual_population() const;
};

/// Files making up a snapshot directory, besides manifest.json.
const std::vector<std::string>& snapshot_files();

/// Writes every snapshot file, then manifest.json with their SHA-256 hashes
/// (the manifest's own content_hashes replace whatever `snapshot` carries).
void write_snapshot(const Snapshot& snapshot,
                    const std::filesystem::path& directory);

/// Loads and checks the snapshot. Throws Error(kDatasetNotFound) for a
/// missing directory and Error(kSnapshotCorrupt) on hash mismatch or
/// inconsistent per-user data.
Snapshot read_snapshot(const std::filesystem::path& directory);

}  // namespace harmlens
