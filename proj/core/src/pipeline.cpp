#include "harmlens/pipeline.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "harmlens/hashing.hpp"
#include "harmlens/snapshot.hpp"
#include "json_codec.hpp"

namespace harmlens {
namespace {

namespace fs = std::filesystem;
using json_codec::json;
using Clock = std::chrono::steady_clock;

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw Error(ErrorCode::kInvalidArgument, "invalid value '" +
                                               std::string(value) +
                                               "' for " + std::string(key));
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), out);
  if (value.empty() || ec != std::errc() ||
      ptr != value.data() + value.size()) {
    bad_value(key, value);
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) {
    throw Error(ErrorCode::kInvalidArgument, "cannot write " + path.string());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kDatasetNotFound, "cannot read " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string subset_string(const std::map<std::string, std::string>& kv,
                          std::initializer_list<const char*> keys) {
  std::string out;
  for (const char* k : keys) {
    out += k;
    out += '=';
    out += kv.at(k);
    out += '\n';
  }
  return out;
}

// Stage bookkeeping: a stage is skipped when its stamp holds the same input
// hash and every output exists.
fs::path stamp_path(const PipelineConfig& c, const std::string& stage) {
  return c.output_dir / ".stamps" / (stage + ".sha256");
}

bool up_to_date(const PipelineConfig& c, const std::string& stage,
                const std::string& input_hash,
                std::initializer_list<fs::path> outputs) {
  const auto stamp = stamp_path(c, stage);
  if (!fs::exists(stamp)) return false;
  for (const auto& o : outputs) {
    if (!fs::exists(o)) return false;
  }
  return read_file(stamp) == input_hash;
}

void mark_done(const PipelineConfig& c, const std::string& stage,
               const std::string& input_hash) {
  write_file(stamp_path(c, stage), input_hash);
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

const char* kDatasetFiles[] = {"ratings.dat", "users.dat", "movies.dat"};

std::string dataset_hash(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::kDatasetNotFound,
                "dataset directory not found: " + dir.string());
  }
  std::string acc;
  for (const char* name : kDatasetFiles) {
    const auto path = dir / name;
    if (!fs::is_regular_file(path)) {
      throw Error(ErrorCode::kDatasetNotFound,
                  "dataset file not found: " + path.string());
    }
    acc += name;
    acc += ':';
    acc += sha256_file(path);
    acc += '\n';
  }
  return sha256_hex(acc);
}

struct Prepared {
  Split split;
  std::map<int, Demographics> demographics;
  std::vector<ItemInfo> items;
  std::string dataset_hash;
  std::size_t raw_ratings = 0;
};

Prepared load_prepared(const PipelineConfig& c) {
  const auto dir = stage_paths::prepared_dir(c);
  const json catalog = json::parse(read_file(dir / "catalog.json"));
  Prepared out;
  out.dataset_hash = catalog.at("dataset_hash").get<std::string>();
  out.raw_ratings = catalog.at("raw_ratings").get<std::size_t>();

  InteractionSet schema;
  schema.genre_catalog =
      catalog.at("genre_catalog").get<std::vector<std::string>>();
  for (const auto& u : catalog.at("users")) {
    const int id = u.at("user_id").get<int>();
    schema.user_ids.push_back(id);
    out.demographics[id] = json_codec::demographics_from_json(u);
  }
  for (const auto& i : catalog.at("items")) {
    ItemInfo info;
    info.item_id = i.at("item_id").get<int>();
    info.title = i.at("title").get<std::string>();
    info.genres = i.at("genres").get<std::vector<std::uint8_t>>();
    schema.item_ids.push_back(info.item_id);
    schema.item_genres.push_back(info.genres);
    out.items.push_back(std::move(info));
  }
  std::ifstream train(dir / "train.tsv");
  std::ifstream test(dir / "test.tsv");
  if (!train || !test) {
    throw Error(ErrorCode::kDatasetNotFound, "prepared split files missing");
  }
  out.split.train = read_interactions(train, schema, "train.tsv");
  out.split.test = read_interactions(test, schema, "test.tsv");
  out.split.fraction = c.train_fraction;
  return out;
}

std::string prepared_hash(const PipelineConfig& c) {
  const auto dir = stage_paths::prepared_dir(c);
  return sha256_file(dir / "catalog.json") + sha256_file(dir / "train.tsv") +
         sha256_file(dir / "test.tsv");
}

std::string relative_delta(std::size_t got, std::size_t want) {
  const double d = (static_cast<double>(got) - static_cast<double>(want)) /
                   static_cast<double>(want) * 100.0;
  std::ostringstream ss;
  ss << std::showpos << std::fixed << std::setprecision(3) << d << "%";
  return ss.str();
}

UserEmbedding load_external_embedding(const fs::path& path,
                                      std::span<const int> user_ids) {
  const json j = json::parse(read_file(path));
  UserEmbedding e;
  e.method = ProjectionMethod::kExternal;
  e.mean_actual_coord = json_codec::point_from_json(j.at("mean_actual"));
  e.mean_predicted_coord = json_codec::point_from_json(j.at("mean_predicted"));
  for (const auto& p : j.at("points")) {
    const Point2 pt{p.at("x").get<double>(), p.at("y").get<double>()};
    if (!std::isfinite(pt.x) || !std::isfinite(pt.y)) {
      throw Error(ErrorCode::kInvalidArgument, "non-finite external coords");
    }
    e.coords[p.at("user_id").get<int>()] = pt;
  }
  for (int id : user_ids) {
    if (!e.coords.contains(id)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "external coords missing user " + std::to_string(id));
    }
  }
  return e;
}

}  // namespace

namespace stage_paths {
fs::path prepared_dir(const PipelineConfig& c) {
  return c.output_dir / "prepared";
}
fs::path model_file(const PipelineConfig& c) {
  return c.output_dir / "model" / "bpr.bin";
}
fs::path snapshot_dir(const PipelineConfig& c) {
  return c.output_dir / "snapshot";
}
}  // namespace stage_paths

void set_config_value(PipelineConfig& c, std::string_view key,
                      std::string_view value) {
  if (key == "dataset_dir") {
    c.dataset_dir = std::string(value);
  } else if (key == "out" || key == "output_dir") {
    c.output_dir = std::string(value);
  } else if (key == "min_rating") {
    c.preprocess.min_rating = parse_number<int>(key, value);
  } else if (key == "min_interactions") {
    c.preprocess.min_interactions = parse_number<int>(key, value);
  } else if (key == "train_fraction") {
    c.train_fraction = parse_number<double>(key, value);
  } else if (key == "factors") {
    c.bpr.factors = parse_number<int>(key, value);
  } else if (key == "learning_rate") {
    c.bpr.learning_rate = parse_number<double>(key, value);
  } else if (key == "regularization") {
    c.bpr.regularization = parse_number<double>(key, value);
  } else if (key == "epochs") {
    c.bpr.epochs = parse_number<int>(key, value);
  } else if (key == "seed") {
    c.bpr.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "init_stddev") {
    c.bpr.init_stddev = parse_number<double>(key, value);
  } else if (key == "top_n") {
    c.top_n = parse_number<int>(key, value);
  } else if (key == "alpha") {
    c.harms.alpha = parse_number<double>(key, value);
  } else if (key == "eps") {
    c.harms.eps = parse_number<double>(key, value);
  } else if (key == "divergence_form") {
    c.harms.form = json_codec::parse_divergence_form(value);
  } else if (key == "histogram_bins") {
    c.harms.histogram_bins = parse_number<int>(key, value);
  } else if (key == "k_prototypes") {
    c.k_prototypes = parse_number<int>(key, value);
  } else if (key == "projection") {
    c.projection = parse_projection_method(value);
  } else if (key == "external_coords") {
    c.external_coords = std::string(value);
  } else if (key == "projection_seed") {
    c.projection_seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "clustering_seed") {
    c.clustering_seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "glyph_min_radius") {
    c.glyph.min_radius = parse_number<double>(key, value);
  } else if (key == "glyph_max_radius") {
    c.glyph.max_radius = parse_number<double>(key, value);
  } else if (key == "host") {
    c.host = std::string(value);
  } else if (key == "port") {
    c.port = parse_number<int>(key, value);
  } else if (key == "static_dir") {
    c.static_dir = std::string(value);
  } else {
    throw Error(ErrorCode::kInvalidArgument,
                "unknown config key '" + std::string(key) + "'");
  }
}

PipelineConfig load_config_file(const fs::path& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kInvalidArgument,
                "cannot read config file " + path.string());
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) {
      view = view.substr(0, hash);
    }
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(path.filename().string(), line_no,
                       "expected key = value");
    }
    set_config_value(base, trim(view.substr(0, eq)), trim(view.substr(eq + 1)));
  }
  return base;
}

void validate(const PipelineConfig& c) {
  const auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::kInvalidArgument, what);
  };
  require(c.preprocess.min_rating >= 1 && c.preprocess.min_rating <= 5,
          "min_rating must be in 1..5");
  require(c.preprocess.min_interactions >= 2, "min_interactions must be >= 2");
  require(c.train_fraction > 0.0 && c.train_fraction < 1.0,
          "train_fraction must be in (0, 1)");
  require(c.bpr.factors >= 1, "factors must be >= 1");
  require(c.bpr.epochs >= 0, "epochs must be >= 0");
  require(c.bpr.learning_rate > 0.0, "learning_rate must be > 0");
  require(c.bpr.regularization >= 0.0, "regularization must be >= 0");
  require(c.bpr.init_stddev >= 0.0, "init_stddev must be >= 0");
  require(c.top_n >= 1, "top_n must be >= 1");
  require(c.harms.alpha > 0.0 && c.harms.alpha < 1.0,
          "alpha must be in (0, 1)");
  require(c.harms.eps > 0.0 && c.harms.eps < 1.0, "eps must be in (0, 1)");
  require(c.harms.histogram_bins >= 1, "histogram_bins must be >= 1");
  require(c.k_prototypes >= 1, "k_prototypes must be >= 1");
  require(c.projection != ProjectionMethod::kExternal ||
              !c.external_coords.empty(),
          "projection=external needs external_coords");
  require(c.glyph.min_radius >= 0.0 && c.glyph.max_radius >= c.glyph.min_radius,
          "glyph radii must satisfy 0 <= min <= max");
  require(c.port >= 0 && c.port <= 65535, "port must be in 0..65535");
}

std::map<std::string, std::string> to_key_values(const PipelineConfig& c) {
  return {
      {"min_rating", std::to_string(c.preprocess.min_rating)},
      {"min_interactions", std::to_string(c.preprocess.min_interactions)},
      {"train_fraction", format_double(c.train_fraction)},
      {"factors", std::to_string(c.bpr.factors)},
      {"learning_rate", format_double(c.bpr.learning_rate)},
      {"regularization", format_double(c.bpr.regularization)},
      {"epochs", std::to_string(c.bpr.epochs)},
      {"seed", std::to_string(c.bpr.seed)},
      {"init_stddev", format_double(c.bpr.init_stddev)},
      {"top_n", std::to_string(c.top_n)},
      {"alpha", format_double(c.harms.alpha)},
      {"eps", format_double(c.harms.eps)},
      {"divergence_form", std::string(json_codec::to_string(c.harms.form))},
      {"histogram_bins", std::to_string(c.harms.histogram_bins)},
      {"k_prototypes", std::to_string(c.k_prototypes)},
      {"projection", std::string(to_string(c.projection))},
      {"projection_seed", std::to_string(c.projection_seed)},
      {"clustering_seed", std::to_string(c.clustering_seed)},
      {"glyph_min_radius", format_double(c.glyph.min_radius)},
      {"glyph_max_radius", format_double(c.glyph.max_radius)},
  };
}

StageReport run_prepare(const PipelineConfig& c, std::ostream& log) {
  const auto start = Clock::now();
  const auto kv = to_key_values(c);
  const std::string data_hash = dataset_hash(c.dataset_dir);
  const std::string input_hash = sha256_hex(
      data_hash + subset_string(kv, {"min_rating", "min_interactions",
                                     "train_fraction"}));
  const auto dir = stage_paths::prepared_dir(c);
  if (up_to_date(c, "prepare", input_hash,
                 {dir / "catalog.json", dir / "train.tsv", dir / "test.tsv"})) {
    log << "prepare: inputs unchanged, skipped\n";
    return {"prepare", seconds_since(start), true};
  }

  const RawDataset raw = load_movielens(c.dataset_dir);
  log << "prepare: loaded " << raw.ratings.size() << " ratings, "
      << raw.users.size() << " users, " << raw.movies.size() << " movies\n";
  const InteractionSet data = preprocess(raw, c.preprocess);
  const InteractionSet iterated = preprocess_iterated(raw, c.preprocess);
  const ReferenceCounts ref;
  log << "prepare: " << data.size() << " interactions, " << data.num_users()
      << " users, " << data.num_items() << " items, "
      << data.genre_catalog.size() << " genres\n";
  log << "prepare: reference counts " << ref.interactions << " / " << ref.users
      << " / " << ref.items << " (delta " << relative_delta(data.size(), ref.interactions)
      << " / " << relative_delta(data.num_users(), ref.users) << " / "
      << relative_delta(data.num_items(), ref.items) << ")\n";
  log << "prepare: iterated filter gives " << iterated.size() << " / "
      << iterated.num_users() << " / " << iterated.num_items() << "\n";

  const Split split = split_chronological(data, c.train_fraction);
  log << "prepare: split " << split.train.size() << " train / "
      << split.test.size() << " test\n";

  json users = json::array();
  for (int id : data.user_ids) {
    json u = json_codec::to_json(raw.users.at(id));
    u["user_id"] = id;
    users.push_back(std::move(u));
  }
  json items = json::array();
  for (std::size_t i = 0; i < data.num_items(); ++i) {
    items.push_back({{"item_id", data.item_ids[i]},
                     {"title", raw.movies.at(data.item_ids[i]).title},
                     {"genres", data.item_genres[i]}});
  }
  json catalog = {{"dataset_hash", data_hash},
                  {"raw_ratings", raw.ratings.size()},
                  {"genre_catalog", data.genre_catalog},
                  {"counts",
                   {{"interactions", data.size()},
                    {"users", data.num_users()},
                    {"items", data.num_items()}}},
                  {"iterated_counts",
                   {{"interactions", iterated.size()},
                    {"users", iterated.num_users()},
                    {"items", iterated.num_items()}}},
                  {"users", users},
                  {"items", items}};
  write_file(dir / "catalog.json", catalog.dump() + "\n");
  std::ostringstream train;
  std::ostringstream test;
  write_interactions(train, split.train);
  write_interactions(test, split.test);
  write_file(dir / "train.tsv", train.str());
  write_file(dir / "test.tsv", test.str());
  mark_done(c, "prepare", input_hash);
  return {"prepare", seconds_since(start), false};
}

StageReport run_train(const PipelineConfig& c, std::ostream& log) {
  const auto start = Clock::now();
  const auto kv = to_key_values(c);
  const std::string input_hash = sha256_hex(
      prepared_hash(c) +
      subset_string(kv, {"factors", "learning_rate", "regularization",
                         "epochs", "seed", "init_stddev"}));
  const auto model_path = stage_paths::model_file(c);
  if (up_to_date(c, "train", input_hash, {model_path})) {
    log << "train: inputs unchanged, skipped\n";
    return {"train", seconds_since(start), true};
  }
  const Prepared prepared = load_prepared(c);
  log << "train: BPR d=" << c.bpr.factors << " lr=" << c.bpr.learning_rate
      << " reg=" << c.bpr.regularization << " epochs=" << c.bpr.epochs
      << " seed=" << c.bpr.seed << " on " << prepared.split.train.size()
      << " interactions\n";
  const BprModel model = train_bpr(prepared.split.train, c.bpr);
  if (!model.all_finite()) {
    throw Error(ErrorCode::kInvalidArgument,
                "training diverged (non-finite factors)");
  }
  fs::create_directories(model_path.parent_path());
  save_model(model, model_path);
  mark_done(c, "train", input_hash);
  return {"train", seconds_since(start), false};
}

StageReport run_analyze(const PipelineConfig& c, std::ostream& log) {
  const auto start = Clock::now();
  const auto kv = to_key_values(c);
  const auto model_path = stage_paths::model_file(c);
  std::string input_hash_src =
      prepared_hash(c) + sha256_file(model_path) +
      subset_string(kv, {"top_n", "alpha", "eps", "divergence_form",
                         "histogram_bins", "k_prototypes", "projection",
                         "projection_seed", "clustering_seed",
                         "glyph_min_radius", "glyph_max_radius"});
  if (c.projection == ProjectionMethod::kExternal) {
    input_hash_src += sha256_file(c.external_coords);
  }
  const std::string input_hash = sha256_hex(input_hash_src);
  const auto out_dir = stage_paths::snapshot_dir(c);
  if (up_to_date(c, "analyze", input_hash, {out_dir / "manifest.json"})) {
    log << "analyze: inputs unchanged, skipped\n";
    return {"analyze", seconds_since(start), true};
  }

  const Prepared prepared = load_prepared(c);
  const BprModel model = load_model(model_path);
  const auto& train = prepared.split.train;
  if (model.num_users() != train.num_users() ||
      model.num_items() != train.num_items()) {
    throw Error(ErrorCode::kInvalidArgument,
                "model dimensions do not match the prepared data");
  }

  const double auc = evaluate_auc(model, prepared.split);
  log << "analyze: test AUC " << std::fixed << std::setprecision(4) << auc
      << std::defaultfloat << "\n";

  const SeenItems seen(train);
  const auto by_user = train.items_by_user();
  const std::size_t genres = train.genre_catalog.size();
  std::vector<CategoryDistribution> all_p;
  std::vector<CategoryDistribution> all_q;
  std::vector<RankedList> lists;
  for (std::uint32_t u = 0; u < train.num_users(); ++u) {
    all_p.push_back(category_distribution(by_user[u], train.item_genres, genres));
    lists.push_back(recommend_top_n(model, seen, u, c.top_n));
    std::vector<std::uint32_t> rec_items;
    for (const auto& s : lists.back().items) rec_items.push_back(s.item);
    all_q.push_back(category_distribution(rec_items, train.item_genres, genres));
  }
  const auto harms =
      compute_population_harms(all_p, all_q, train.user_ids, c.harms);
  log << "analyze: system MC " << harms.stats.system_mc << "\n";

  const UserEmbedding embedding =
      c.projection == ProjectionMethod::kExternal
          ? load_external_embedding(c.external_coords, train.user_ids)
          : embed_users(train.user_ids, all_p, harms.stats.mean_actual,
                        harms.stats.mean_predicted, c.projection,
                        c.projection_seed);
  const auto cluster_start = Clock::now();
  const Clustering clustering =
      k_medoids(train.user_ids, all_p, c.k_prototypes, c.clustering_seed);
  log << "analyze: k-medoids k=" << c.k_prototypes << " total deviation "
      << clustering.total_deviation << " after "
      << clustering.deviation_trace.size() - 1 << " swaps ("
      << seconds_since(cluster_start) << " s)\n";
  const std::set<int> prototypes(clustering.medoid_user_ids.begin(),
                                 clustering.medoid_user_ids.end());

  Snapshot s;
  s.manifest.dataset_hash = prepared.dataset_hash;
  s.manifest.config = kv;
  s.manifest.seeds = {{"bpr", c.bpr.seed},
                      {"projection", c.projection_seed},
                      {"clustering", c.clustering_seed}};
  s.manifest.created_at = utc_now();
  s.stats.raw_ratings = prepared.raw_ratings;
  s.stats.interactions = train.size() + prepared.split.test.size();
  s.stats.users = train.num_users();
  s.stats.items = train.num_items();
  s.stats.genres = genres;
  s.stats.train_interactions = train.size();
  s.stats.test_interactions = prepared.split.test.size();
  s.stats.test_auc = auc;
  s.genre_catalog = train.genre_catalog;
  s.items = prepared.items;
  s.population = harms.stats;
  s.clustering = clustering;
  s.embedding = embedding;
  for (std::uint32_t u = 0; u < train.num_users(); ++u) {
    const int id = train.user_ids[u];
    UserRecord r;
    r.user_id = id;
    r.demographics = prepared.demographics.at(id);
    r.p = all_p[u];
    r.q = all_q[u];
    r.recommendations = lists[u];
    r.profile = harms.profiles[u];
    r.coords = embedding.coords.at(id);
    r.cluster = clustering.assignment.at(id);
    r.glyph = glyph_params(r.profile, harms.stats, embedding, c.glyph,
                           prototypes.contains(id));
    s.users.push_back(std::move(r));
  }
  fs::remove_all(out_dir);
  write_snapshot(s, out_dir);
  mark_done(c, "analyze", input_hash);
  return {"analyze", seconds_since(start), false};
}

PipelineReport run_pipeline(const PipelineConfig& config, std::ostream& log) {
  validate(config);
  PipelineReport report;
  const std::pair<const char*, StageReport (*)(const PipelineConfig&,
                                               std::ostream&)>
      stages[] = {{"prepare", &run_prepare},
                  {"train", &run_train},
                  {"analyze", &run_analyze}};
  for (const auto& [name, run] : stages) {
    try {
      auto r = run(config, log);
      log << name << ": " << std::fixed << std::setprecision(2) << r.seconds
          << std::defaultfloat << " s" << (r.skipped ? " (skipped)" : "")
          << "\n";
      report.stages.push_back(std::move(r));
    } catch (const Error& e) {
      throw StageError(name, e);
    } catch (const json::exception& e) {
      throw StageError(name, Error(ErrorCode::kSnapshotCorrupt, e.what()));
    }
  }
  report.snapshot_dir = stage_paths::snapshot_dir(config);
  return report;
}

}  // namespace harmlens
