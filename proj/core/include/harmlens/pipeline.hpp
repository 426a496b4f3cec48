#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "harmlens/error.hpp"
#include "harmlens/harms.hpp"
#include "harmlens/ingest.hpp"
#include "harmlens/recommender.hpp"
#include "harmlens/space.hpp"

namespace harmlens {

struct PipelineConfig {
  std::filesystem::path dataset_dir;
  std::filesystem::path output_dir = "harmlens_out";
  PreprocessOptions preprocess;
  double train_fraction = 0.8;
  BprHyperParams bpr;
  int top_n = 20;
  HarmOptions harms;
  int k_prototypes = 8;
  ProjectionMethod projection = ProjectionMethod::kHellingerPca;
  std::filesystem::path external_coords;  // used with kExternal
  std::uint64_t projection_seed = 0;
  std::uint64_t clustering_seed = 0;
  GlyphConfig glyph;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path static_dir;
};

/// Sets one field from its config-file key (e.g. "epochs", "top_n").
/// Throws Error(kInvalidArgument) on an unknown key or unparsable value.
void set_config_value(PipelineConfig& config, std::string_view key,
                      std::string_view value);

/// Reads a flat `key = value` document ('#' starts a comment) on top of
/// `base`.
PipelineConfig load_config_file(const std::filesystem::path& path,
                                PipelineConfig base = {});

/// Throws Error(kInvalidArgument) for out-of-range settings.
void validate(const PipelineConfig& config);

/// Every setting that affects pipeline outputs, as key/value strings.
std::map<std::string, std::string> to_key_values(const PipelineConfig& config);

/// Failure inside a named pipeline stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.code(), stage + ": " + cause.what()),
        stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct StageReport {
  std::string name;
  double seconds = 0.0;
  bool skipped = false;  // inputs unchanged since the last run
};

struct PipelineReport {
  std::vector<StageReport> stages;
  std::filesystem::path snapshot_dir;
};

namespace stage_paths {
std::filesystem::path prepared_dir(const PipelineConfig& config);
std::filesystem::path model_file(const PipelineConfig& config);
std::filesystem::path snapshot_dir(const PipelineConfig& config);
}  // namespace stage_paths

/// Loads the dataset, preprocesses and splits it into
/// <out>/prepared/. Reruns only when the dataset files or the settings
/// changed.
StageReport run_prepare(const PipelineConfig& config, std::ostream& log);
/// Trains BPR on the prepared train split into <out>/model/bpr.bin.
StageReport run_train(const PipelineConfig& config, std::ostream& log);
/// Computes recommendations, harms, embedding, prototypes and glyphs and
/// writes the snapshot to <out>/snapshot/.
StageReport run_analyze(const PipelineConfig& config, std::ostream& log);

/// prepare, train and analyze in order. Each stage's failure is rethrown as
/// StageError.
PipelineReport run_pipeline(const PipelineConfig& config, std::ostream& log);

/// Expected ML-1M counts after preprocessing.
struct ReferenceCounts {
  std::size_t interactions = 562800;
  std::size_t users = 5180;
  std::size_t items = 3526;
  std::size_t genres = 18;
};

}  // namespace harmlens
