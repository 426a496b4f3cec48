// harmlens: prepare, train, analyze and serve recommender harm snapshots.
#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "harmlens/pipeline.hpp"
#include "harmlens/service.hpp"
#include "harmlens/snapshot.hpp"
#include "harmlens/synthetic.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flag values are kept as strings and applied through set_config_value so
// the config file and the command line share one parser.
struct Flags {
  std::string config;
  std::vector<std::pair<std::string, CLI::Option*>> options;
  std::map<std::string, std::string> values;

  void add(CLI::App& app, const std::string& flag, const std::string& key,
           const std::string& help) {
    options.emplace_back(key, app.add_option(flag, values[key], help));
  }

  harmlens::PipelineConfig resolve() const {
    harmlens::PipelineConfig c;
    try {
      if (!config.empty()) c = harmlens::load_config_file(config, c);
      for (const auto& [key, opt] : options) {
        if (opt->count() > 0) harmlens::set_config_value(c, key, values.at(key));
      }
      harmlens::validate(c);
    } catch (const harmlens::Error& e) {
      throw UsageError(e.what());
    }
    return c;
  }
};

void add_pipeline_flags(CLI::App& app, Flags& f) {
  app.add_option("--config", f.config, "Config file of key = value lines")
      ->check(CLI::ExistingFile);
  f.add(app, "--dataset-dir", "dataset_dir",
        "Directory holding ratings.dat, users.dat, movies.dat");
  f.add(app, "--out", "out", "Output directory (default harmlens_out)");
  f.add(app, "--seed", "seed", "BPR training seed");
  f.add(app, "--top-n", "top_n", "Recommendation list length");
  f.add(app, "--factors", "factors", "Latent dimension");
  f.add(app, "--epochs", "epochs", "Training epochs");
  f.add(app, "--k-prototypes", "k_prototypes", "Number of prototype users");
  f.add(app, "--port", "port", "HTTP port for serve");
  f.add(app, "--host", "host", "HTTP bind address for serve");
  f.add(app, "--static-dir", "static_dir", "Dashboard bundle to serve at /");
}

void print_report(const harmlens::PipelineReport& r) {
  std::cout << "snapshot written to " << r.snapshot_dir.string() << "\n";
}

int serve(const harmlens::PipelineConfig& c) {
  const auto dir = harmlens::stage_paths::snapshot_dir(c);
  harmlens::Api api(harmlens::read_snapshot(dir));
  std::optional<std::filesystem::path> static_dir;
  if (!c.static_dir.empty()) static_dir = c.static_dir;
  harmlens::Server server(api, static_dir);
  const int port = server.bind(c.host, c.port);
  std::cout << "serving " << dir.string() << " on http://" << c.host << ":"
            << port << std::endl;
  server.listen();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recommender harm analytics over MovieLens-format data"};
  app.require_subcommand(1);

  struct Command {
    CLI::App* app;
    Flags flags;
  };
  std::map<std::string, Command> commands;
  const std::pair<const char*, const char*> names[] = {
      {"prepare", "Load, filter and split the dataset"},
      {"train", "Train the BPR model on the prepared split"},
      {"analyze", "Compute harms, embedding and prototypes into a snapshot"},
      {"serve", "Serve a snapshot over HTTP"},
      {"pipeline", "Run prepare, train and analyze"},
  };
  for (const auto& [name, help] : names) {
    auto& cmd = commands[name];
    cmd.app = app.add_subcommand(name, help);
    add_pipeline_flags(*cmd.app, cmd.flags);
  }

  harmlens::SyntheticOptions synth;
  std::string synth_dir;
  auto* synth_cmd =
      app.add_subcommand("synth", "Write a small MovieLens-format dataset");
  synth_cmd->add_option("dir", synth_dir, "Output directory")->required();
  synth_cmd->add_option("--users", synth.users, "Number of users");
  synth_cmd->add_option("--items", synth.items, "Number of items");
  synth_cmd->add_option("--seed", synth.seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (synth_cmd->parsed()) {
      synth.max_ratings_per_user = std::min(synth.max_ratings_per_user, synth.items);
      harmlens::write_synthetic_movielens(synth_dir, synth);
      return kOk;
    }
    for (auto& [name, cmd] : commands) {
      if (!cmd.app->parsed()) continue;
      const harmlens::PipelineConfig c = cmd.flags.resolve();
      if (name == "serve") return serve(c);
      if (name == "pipeline") {
        print_report(harmlens::run_pipeline(c, std::cout));
        return kOk;
      }
      if (name == "prepare") harmlens::run_prepare(c, std::cout);
      if (name == "train") harmlens::run_train(c, std::cout);
      if (name == "analyze") harmlens::run_analyze(c, std::cout);
      return kOk;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const harmlens::Error& e) {
    std::cerr << "error [" << harmlens::to_string(e.code()) << "]: " << e.what()
              << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}
