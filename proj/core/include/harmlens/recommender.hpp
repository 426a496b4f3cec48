#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "harmlens/ingest.hpp"

namespace harmlens {

struct BprHyperParams {
  int factors = 32;
  double learning_rate = 0.05;
  double regularization = 0.0025;
  int epochs = 30;
  std::uint64_t seed = 42;
  double init_stddev = 0.01;

  friend bool operator==(const BprHyperParams&,
                         const BprHyperParams&) = default;
};

/// Matrix-factorization model: score(u, i) = <user_u, item_i> + bias_i.
/// Factors are stored row-major.
class BprModel {
 public:
  BprModel() = default;
  BprModel(std::size_t num_users, std::size_t num_items,
           const BprHyperParams& hp);

  const BprHyperParams& hyperparams() const noexcept { return hp_; }
  std::size_t num_users() const noexcept { return num_users_; }
  std::size_t num_items() const noexcept { return num_items_; }
  std::size_t factors() const noexcept {
    return static_cast<std::size_t>(hp_.factors);
  }

  std::span<double> user_factors(std::size_t u) {
    return {user_factors_.data() + u * factors(), factors()};
  }
  std::span<const double> user_factors(std::size_t u) const {
    return {user_factors_.data() + u * factors(), factors()};
  }
  std::span<double> item_factors(std::size_t i) {
    return {item_factors_.data() + i * factors(), factors()};
  }
  std::span<const double> item_factors(std::size_t i) const {
    return {item_factors_.data() + i * factors(), factors()};
  }
  double& item_bias(std::size_t i) { return item_bias_[i]; }
  double item_bias(std::size_t i) const { return item_bias_[i]; }

  std::span<const double> all_user_factors() const { return user_factors_; }
  std::span<const double> all_item_factors() const { return item_factors_; }
  std::span<const double> all_item_bias() const { return item_bias_; }

  bool all_finite() const;

  friend bool operator==(const BprModel&, const BprModel&) = default;

 private:
  friend BprModel load_model(const std::filesystem::path&);

  BprHyperParams hp_;
  std::size_t num_users_ = 0;
  std::size_t num_items_ = 0;
  std::vector<double> user_factors_;
  std::vector<double> item_factors_;
  std::vector<double> item_bias_;
};

/// Sorted train items per user, for exclusion and negative sampling.
class SeenItems {
 public:
  explicit SeenItems(const InteractionSet& data);

  std::span<const std::uint32_t> of(std::uint32_t user) const {
    return by_user_[user];
  }
  bool contains(std::uint32_t user, std::uint32_t item) const;
  std::size_t num_users() const noexcept { return by_user_.size(); }

 private:
  std::vector<std::vector<std::uint32_t>> by_user_;
};

struct BprTriple {
  std::uint32_t user = 0;
  std::uint32_t positive = 0;
  std::uint32_t negative = 0;
};

/// Gradient of the regularized per-triple objective
///   -ln sigmoid(x_ui - x_uj) + reg/2 * (|w_u|^2 + |h_i|^2 + |h_j|^2 + b_i^2 + b_j^2)
/// with respect to the rows it touches.
struct TripleGradient {
  std::vector<double> user;
  std::vector<double> positive;
  std::vector<double> negative;
  double positive_bias = 0.0;
  double negative_bias = 0.0;
};

double bpr_objective(const BprModel& model, const BprTriple& t,
                     double regularization);
void bpr_gradient(const BprModel& model, const BprTriple& t,
                  double regularization, TripleGradient& out);

/// Mean -ln sigmoid(x_ui - x_uj) over `triples`, unregularized.
double bpr_log_loss(const BprModel& model, std::span<const BprTriple> triples);

/// Factors drawn from N(0, init_stddev^2) with the seeded generator; zero
/// biases.
BprModel init_bpr(std::size_t num_users, std::size_t num_items,
                  const BprHyperParams& hp);

using EpochCallback = std::function<void(int epoch, const BprModel&)>;

/// SGD on uniformly sampled (user, positive, negative) triples, |train|
/// steps per epoch. Deterministic for a given seed. The callback, if set,
/// runs after each epoch.
BprModel train_bpr(const InteractionSet& train, const BprHyperParams& hp,
                   const EpochCallback& on_epoch = {});

/// Throws Error(kUnknownEntity) for out-of-range indices.
double score(const BprModel& model, std::uint32_t user, std::uint32_t item);

struct ScoredItem {
  std::uint32_t item = 0;
  double score = 0.0;

  friend bool operator==(const ScoredItem&, const ScoredItem&) = default;
};

struct RankedList {
  std::uint32_t user = 0;
  std::vector<ScoredItem> items;  // score descending, then item ascending
  int n = 0;
};

RankedList recommend_top_n(const BprModel& model, const SeenItems& seen,
                           std::uint32_t user, int n = 20);

/// Fills `scores` (size num_items) with the scores of every item for `user`.
using UserScorer =
    std::function<void(std::uint32_t user, std::span<double> scores)>;

/// Macro-averaged AUC over users with at least one test item. Negatives are
/// items in neither the user's train nor test set; tied pairs count 1/2.
double evaluate_auc(const UserScorer& scorer, const Split& split);
double evaluate_auc(const BprModel& model, const Split& split);

/// Versioned little-endian binary container; round-trips bit-exactly.
void save_model(const BprModel& model, const std::filesystem::path& path);
BprModel load_model(const std::filesystem::path& path);

}  // namespace harmlens
