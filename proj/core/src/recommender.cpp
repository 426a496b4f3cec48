#include "harmlens/recommender.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <random>

#include "harmlens/error.hpp"

namespace harmlens {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  return acc;
}

// sigmoid(-x), computed without overflow for large |x|.
double sigmoid_neg(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

// -ln sigmoid(x) = ln(1 + e^-x), stable for both signs.
double neg_log_sigmoid(double x) {
  if (x >= 0.0) return std::log1p(std::exp(-x));
  return -x + std::log1p(std::exp(x));
}

double pair_margin(const BprModel& m, const BprTriple& t) {
  const auto w = m.user_factors(t.user);
  return dot(w, m.item_factors(t.positive)) + m.item_bias(t.positive) -
         dot(w, m.item_factors(t.negative)) - m.item_bias(t.negative);
}

void check_triple(const BprModel& m, const BprTriple& t) {
  if (t.user >= m.num_users() || t.positive >= m.num_items() ||
      t.negative >= m.num_items()) {
    throw Error(ErrorCode::kUnknownEntity, "triple index out of range");
  }
}

void fill_gaussian(std::mt19937_64& rng, double stddev,
                   std::vector<double>& out) {
  std::normal_distribution<double> normal(0.0, stddev);
  for (double& x : out) x = normal(rng);
}

// k-th (0-based) item index in [0, num_items) that is not in `seen`.
std::uint32_t kth_unseen(std::span<const std::uint32_t> seen, std::uint32_t k) {
  std::uint32_t candidate = k;
  for (auto s : seen) {
    if (s <= candidate) {
      ++candidate;
    } else {
      break;
    }
  }
  return candidate;
}

template <typename T>
void put(std::ostream& out, T value) {
  std::uint64_t bits = 0;
  if constexpr (sizeof(T) == 8) {
    bits = std::bit_cast<std::uint64_t>(value);
  } else {
    bits = static_cast<std::uint32_t>(std::bit_cast<std::uint32_t>(value));
  }
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    out.put(static_cast<char>((bits >> (8 * b)) & 0xFF));
  }
}

template <typename T>
T get(std::istream& in) {
  std::uint64_t bits = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) {
      throw Error(ErrorCode::kSnapshotCorrupt, "model file truncated");
    }
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(c))
            << (8 * b);
  }
  if constexpr (sizeof(T) == 8) {
    return std::bit_cast<T>(bits);
  } else {
    return std::bit_cast<T>(static_cast<std::uint32_t>(bits));
  }
}

constexpr char kModelMagic[8] = {'H', 'L', 'B', 'P', 'R', 'M', '\0', '\0'};
constexpr std::uint32_t kModelVersion = 1;

}  // namespace

BprModel::BprModel(std::size_t num_users, std::size_t num_items,
                   const BprHyperParams& hp)
    : hp_(hp),
      num_users_(num_users),
      num_items_(num_items),
      user_factors_(num_users * static_cast<std::size_t>(hp.factors), 0.0),
      item_factors_(num_items * static_cast<std::size_t>(hp.factors), 0.0),
      item_bias_(num_items, 0.0) {
  if (hp.factors < 1) {
    throw Error(ErrorCode::kInvalidArgument, "factors must be >= 1");
  }
}

bool BprModel::all_finite() const {
  const auto finite = [](double x) { return std::isfinite(x); };
  return std::all_of(user_factors_.begin(), user_factors_.end(), finite) &&
         std::all_of(item_factors_.begin(), item_factors_.end(), finite) &&
         std::all_of(item_bias_.begin(), item_bias_.end(), finite);
}

SeenItems::SeenItems(const InteractionSet& data)
    : by_user_(data.items_by_user()) {
  for (auto& items : by_user_) {
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
  }
}

bool SeenItems::contains(std::uint32_t user, std::uint32_t item) const {
  const auto& items = by_user_[user];
  return std::binary_search(items.begin(), items.end(), item);
}

double bpr_objective(const BprModel& model, const BprTriple& t,
                     double regularization) {
  check_triple(model, t);
  const auto sq = [](std::span<const double> v) { return dot(v, v); };
  const double bi = model.item_bias(t.positive);
  const double bj = model.item_bias(t.negative);
  const double penalty = sq(model.user_factors(t.user)) +
                         sq(model.item_factors(t.positive)) +
                         sq(model.item_factors(t.negative)) + bi * bi +
                         bj * bj;
  return neg_log_sigmoid(pair_margin(model, t)) +
         0.5 * regularization * penalty;
}

void bpr_gradient(const BprModel& model, const BprTriple& t,
                  double regularization, TripleGradient& out) {
  check_triple(model, t);
  const std::size_t d = model.factors();
  out.user.resize(d);
  out.positive.resize(d);
  out.negative.resize(d);

  const auto w = model.user_factors(t.user);
  const auto hi = model.item_factors(t.positive);
  const auto hj = model.item_factors(t.negative);
  // d/dx of -ln sigmoid(x) is -sigmoid(-x).
  const double g = -sigmoid_neg(pair_margin(model, t));
  for (std::size_t k = 0; k < d; ++k) {
    out.user[k] = g * (hi[k] - hj[k]) + regularization * w[k];
    out.positive[k] = g * w[k] + regularization * hi[k];
    out.negative[k] = -g * w[k] + regularization * hj[k];
  }
  out.positive_bias = g + regularization * model.item_bias(t.positive);
  out.negative_bias = -g + regularization * model.item_bias(t.negative);
}

double bpr_log_loss(const BprModel& model,
                    std::span<const BprTriple> triples) {
  if (triples.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& t : triples) {
    check_triple(model, t);
    acc += neg_log_sigmoid(pair_margin(model, t));
  }
  return acc / static_cast<double>(triples.size());
}

BprModel init_bpr(std::size_t num_users, std::size_t num_items,
                  const BprHyperParams& hp) {
  BprModel model(num_users, num_items, hp);
  std::mt19937_64 rng(hp.seed);
  std::vector<double> users(num_users * model.factors());
  std::vector<double> items(num_items * model.factors());
  fill_gaussian(rng, hp.init_stddev, users);
  fill_gaussian(rng, hp.init_stddev, items);
  for (std::size_t u = 0; u < num_users; ++u) {
    std::copy_n(users.begin() + static_cast<std::ptrdiff_t>(u * model.factors()),
                model.factors(), model.user_factors(u).begin());
  }
  for (std::size_t i = 0; i < num_items; ++i) {
    std::copy_n(items.begin() + static_cast<std::ptrdiff_t>(i * model.factors()),
                model.factors(), model.item_factors(i).begin());
  }
  return model;
}

BprModel train_bpr(const InteractionSet& train, const BprHyperParams& hp,
                   const EpochCallback& on_epoch) {
  if (train.interactions.empty()) {
    throw Error(ErrorCode::kEmptyDataset, "training set is empty");
  }
  if (hp.factors < 1 || hp.epochs < 0 || !(hp.learning_rate > 0.0) ||
      hp.regularization < 0.0 || !(hp.init_stddev >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid BPR hyperparameters");
  }
  BprModel model = init_bpr(train.num_users(), train.num_items(), hp);
  const SeenItems seen(train);

  // Sampling draws from its own stream so that epochs = 0 leaves the
  // initialization untouched and adding epochs extends a run.
  std::mt19937_64 rng(hp.seed ^ 0x9E3779B97F4A7C15ULL);
  std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
  TripleGradient grad;
  const double lr = hp.learning_rate;
  const auto num_items = static_cast<std::uint32_t>(train.num_items());

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    for (std::size_t step = 0; step < train.size(); ++step) {
      const auto& x = train.interactions[pick(rng)];
      const auto seen_items = seen.of(x.user);
      const auto unseen =
          num_items - static_cast<std::uint32_t>(seen_items.size());
      if (unseen == 0) continue;
      std::uniform_int_distribution<std::uint32_t> pick_negative(0,
                                                                 unseen - 1);
      const BprTriple t{x.user, x.item,
                        kth_unseen(seen_items, pick_negative(rng))};

      bpr_gradient(model, t, hp.regularization, grad);
      auto w = model.user_factors(t.user);
      auto hi = model.item_factors(t.positive);
      auto hj = model.item_factors(t.negative);
      for (std::size_t k = 0; k < w.size(); ++k) {
        w[k] -= lr * grad.user[k];
        hi[k] -= lr * grad.positive[k];
        hj[k] -= lr * grad.negative[k];
      }
      model.item_bias(t.positive) -= lr * grad.positive_bias;
      model.item_bias(t.negative) -= lr * grad.negative_bias;
    }
    if (on_epoch) on_epoch(epoch + 1, model);
  }
  return model;
}

double score(const BprModel& model, std::uint32_t user, std::uint32_t item) {
  if (user >= model.num_users()) {
    throw Error(ErrorCode::kUnknownEntity,
                "unknown user index " + std::to_string(user));
  }
  if (item >= model.num_items()) {
    throw Error(ErrorCode::kUnknownEntity,
                "unknown item index " + std::to_string(item));
  }
  return dot(model.user_factors(user), model.item_factors(item)) +
         model.item_bias(item);
}

RankedList recommend_top_n(const BprModel& model, const SeenItems& seen,
                           std::uint32_t user, int n) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "n must be >= 1");
  if (user >= model.num_users() || user >= seen.num_users()) {
    throw Error(ErrorCode::kUnknownEntity,
                "unknown user index " + std::to_string(user));
  }
  const auto w = model.user_factors(user);
  std::vector<ScoredItem> candidates;
  candidates.reserve(model.num_items());
  const auto seen_items = seen.of(user);
  auto next_seen = seen_items.begin();
  for (std::uint32_t i = 0; i < model.num_items(); ++i) {
    if (next_seen != seen_items.end() && *next_seen == i) {
      ++next_seen;
      continue;
    }
    candidates.push_back(
        {i, dot(w, model.item_factors(i)) + model.item_bias(i)});
  }
  const auto keep =
      std::min(candidates.size(), static_cast<std::size_t>(n));
  std::partial_sort(candidates.begin(),
                    candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                    candidates.end(),
                    [](const ScoredItem& a, const ScoredItem& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return a.item < b.item;
                    });
  candidates.resize(keep);
  return RankedList{user, std::move(candidates), n};
}

double evaluate_auc(const UserScorer& scorer, const Split& split) {
  if (split.test.interactions.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "test set is empty");
  }
  const SeenItems train_seen(split.train);
  const SeenItems test_seen(split.test);
  const std::size_t num_items = split.train.num_items();
  std::vector<double> scores(num_items);
  std::vector<double> negatives;
  double auc_sum = 0.0;
  std::size_t users = 0;

  for (std::uint32_t u = 0; u < test_seen.num_users(); ++u) {
    const auto positives = test_seen.of(u);
    if (positives.empty()) continue;
    scorer(u, scores);
    negatives.clear();
    for (std::uint32_t i = 0; i < num_items; ++i) {
      if (!train_seen.contains(u, i) && !test_seen.contains(u, i)) {
        negatives.push_back(scores[i]);
      }
    }
    if (negatives.empty()) continue;
    std::sort(negatives.begin(), negatives.end());
    double correct = 0.0;
    for (auto i : positives) {
      const auto lo =
          std::lower_bound(negatives.begin(), negatives.end(), scores[i]);
      const auto hi = std::upper_bound(lo, negatives.end(), scores[i]);
      correct += static_cast<double>(lo - negatives.begin()) +
                 0.5 * static_cast<double>(hi - lo);
    }
    auc_sum += correct / (static_cast<double>(positives.size()) *
                          static_cast<double>(negatives.size()));
    ++users;
  }
  return users == 0 ? 0.0 : auc_sum / static_cast<double>(users);
}

double evaluate_auc(const BprModel& model, const Split& split) {
  return evaluate_auc(
      [&model](std::uint32_t u, std::span<double> scores) {
        const auto w = model.user_factors(u);
        for (std::size_t i = 0; i < scores.size(); ++i) {
          scores[i] = dot(w, model.item_factors(i)) + model.item_bias(i);
        }
      },
      split);
}

void save_model(const BprModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::kInvalidArgument,
                "cannot write model file " + path.string());
  }
  out.write(kModelMagic, sizeof(kModelMagic));
  const auto& hp = model.hyperparams();
  put(out, kModelVersion);
  put(out, static_cast<std::int32_t>(hp.factors));
  put(out, hp.learning_rate);
  put(out, hp.regularization);
  put(out, static_cast<std::int32_t>(hp.epochs));
  put(out, hp.seed);
  put(out, hp.init_stddev);
  put(out, static_cast<std::uint64_t>(model.num_users()));
  put(out, static_cast<std::uint64_t>(model.num_items()));
  for (double x : model.all_user_factors()) put(out, x);
  for (double x : model.all_item_factors()) put(out, x);
  for (double x : model.all_item_bias()) put(out, x);
  if (!out) {
    throw Error(ErrorCode::kInvalidArgument,
                "failed writing model file " + path.string());
  }
}

BprModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kDatasetNotFound,
                "model file not found: " + path.string());
  }
  char magic[sizeof(kModelMagic)] = {};
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(std::begin(magic), std::end(magic),
                         std::begin(kModelMagic))) {
    throw Error(ErrorCode::kSnapshotCorrupt, "not a model file");
  }
  if (get<std::uint32_t>(in) != kModelVersion) {
    throw Error(ErrorCode::kSnapshotCorrupt, "unsupported model version");
  }
  BprHyperParams hp;
  hp.factors = get<std::int32_t>(in);
  hp.learning_rate = get<double>(in);
  hp.regularization = get<double>(in);
  hp.epochs = get<std::int32_t>(in);
  hp.seed = get<std::uint64_t>(in);
  hp.init_stddev = get<double>(in);
  const auto num_users = get<std::uint64_t>(in);
  const auto num_items = get<std::uint64_t>(in);
  if (hp.factors < 1 || num_users > (1ULL << 32) || num_items > (1ULL << 32)) {
    throw Error(ErrorCode::kSnapshotCorrupt, "implausible model dimensions");
  }
  BprModel model(num_users, num_items, hp);
  for (double& x : model.user_factors_) x = get<double>(in);
  for (double& x : model.item_factors_) x = get<double>(in);
  for (double& x : model.item_bias_) x = get<double>(in);
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::kSnapshotCorrupt, "trailing bytes in model file");
  }
  return model;
}

}  // namespace harmlens
