#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "harmlens/distribution.hpp"

namespace harmlens {

/// Which quantity symmetric_divergence() computes. The default averages the
/// two KL directions; the midpoint form is the textbook Jensen-Shannon
/// divergence against m = (p + q) / 2.
enum class DivergenceForm { kSymmetrizedKl, kJensenShannonMidpoint };

struct HarmOptions {
  double alpha = 0.01;  // miscalibration smoothing toward p
  double eps = 0.01;    // uniform smoothing for the symmetric divergence
  DivergenceForm form = DivergenceForm::kSymmetrizedKl;
  int histogram_bins = 40;
};

/// Sum_c p(c) ln(p(c) / q~(c)) with q~ = (1 - alpha) q + alpha p.
/// Terms with p(c) = 0 contribute 0. Throws Error(kInvalidSmoothing) unless
/// alpha is in [0, 1).
double kl_divergence(const CategoryDistribution& p,
                     const CategoryDistribution& q, double alpha = 0.01);

/// Both arguments are first mixed with the uniform distribution,
/// x~ = (1 - eps) x + eps / n, then compared with `form`.
/// Exactly symmetric in (p, q). Throws Error(kInvalidSmoothing) unless eps
/// is in [0, 1).
double symmetric_divergence(
    const CategoryDistribution& p, const CategoryDistribution& q,
    double eps = 0.01, DivergenceForm form = DivergenceForm::kSymmetrizedKl);

/// Natural-log Shannon entropy with 0 ln 0 = 0.
double entropy(const CategoryDistribution& p);

struct HarmProfile {
  int user_id = 0;
  double mc = 0.0;            // miscalibration, >= 0
  double st = 0.0;            // > 0 stereotyping, < 0 inverse stereotyping
  double fb = 0.0;            // < 0 filter bubble, > 0 inflated diversity
  double dv_actual = 0.0;     // entropy(p)
  double dv_predicted = 0.0;  // entropy(q)

  friend bool operator==(const HarmProfile&, const HarmProfile&) = default;
};

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> counts;  // equal-width bins over [lo, hi]

  std::size_t total() const;
};

struct HarmSummary {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double median = 0.0;
  Histogram histogram;
};

struct PopulationStats {
  CategoryDistribution mean_actual;     // unweighted mean of p over users
  CategoryDistribution mean_predicted;  // unweighted mean of q over users
  double system_mc = 0.0;               // mean over users of mc
  HarmSummary mc;
  HarmSummary st;
  HarmSummary fb;
  std::size_t num_users = 0;
  HarmOptions options;
};

/// Harms of one user against precomputed population means.
HarmProfile harm_profile(const CategoryDistribution& p,
                         const CategoryDistribution& q,
                         const PopulationStats& pop, int user_id = 0);

/// Means, per-user harms and their summaries. `all_p` and `all_q` are
/// aligned by user and non-empty.
PopulationStats population_stats(std::span<const CategoryDistribution> all_p,
                                 std::span<const CategoryDistribution> all_q,
                                 const HarmOptions& options = {});

/// min/max/mean/median and a `bins`-bin histogram over the observed range.
/// The maximum lands in the last bin; a constant sample fills bin 0.
HarmSummary summarize(std::span<const double> values, int bins);

struct PopulationHarms {
  PopulationStats stats;
  std::vector<HarmProfile> profiles;  // aligned with the inputs
};

/// population_stats() plus the profile of every user. `user_ids` is aligned
/// with `all_p`.
PopulationHarms compute_population_harms(
    std::span<const CategoryDistribution> all_p,
    std::span<const CategoryDistribution> all_q, std::span<const int> user_ids,
    const HarmOptions& options = {});

}  // namespace harmlens
