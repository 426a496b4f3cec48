#include "harmlens/harms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "harmlens/error.hpp"

namespace harmlens {
namespace {

void check_sizes(const CategoryDistribution& p, const CategoryDistribution& q) {
  if (p.size() != q.size() || p.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "distributions must be non-empty and of equal size");
  }
}

void check_smoothing(double weight, const char* name) {
  if (!(weight >= 0.0 && weight < 1.0)) {
    throw Error(ErrorCode::kInvalidSmoothing,
                std::string(name) + " must be in [0, 1), got " +
                    std::to_string(weight));
  }
}

// Sum_c a(c) ln(a(c) / b(c)) over plain vectors; 0 ln(0/x) = 0.
double kl_sum(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    if (a[c] > 0.0) acc += a[c] * std::log(a[c] / b[c]);
  }
  return acc;
}

std::vector<double> mix_uniform(const CategoryDistribution& x, double eps) {
  const double u = eps / static_cast<double>(x.size());
  std::vector<double> out(x.size());
  for (std::size_t c = 0; c < x.size(); ++c) out[c] = (1.0 - eps) * x[c] + u;
  return out;
}

}  // namespace

double kl_divergence(const CategoryDistribution& p,
                     const CategoryDistribution& q, double alpha) {
  check_smoothing(alpha, "alpha");
  check_sizes(p, q);
  std::vector<double> q_smoothed(q.size());
  for (std::size_t c = 0; c < q.size(); ++c) {
    q_smoothed[c] = (1.0 - alpha) * q[c] + alpha * p[c];
  }
  return kl_sum(p.mass(), q_smoothed);
}

double symmetric_divergence(const CategoryDistribution& p,
                            const CategoryDistribution& q, double eps,
                            DivergenceForm form) {
  check_smoothing(eps, "eps");
  check_sizes(p, q);
  const auto ps = mix_uniform(p, eps);
  const auto qs = mix_uniform(q, eps);
  if (form == DivergenceForm::kJensenShannonMidpoint) {
    std::vector<double> m(ps.size());
    for (std::size_t c = 0; c < m.size(); ++c) m[c] = 0.5 * (ps[c] + qs[c]);
    return 0.5 * (kl_sum(ps, m) + kl_sum(qs, m));
  }
  return 0.5 * (kl_sum(ps, qs) + kl_sum(qs, ps));
}

double entropy(const CategoryDistribution& p) {
  double acc = 0.0;
  for (double x : p.mass()) {
    if (x > 0.0) acc -= x * std::log(x);
  }
  return acc;
}

std::size_t Histogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

HarmProfile harm_profile(const CategoryDistribution& p,
                         const CategoryDistribution& q,
                         const PopulationStats& pop, int user_id) {
  const auto& opt = pop.options;
  HarmProfile h;
  h.user_id = user_id;
  h.mc = kl_divergence(p, q, opt.alpha);
  h.st = symmetric_divergence(p, pop.mean_actual, opt.eps, opt.form) -
         symmetric_divergence(q, pop.mean_predicted, opt.eps, opt.form);
  h.dv_actual = entropy(p);
  h.dv_predicted = entropy(q);
  h.fb = h.dv_predicted - h.dv_actual;
  return h;
}

HarmSummary summarize(std::span<const double> values, int bins) {
  if (values.empty()) {
    throw Error(ErrorCode::kInsufficientData, "cannot summarize zero values");
  }
  if (bins < 1) throw Error(ErrorCode::kInvalidArgument, "bins must be >= 1");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  HarmSummary s;
  s.min = sorted.front();
  s.max = sorted.back();
  s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) /
           static_cast<double>(sorted.size());
  const std::size_t mid = sorted.size() / 2;
  s.median = sorted.size() % 2 == 1 ? sorted[mid]
                                    : 0.5 * (sorted[mid - 1] + sorted[mid]);
  s.histogram.lo = s.min;
  s.histogram.hi = s.max;
  s.histogram.counts.assign(static_cast<std::size_t>(bins), 0);
  const double width = (s.max - s.min) / bins;
  for (double v : values) {
    std::size_t bin = 0;
    if (width > 0.0) {
      bin = static_cast<std::size_t>(std::floor((v - s.min) / width));
      bin = std::min(bin, static_cast<std::size_t>(bins - 1));
    }
    ++s.histogram.counts[bin];
  }
  return s;
}

PopulationHarms compute_population_harms(
    std::span<const CategoryDistribution> all_p,
    std::span<const CategoryDistribution> all_q, std::span<const int> user_ids,
    const HarmOptions& options) {
  if (all_p.empty() || all_p.size() != all_q.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "actual and predicted lists must be non-empty and aligned");
  }
  if (!user_ids.empty() && user_ids.size() != all_p.size()) {
    throw Error(ErrorCode::kInvalidArgument, "user ids are not aligned");
  }
  check_smoothing(options.alpha, "alpha");
  check_smoothing(options.eps, "eps");

  PopulationHarms out;
  auto& stats = out.stats;
  stats.options = options;
  stats.num_users = all_p.size();
  stats.mean_actual = mean_distribution(all_p);
  stats.mean_predicted = mean_distribution(all_q);

  out.profiles.reserve(all_p.size());
  std::vector<double> mc;
  std::vector<double> st;
  std::vector<double> fb;
  for (std::size_t u = 0; u < all_p.size(); ++u) {
    const int id = user_ids.empty() ? static_cast<int>(u) : user_ids[u];
    out.profiles.push_back(harm_profile(all_p[u], all_q[u], stats, id));
    mc.push_back(out.profiles.back().mc);
    st.push_back(out.profiles.back().st);
    fb.push_back(out.profiles.back().fb);
  }
  stats.mc = summarize(mc, options.histogram_bins);
  stats.st = summarize(st, options.histogram_bins);
  stats.fb = summarize(fb, options.histogram_bins);
  stats.system_mc = stats.mc.mean;
  return out;
}

PopulationStats population_stats(std::span<const CategoryDistribution> all_p,
                                 std::span<const CategoryDistribution> all_q,
                                 const HarmOptions& options) {
  return compute_population_harms(all_p, all_q, {}, options).stats;
}

}  // namespace harmlens
