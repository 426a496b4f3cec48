#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "harmlens/error.hpp"
#include "harmlens/harms.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace harmlens;
using fixtures::dist;

namespace {

oracle::Vec vec(const CategoryDistribution& d) {
  return {d.mass().begin(), d.mass().end()};
}

PopulationStats flat_population(std::size_t n) {
  PopulationStats pop;
  pop.mean_actual = CategoryDistribution::uniform(n);
  pop.mean_predicted = CategoryDistribution::uniform(n);
  return pop;
}

}  // namespace

TEST_CASE("hand-derived values") {
  const auto p = dist({0.5, 0.5});
  const auto q = dist({0.75, 0.25});
  CHECK(kl_divergence(p, q, 0.0) == doctest::Approx(0.143841).epsilon(1e-6));
  CHECK(kl_divergence(dist({1.0, 0.0}), p, 0.0) ==
        doctest::Approx(std::numbers::ln2).epsilon(1e-12));
  CHECK(kl_divergence(p, p) == 0.0);

  CHECK(symmetric_divergence(p, q, 0.0) == doctest::Approx(0.137327).epsilon(1e-6));
  CHECK(symmetric_divergence(q, p, 0.0) == symmetric_divergence(p, q, 0.0));
  CHECK(symmetric_divergence(dist({0.9, 0.1}), p, 0.0) ==
        doctest::Approx(0.439445).epsilon(1e-6));
  CHECK(symmetric_divergence(q, q) == 0.0);

  CHECK(entropy(CategoryDistribution::uniform(18)) ==
        doctest::Approx(std::log(18.0)).epsilon(1e-14));
  CHECK(entropy(CategoryDistribution::one_hot(18, 3)) == 0.0);
  CHECK(entropy(p) == doctest::Approx(std::numbers::ln2).epsilon(1e-14));
}

TEST_CASE("harm profile fixtures") {
  SUBCASE("everything equal gives zero harm") {
    const auto p = dist({0.2, 0.3, 0.5});
    PopulationStats pop;
    pop.mean_actual = p;
    pop.mean_predicted = p;
    const auto h = harm_profile(p, p, pop, 7);
    CHECK(h.user_id == 7);
    CHECK(h.mc == 0.0);
    CHECK(h.st == 0.0);
    CHECK(h.fb == 0.0);
  }
  SUBCASE("stereotyping without smoothing") {
    PopulationStats pop = flat_population(2);
    pop.options.alpha = 0.0;
    pop.options.eps = 0.0;
    const auto h = harm_profile(dist({0.9, 0.1}), dist({0.6, 0.4}), pop);
    CHECK(h.st == doctest::Approx(0.419172).epsilon(1e-6));
    CHECK(h.st > 0.0);
  }
  SUBCASE("filter bubble") {
    PopulationStats pop = flat_population(4);
    const auto h = harm_profile(CategoryDistribution::uniform(4),
                                CategoryDistribution::one_hot(4, 1), pop);
    CHECK(h.fb == doctest::Approx(-1.386294).epsilon(1e-6));
    CHECK(h.fb == h.dv_predicted - h.dv_actual);
  }
}

TEST_CASE("random pairs agree with the summation oracle") {
  std::mt19937_64 rng(20240601);
  const auto mean_p = fixtures::random_simplex(rng, 18);
  const auto mean_q = fixtures::random_simplex(rng, 18);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const double zeros = trial % 2 == 0 ? 0.0 : 0.4;
    const auto p = fixtures::random_simplex(rng, 18, zeros);
    const auto q = fixtures::random_simplex(rng, 18, zeros);
    for (auto form : {DivergenceForm::kSymmetrizedKl,
                      DivergenceForm::kJensenShannonMidpoint}) {
      PopulationStats pop;
      pop.mean_actual = mean_p;
      pop.mean_predicted = mean_q;
      pop.options.form = form;
      const auto h = harm_profile(p, q, pop);
      const auto d = form == DivergenceForm::kSymmetrizedKl ? oracle::sym_kl
                                                            : oracle::js_mid;
      const double mc = oracle::kl(vec(p), vec(q), 0.01);
      const double st = d(vec(p), vec(mean_p), 0.01) - d(vec(q), vec(mean_q), 0.01);
      const double fb = oracle::entropy(vec(q)) - oracle::entropy(vec(p));
      worst = std::max({worst, std::abs(h.mc - mc), std::abs(h.st - st),
                        std::abs(h.fb - fb)});
      CHECK(std::isfinite(h.mc));
      CHECK(std::isfinite(h.st));
    }
    if (zeros == 0.0) {
      worst = std::max(worst, std::abs(kl_divergence(p, q, 0.0) -
                                       oracle::kl(vec(p), vec(q), 0.0)));
    }
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("divergence properties over random samples") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 500; ++trial) {
    const auto p = fixtures::random_simplex(rng, 18, 0.3);
    const auto q = fixtures::random_simplex(rng, 18, 0.3);
    CHECK(kl_divergence(p, q) >= 0.0);
    CHECK(symmetric_divergence(p, q) == symmetric_divergence(q, p));
    CHECK(symmetric_divergence(p, q, 0.01, DivergenceForm::kJensenShannonMidpoint) ==
          symmetric_divergence(q, p, 0.01, DivergenceForm::kJensenShannonMidpoint));
    const double h = entropy(p);
    CHECK(h >= 0.0);
    CHECK(h < std::log(18.0));
  }
}

TEST_CASE("smoothing parameters are validated") {
  const auto p = dist({0.5, 0.5});
  for (double bad : {-0.1, 1.0, 2.0, std::nan("")}) {
    CHECK_THROWS_AS(kl_divergence(p, p, bad), Error);
    CHECK_THROWS_AS(symmetric_divergence(p, p, bad), Error);
  }
  try {
    kl_divergence(p, p, 1.0);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidSmoothing);
  }
}

TEST_CASE("population statistics") {
  SUBCASE("identical users") {
    const auto p = dist({0.1, 0.2, 0.7});
    const std::vector<CategoryDistribution> all = {p, p};
    const auto s = population_stats(all, all);
    CHECK(s.mean_actual == p);
    CHECK(s.system_mc == 0.0);
  }
  SUBCASE("three hand-set users") {
    const std::vector<CategoryDistribution> ps = {
        dist({1.0, 0.0, 0.0}), dist({0.5, 0.5, 0.0}), dist({0.2, 0.2, 0.6})};
    const std::vector<CategoryDistribution> qs = {
        dist({0.0, 1.0, 0.0}), dist({0.25, 0.25, 0.5}), dist({0.3, 0.3, 0.4})};
    const std::vector<int> ids = {10, 20, 30};
    const auto r = compute_population_harms(ps, qs, ids);
    const double pbar[3] = {1.7 / 3, 0.7 / 3, 0.6 / 3};
    const double qbar[3] = {0.55 / 3, 1.55 / 3, 0.9 / 3};
    for (int c = 0; c < 3; ++c) {
      CHECK(std::abs(r.stats.mean_actual[c] - pbar[c]) < 1e-12);
      CHECK(std::abs(r.stats.mean_predicted[c] - qbar[c]) < 1e-12);
    }
    double mc_sum = 0.0;
    for (std::size_t u = 0; u < 3; ++u) {
      CHECK(r.profiles[u].user_id == ids[u]);
      mc_sum += r.profiles[u].mc;
    }
    CHECK(r.stats.system_mc == doctest::Approx(mc_sum / 3).epsilon(1e-15));
    CHECK(r.stats.num_users == 3);
    CHECK(r.stats.mc.histogram.total() == 3);
    CHECK(r.stats.st.histogram.total() == 3);
    CHECK(r.stats.fb.histogram.total() == 3);
    CHECK(r.stats.mc.histogram.counts.size() == 40);
  }
  SUBCASE("misaligned inputs") {
    const std::vector<CategoryDistribution> one = {dist({1.0})};
    const std::vector<CategoryDistribution> two = {dist({1.0}), dist({1.0})};
    const std::vector<int> ids = {1};
    CHECK_THROWS_AS(compute_population_harms(one, two, ids), Error);
  }
}

TEST_CASE("summaries") {
  const std::vector<double> mc = {0.1, 0.3};
  const auto s = summarize(mc, 40);
  CHECK(s.mean == doctest::Approx(0.2));
  CHECK(s.median == doctest::Approx(0.2));
  CHECK(s.histogram.counts.front() == 1);
  CHECK(s.histogram.counts.back() == 1);

  const std::vector<double> flat = {2.0, 2.0, 2.0};
  const auto f = summarize(flat, 4);
  CHECK(f.histogram.counts[0] == 3);
  CHECK(f.histogram.total() == 3);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  std::vector<double> xs(1001);
  for (double& x : xs) x = n(rng);
  const auto r = summarize(xs, 40);
  CHECK(r.histogram.total() == xs.size());
  std::nth_element(xs.begin(), xs.begin() + 500, xs.end());
  CHECK(r.median == xs[500]);
}
