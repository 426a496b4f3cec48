#include <benchmark/benchmark.h>

#include <filesystem>
#include <random>

#include "harmlens/counterfactual.hpp"
#include "harmlens/harms.hpp"
#include "harmlens/ingest.hpp"
#include "harmlens/recommender.hpp"
#include "harmlens/space.hpp"
#include "harmlens/synthetic.hpp"

using namespace harmlens;

namespace {

CategoryDistribution random_distribution(std::mt19937_64& rng, std::size_t n) {
  std::gamma_distribution<double> g(1.0, 1.0);
  std::vector<double> mass(n);
  double sum = 0.0;
  for (double& m : mass) sum += (m = g(rng));
  for (double& m : mass) m /= sum;
  return CategoryDistribution::from_mass(mass);
}

std::vector<CategoryDistribution> random_population(std::size_t users,
                                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<CategoryDistribution> out;
  for (std::size_t u = 0; u < users; ++u) out.push_back(random_distribution(rng, 18));
  return out;
}

// Synthetic split shared by the recommender benchmarks.
const Split& synthetic_split() {
  static const Split split = [] {
    const auto dir = std::filesystem::temp_directory_path() / "harmlens_bench_data";
    SyntheticOptions o;
    o.users = 1000;
    o.items = 600;
    write_synthetic_movielens(dir, o);
    auto s = split_chronological(preprocess(load_movielens(dir)));
    std::filesystem::remove_all(dir);
    return s;
  }();
  return split;
}

void BM_HarmProfile(benchmark::State& state) {
  const auto ps = random_population(64, 1);
  const auto qs = random_population(64, 2);
  PopulationStats pop;
  pop.mean_actual = mean_distribution(ps);
  pop.mean_predicted = mean_distribution(qs);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(harm_profile(ps[i % 64], qs[i % 64], pop));
    ++i;
  }
}
BENCHMARK(BM_HarmProfile);

void BM_PopulationHarms(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto ps = random_population(n, 3);
  const auto qs = random_population(n, 4);
  std::vector<int> ids(n);
  for (std::size_t u = 0; u < n; ++u) ids[u] = static_cast<int>(u + 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(compute_population_harms(ps, qs, ids));
  }
}
BENCHMARK(BM_PopulationHarms)->Arg(1000)->Arg(5180);

void BM_TrainEpoch(benchmark::State& state) {
  const auto& split = synthetic_split();
  BprHyperParams hp;
  hp.epochs = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_bpr(split.train, hp));
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(split.train.size()));
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

void BM_RecommendTopN(benchmark::State& state) {
  const auto& split = synthetic_split();
  BprHyperParams hp;
  hp.epochs = 0;
  const auto model = train_bpr(split.train, hp);
  const SeenItems seen(split.train);
  std::uint32_t u = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(recommend_top_n(model, seen, u, 20));
    u = (u + 1) % static_cast<std::uint32_t>(model.num_users());
  }
}
BENCHMARK(BM_RecommendTopN);

void BM_EvaluateAuc(benchmark::State& state) {
  const auto& split = synthetic_split();
  BprHyperParams hp;
  hp.epochs = 0;
  const auto model = train_bpr(split.train, hp);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_auc(model, split));
}
BENCHMARK(BM_EvaluateAuc)->Unit(benchmark::kMillisecond);

void BM_Projection(benchmark::State& state) {
  const auto ps = random_population(static_cast<std::size_t>(state.range(0)), 5);
  for (auto _ : state) benchmark::DoNotOptimize(project_2d(ps));
}
BENCHMARK(BM_Projection)->Arg(1000)->Arg(5180)->Unit(benchmark::kMillisecond);

void BM_KMedoids(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto ps = random_population(n, 6);
  std::vector<int> ids(n);
  for (std::size_t u = 0; u < n; ++u) ids[u] = static_cast<int>(u + 1);
  for (auto _ : state) benchmark::DoNotOptimize(k_medoids(ids, ps, 8));
}
BENCHMARK(BM_KMedoids)->Arg(250)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Counterfactual(benchmark::State& state) {
  std::mt19937_64 rng(7);
  CounterfactualPopulation pop;
  for (int g = 0; g < 18; ++g) pop.genre_catalog.push_back("G" + std::to_string(g));
  const int ages[] = {1, 18, 25, 35, 45, 50, 56};
  for (int id = 1; id <= 5180; ++id) {
    CounterfactualUser u;
    u.user_id = id;
    u.demographics = {rng() % 3 == 0 ? 'F' : 'M', ages[rng() % 7],
                      static_cast<int>(rng() % 21)};
    u.p = random_distribution(rng, 18);
    u.profile.user_id = id;
    pop.users.push_back(std::move(u));
  }
  CounterfactualQuery q;
  q.kind = CounterfactualKind::kDemographic;
  q.attribute = DemographicAttribute::kGender;
  int id = 1;
  for (auto _ : state) {
    q.user_id = id;
    q.target_value = pop.users[id - 1].demographics.gender == 'M' ? "F" : "M";
    benchmark::DoNotOptimize(run_counterfactual(q, pop));
    id = id % 5180 + 1;
  }
}
BENCHMARK(BM_Counterfactual);

}  // namespace

BENCHMARK_MAIN();
