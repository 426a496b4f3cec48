// Acceptance report: one PASS/FAIL/SKIP line per headline criterion.
// Criteria that need MovieLens-1M read it from --ml1m or HARMLENS_ML1M_DIR
// and are skipped when neither is set.
#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

#include "harmlens/error.hpp"
#include "harmlens/harms.hpp"
#include "harmlens/ingest.hpp"
#include "harmlens/pipeline.hpp"
#include "harmlens/recommender.hpp"
#include "harmlens/service.hpp"
#include "harmlens/snapshot.hpp"
#include "harmlens/space.hpp"
#include "harmlens/synthetic.hpp"
#include "support/cf_agreement.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace harmlens;

namespace {

enum class Verdict { kPass, kFail, kSkip };

struct Outcome {
  Verdict verdict = Verdict::kFail;
  std::string detail;
};

Outcome pass_if(bool ok, std::string detail) {
  return {ok ? Verdict::kPass : Verdict::kFail, std::move(detail)};
}

std::string fmt(double x, int digits = 4) {
  std::ostringstream s;
  s << std::setprecision(digits) << x;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

oracle::Vec vec(const CategoryDistribution& d) {
  return {d.mass().begin(), d.mass().end()};
}

// ML-1M pipeline outputs shared by the dataset criteria.
struct Ml1mRun {
  Split split;
  double preprocess_seconds = 0.0;
  double train_seconds = 0.0;
  InteractionSet iterated;
  Snapshot snapshot;
};

Ml1mRun run_ml1m(const std::filesystem::path& dir,
                 const std::filesystem::path& out) {
  Ml1mRun r;
  const auto raw = load_movielens(dir);
  auto t0 = std::chrono::steady_clock::now();
  const auto data = preprocess(raw);
  r.preprocess_seconds = seconds_since(t0);
  r.iterated = preprocess_iterated(raw);
  r.split = split_chronological(data);

  PipelineConfig c;
  c.dataset_dir = dir;
  c.output_dir = out;
  std::ostringstream log;
  const auto report = run_pipeline(c, log);
  for (const auto& s : report.stages) {
    if (s.name == "train") r.train_seconds = s.seconds;
  }
  r.snapshot = read_snapshot(report.snapshot_dir);
  return r;
}

Outcome preprocessing(const Ml1mRun& run) {
  const ReferenceCounts ref;
  const auto& s = run.snapshot.stats;
  const auto delta = [](std::size_t got, std::size_t want) {
    return std::abs(static_cast<double>(got) - static_cast<double>(want)) /
           static_cast<double>(want);
  };
  const double worst = std::max({delta(s.interactions, ref.interactions),
                                 delta(s.users, ref.users),
                                 delta(s.items, ref.items),
                                 delta(s.genres, ref.genres)});
  std::ostringstream d;
  d << s.interactions << " interactions, " << s.users << " users, " << s.items
    << " items, " << s.genres << " genres (max delta " << fmt(100 * worst, 3)
    << "%); iterated filter: " << run.iterated.size() << "/"
    << run.iterated.num_users() << "/" << run.iterated.num_items()
    << "; " << fmt(run.preprocess_seconds, 3) << " s";
  return pass_if(worst <= 0.01 && run.preprocess_seconds < 60.0, d.str());
}

Outcome metric_oracle_suite() {
  double worst = 0.0;
  const auto track = [&](double got, double want) {
    worst = std::max(worst, std::abs(got - want));
  };
  std::mt19937_64 rng(20240601);
  const auto mean_p = fixtures::random_simplex(rng, 18);
  const auto mean_q = fixtures::random_simplex(rng, 18);
  PopulationStats pop;
  pop.mean_actual = mean_p;
  pop.mean_predicted = mean_q;
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = fixtures::random_simplex(rng, 18, trial % 2 == 0 ? 0.0 : 0.4);
    const auto q = fixtures::random_simplex(rng, 18, trial % 2 == 0 ? 0.0 : 0.4);
    const auto h = harm_profile(p, q, pop);
    track(h.mc, oracle::kl(vec(p), vec(q), 0.01));
    track(h.st, oracle::sym_kl(vec(p), vec(mean_p), 0.01) -
                    oracle::sym_kl(vec(q), vec(mean_q), 0.01));
    track(h.fb, oracle::entropy(vec(q)) - oracle::entropy(vec(p)));
  }

  int fixtures_ok = 0;
  const auto near = [&](double got, double want) {
    fixtures_ok += std::abs(got - want) < 5e-7;
  };
  const auto half = fixtures::dist({0.5, 0.5});
  const auto skew = fixtures::dist({0.75, 0.25});
  near(kl_divergence(half, skew, 0.0), 0.143841);
  near(symmetric_divergence(half, skew, 0.0), 0.137327);
  PopulationStats flat2;
  flat2.mean_actual = CategoryDistribution::uniform(2);
  flat2.mean_predicted = CategoryDistribution::uniform(2);
  flat2.options.alpha = 0.0;
  flat2.options.eps = 0.0;
  near(harm_profile(fixtures::dist({0.9, 0.1}), fixtures::dist({0.6, 0.4}), flat2).st,
       0.419172);
  PopulationStats flat4;
  flat4.mean_actual = CategoryDistribution::uniform(4);
  flat4.mean_predicted = CategoryDistribution::uniform(4);
  near(harm_profile(CategoryDistribution::uniform(4),
                    CategoryDistribution::one_hot(4, 1), flat4).fb,
       -1.386294);

  return pass_if(worst < 1e-9 && fixtures_ok == 4,
                 "100 random pairs, worst abs error " + fmt(worst, 3) + "; " +
                     std::to_string(fixtures_ok) + "/4 hand fixtures");
}

double objective_oracle(const BprModel& m, const BprTriple& t, double reg) {
  const auto w = m.user_factors(t.user);
  const auto hi = m.item_factors(t.positive);
  const auto hj = m.item_factors(t.negative);
  double xi = m.item_bias(t.positive);
  double xj = m.item_bias(t.negative);
  double norm = m.item_bias(t.positive) * m.item_bias(t.positive) +
                m.item_bias(t.negative) * m.item_bias(t.negative);
  for (std::size_t k = 0; k < w.size(); ++k) {
    xi += w[k] * hi[k];
    xj += w[k] * hj[k];
    norm += w[k] * w[k] + hi[k] * hi[k] + hj[k] * hj[k];
  }
  return std::log1p(std::exp(-(xi - xj))) + 0.5 * reg * norm;
}

Outcome bpr_gradient_and_determinism() {
  BprHyperParams hp;
  hp.factors = 4;
  hp.init_stddev = 0.5;
  hp.seed = 9;
  const double reg = 0.05;
  const double h = 1e-5;
  BprModel model = init_bpr(5, 5, hp);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> bias(0.0, 0.5);
  for (std::size_t i = 0; i < 5; ++i) model.item_bias(i) = bias(rng);

  double worst = 0.0;
  const auto rel = [](double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale < 1e-8 ? std::abs(a - b) : std::abs(a - b) / scale;
  };
  TripleGradient g;
  for (std::uint32_t u = 0; u < 5; ++u) {
    for (std::uint32_t i = 0; i < 5; ++i) {
      for (std::uint32_t j = 0; j < 5; ++j) {
        if (i == j) continue;
        const BprTriple t{u, i, j};
        bpr_gradient(model, t, reg, g);
        const auto numeric = [&](double& x) {
          const double keep = x;
          x = keep + h;
          const double up = objective_oracle(model, t, reg);
          x = keep - h;
          const double down = objective_oracle(model, t, reg);
          x = keep;
          return (up - down) / (2.0 * h);
        };
        for (std::size_t k = 0; k < 4; ++k) {
          worst = std::max(worst, rel(g.user[k], numeric(model.user_factors(u)[k])));
          worst = std::max(worst, rel(g.positive[k], numeric(model.item_factors(i)[k])));
          worst = std::max(worst, rel(g.negative[k], numeric(model.item_factors(j)[k])));
        }
        worst = std::max(worst, rel(g.positive_bias, numeric(model.item_bias(i))));
        worst = std::max(worst, rel(g.negative_bias, numeric(model.item_bias(j))));
      }
    }
  }

  fixtures::TempDir dir("acc-bpr");
  SyntheticOptions so;
  so.users = 150;
  so.items = 200;
  write_synthetic_movielens(dir.path(), so);
  const auto split = split_chronological(preprocess(load_movielens(dir.path())));
  BprHyperParams train_hp;
  train_hp.epochs = 5;
  const bool identical = train_bpr(split.train, train_hp) == train_bpr(split.train, train_hp);

  return pass_if(worst < 1e-4 && identical,
                 "worst relative gradient error " + fmt(worst, 3) +
                     "; repeated training " +
                     (identical ? "bit-identical" : "differs"));
}

double untrained_auc(const Split& split) {
  BprHyperParams hp;
  hp.epochs = 0;
  return evaluate_auc(train_bpr(split.train, hp), split);
}

Outcome bpr_sanity(const Ml1mRun& run) {
  const double auc = run.snapshot.stats.test_auc;
  const double base = untrained_auc(run.split);
  return pass_if(auc >= 0.80 && base >= 0.47 && base <= 0.53 &&
                     run.train_seconds < 15 * 60,
                 "test AUC " + fmt(auc) + ", untrained AUC " + fmt(base) +
                     ", training " + fmt(run.train_seconds, 3) + " s");
}

struct Prevalence {
  double mean_mc = 0.0;
  double fb_share = 0.0;
  double st_share = 0.0;
};

Prevalence prevalence(const Snapshot& s) {
  Prevalence p;
  for (const auto& u : s.users) {
    p.mean_mc += u.profile.mc;
    p.fb_share += u.profile.fb < 0.0;
    p.st_share += u.profile.st > 0.0;
  }
  const double n = static_cast<double>(s.users.size());
  p.mean_mc /= n;
  p.fb_share /= n;
  p.st_share /= n;
  return p;
}

std::string describe(const Prevalence& p) {
  return "mean MC " + fmt(p.mean_mc) + " nats, fb < 0 for " +
         fmt(100 * p.fb_share, 3) + "%, st > 0 for " + fmt(100 * p.st_share, 3) +
         "%";
}

Outcome harm_prevalence(const Ml1mRun& run) {
  const auto p = prevalence(run.snapshot);
  return pass_if(p.mean_mc > 0.0 && p.fb_share >= 0.10 && p.st_share >= 0.10,
                 describe(p));
}

Outcome counterfactual_oracle() {
  const auto r = fixtures::counterfactual_agreement(77, 200);
  return pass_if(r.agree == 200,
                 std::to_string(r.agree) + "/200 queries agree; relaxation levels " +
                     std::to_string(r.levels_seen[0]) + "/" +
                     std::to_string(r.levels_seen[1]) + "/" +
                     std::to_string(r.levels_seen[2]));
}

bool non_increasing(const std::vector<double>& trace) {
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i] > trace[i - 1]) return false;
  }
  return true;
}

Outcome k_medoids_fixture() {
  // Ids equal the coordinates, so medoid ids are medoid values.
  const std::vector<int> xs = {0, 1, 2, 10, 11, 12};
  const auto line = pam(xs, 2, [&](std::size_t a, std::size_t b) {
    return std::abs(static_cast<double>(xs[a] - xs[b]));
  });
  const bool medoids_ok = line.medoid_user_ids == std::vector<int>{1, 11};
  bool monotone = non_increasing(line.deviation_trace);

  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  int fixtures_run = 1;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + trial % 6;
    std::vector<double> pts(n);
    for (double& x : pts) x = std::round(u(rng) * 4) / 4;
    std::vector<int> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<int>(i);
    for (int k = 1; k <= std::min<int>(3, static_cast<int>(n)); ++k) {
      const auto c = pam(ids, k, [&](std::size_t a, std::size_t b) {
        return std::abs(pts[a] - pts[b]);
      });
      monotone = monotone && non_increasing(c.deviation_trace);
      ++fixtures_run;
    }
  }
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<CategoryDistribution> ds;
    std::vector<int> ids;
    for (int i = 0; i < 60; ++i) {
      ds.push_back(fixtures::random_simplex(rng, 18, 0.3));
      ids.push_back(i + 1);
    }
    monotone = monotone && non_increasing(k_medoids(ids, ds, 8).deviation_trace);
    ++fixtures_run;
  }

  std::string medoids;
  for (int m : line.medoid_user_ids) medoids += (medoids.empty() ? "" : ",") + std::to_string(m);
  return pass_if(medoids_ok && monotone,
                 "line medoids {" + medoids + "}, deviation " +
                     fmt(line.total_deviation) + "; trace non-increasing on " +
                     (monotone ? "all " : "not all ") +
                     std::to_string(fixtures_run) + " fixtures");
}

Outcome snapshot_determinism(const std::filesystem::path& data,
                             const std::filesystem::path& work,
                             const std::string& dataset_name) {
  std::ostringstream log;
  PipelineConfig c;
  c.dataset_dir = data;
  c.output_dir = work / "run1";
  const auto first = run_pipeline(c, log);
  c.output_dir = work / "run2";
  const auto second = run_pipeline(c, log);
  const auto a = read_snapshot(first.snapshot_dir);
  const auto b = read_snapshot(second.snapshot_dir);
  const bool hashes = a.manifest.content_hashes == b.manifest.content_hashes &&
                      !a.manifest.content_hashes.empty();

  const Api api1(a);
  const Api api2(read_snapshot(first.snapshot_dir));
  int requests = 0;
  int identical = 0;
  const auto same = [&](const HttpResponse& x, const HttpResponse& y) {
    ++requests;
    identical += x.status == y.status && x.body == y.body;
  };
  same(api1.get_meta(), api2.get_meta());
  same(api1.get_harm_distribution(), api2.get_harm_distribution());
  same(api1.get_space(std::nullopt, std::nullopt), api2.get_space(std::nullopt, std::nullopt));
  for (const char* harm : {"miscalibration", "stereotype", "filter_bubble"}) {
    same(api1.get_space("single_harm", harm), api2.get_space("single_harm", harm));
  }
  for (std::size_t i = 0; i < a.users.size(); i += 7) {
    const int id = a.users[i].user_id;
    same(api1.get_user(std::to_string(id)), api2.get_user(std::to_string(id)));
    const std::string gender = a.users[i].demographics.gender == 'M' ? "F" : "M";
    const std::string body = "{\"user_id\": " + std::to_string(id) +
                             ", \"kind\": \"demographic\", \"attribute\": \"gender\", "
                             "\"target_value\": \"" + gender + "\"}";
    same(api1.post_counterfactual(body), api1.post_counterfactual(body));
    same(api1.post_counterfactual(body), api2.post_counterfactual(body));
  }
  same(api1.get_user("999999999"), api2.get_user("999999999"));

  return pass_if(hashes && identical == requests,
                 std::string("two pipeline runs on ") + dataset_name + ": " +
                     std::to_string(a.manifest.content_hashes.size()) +
                     " content hashes " + (hashes ? "identical" : "differ") +
                     "; " + std::to_string(identical) + "/" +
                     std::to_string(requests) + " repeated requests byte-identical");
}

Outcome guarded(const std::function<Outcome()>& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    return {Verdict::kFail, std::string("exception: ") + e.what()};
  }
}

void print(const std::string& name, const Outcome& o) {
  const char* tag = o.verdict == Verdict::kPass   ? "PASS"
                    : o.verdict == Verdict::kFail ? "FAIL"
                                                  : "SKIP";
  std::cout << tag << "  " << name << "  " << o.detail << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("harmlens acceptance report");
  std::string ml1m;
  bool require_ml1m = false;
  app.add_option("--ml1m", ml1m, "MovieLens-1M directory");
  app.add_flag("--require-ml1m", require_ml1m,
               "Exit with 77 when the dataset is unavailable");
  CLI11_PARSE(app, argc, argv);
  if (ml1m.empty()) {
    if (const char* env = std::getenv("HARMLENS_ML1M_DIR")) ml1m = env;
  }
  const bool have_ml1m =
      !ml1m.empty() && std::filesystem::exists(std::filesystem::path(ml1m) / "ratings.dat");
  if (require_ml1m && !have_ml1m) {
    std::cout << "MovieLens-1M not found; set HARMLENS_ML1M_DIR\n";
    return 77;
  }

  fixtures::TempDir work("acceptance");
  std::optional<Ml1mRun> run;
  std::string run_error;
  if (have_ml1m) {
    try {
      run = run_ml1m(ml1m, work / "ml1m");
    } catch (const std::exception& e) {
      run_error = e.what();
    }
  }
  const auto dataset = [&](const std::function<Outcome(const Ml1mRun&)>& fn) {
    if (!have_ml1m) {
      return Outcome{Verdict::kSkip, "MovieLens-1M not available"};
    }
    if (!run) return Outcome{Verdict::kFail, "pipeline failed: " + run_error};
    return guarded([&] { return fn(*run); });
  };

  std::vector<std::pair<std::string, Outcome>> results;
  results.emplace_back("preprocessing_reproduction", dataset(preprocessing));
  results.emplace_back("metric_oracle_suite", guarded(metric_oracle_suite));
  results.emplace_back("bpr_gradient_check", guarded(bpr_gradient_and_determinism));
  results.emplace_back("bpr_sanity", dataset(bpr_sanity));
  results.emplace_back("harm_prevalence", dataset(harm_prevalence));
  results.emplace_back("counterfactual_oracle", guarded(counterfactual_oracle));
  results.emplace_back("k_medoids", guarded(k_medoids_fixture));
  results.emplace_back("snapshot_determinism", guarded([&] {
    if (have_ml1m) return snapshot_determinism(ml1m, work / "det", "MovieLens-1M");
    SyntheticOptions so;
    write_synthetic_movielens(work / "synthetic", so);
    return snapshot_determinism(work / "synthetic", work / "det", "synthetic data");
  }));

  int failures = 0;
  for (const auto& [name, outcome] : results) {
    print(name, outcome);
    failures += outcome.verdict == Verdict::kFail;
  }

  if (!have_ml1m) {
    // Surrogate figures on a MovieLens-shaped synthetic set. They do not
    // decide any criterion.
    try {
      fixtures::TempDir surrogate("acceptance-surrogate");
      SyntheticOptions so;
      so.users = 1000;
      so.items = 600;
      write_synthetic_movielens(surrogate / "data", so);
      PipelineConfig c;
      c.dataset_dir = surrogate / "data";
      c.output_dir = surrogate / "out";
      std::ostringstream log;
      const auto snap = read_snapshot(run_pipeline(c, log).snapshot_dir);
      const auto split = split_chronological(
          preprocess(load_movielens(surrogate / "data")));
      std::cout << "INFO  synthetic surrogate: " << snap.users.size()
                << " users, test AUC " << fmt(snap.stats.test_auc)
                << ", untrained AUC " << fmt(untrained_auc(split)) << "; "
                << describe(prevalence(snap)) << std::endl;
    } catch (const std::exception& e) {
      std::cout << "INFO  synthetic surrogate failed: " << e.what() << std::endl;
    }
  }
  return failures == 0 ? 0 : 1;
}
