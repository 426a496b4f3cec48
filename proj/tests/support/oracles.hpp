// Reference implementations written directly from the definitions, kept
// deliberately naive so they share no code paths with the library.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

inline double kl(const Vec& p, const Vec& q, double alpha) {
  long double sum = 0.0L;
  for (std::size_t c = 0; c < p.size(); ++c) {
    if (p[c] == 0.0) continue;
    const long double qs = (1.0L - alpha) * q[c] + alpha * (long double)p[c];
    sum += p[c] * std::log((long double)p[c] / qs);
  }
  return static_cast<double>(sum);
}

inline Vec mix_uniform(const Vec& x, double eps) {
  Vec out(x.size());
  for (std::size_t c = 0; c < x.size(); ++c) {
    out[c] = (1.0 - eps) * x[c] + eps / static_cast<double>(x.size());
  }
  return out;
}

// Symmetrized KL after uniform smoothing of both sides.
inline double sym_kl(const Vec& p, const Vec& q, double eps) {
  const Vec a = mix_uniform(p, eps);
  const Vec b = mix_uniform(q, eps);
  return 0.5 * (kl(a, b, 0.0) + kl(b, a, 0.0));
}

// Jensen-Shannon against the midpoint, same smoothing.
inline double js_mid(const Vec& p, const Vec& q, double eps) {
  const Vec a = mix_uniform(p, eps);
  const Vec b = mix_uniform(q, eps);
  Vec m(a.size());
  for (std::size_t c = 0; c < a.size(); ++c) m[c] = 0.5 * (a[c] + b[c]);
  return 0.5 * (kl(a, m, 0.0) + kl(b, m, 0.0));
}

inline double entropy(const Vec& p) {
  long double h = 0.0L;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log((long double)x);
  }
  return static_cast<double>(h);
}

inline double hellinger(const Vec& p, const Vec& q) {
  long double s = 0.0L;
  for (std::size_t c = 0; c < p.size(); ++c) {
    const long double d = std::sqrt((long double)p[c]) - std::sqrt((long double)q[c]);
    s += d * d;
  }
  return static_cast<double>(std::sqrt(s / 2.0L));
}

inline Vec mean(const std::vector<Vec>& xs) {
  Vec m(xs.front().size(), 0.0);
  for (const auto& x : xs) {
    for (std::size_t c = 0; c < x.size(); ++c) m[c] += x[c];
  }
  for (double& v : m) v /= static_cast<double>(xs.size());
  return m;
}

struct MedoidSet {
  std::vector<std::size_t> medoids;  // ascending positions
  double cost = 0.0;
};

// Minimum total deviation over every k-subset, the lexicographically first
// subset on exact ties.
inline MedoidSet exhaustive_medoids(const std::vector<Vec>& d, std::size_t k) {
  const std::size_t n = d.size();
  MedoidSet best{{}, std::numeric_limits<double>::infinity()};
  std::vector<bool> pick(n, false);
  std::fill(pick.begin(), pick.begin() + static_cast<long>(k), true);
  do {
    std::vector<std::size_t> m;
    for (std::size_t i = 0; i < n; ++i) {
      if (pick[i]) m.push_back(i);
    }
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double nearest = std::numeric_limits<double>::infinity();
      for (std::size_t j : m) nearest = std::min(nearest, d[i][j]);
      cost += nearest;
    }
    if (cost < best.cost || (cost == best.cost && m < best.medoids)) {
      best = {m, cost};
    }
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return best;
}

struct CfUser {
  int id;
  char gender;
  int age;
  int occupation;
  Vec p;
};

struct CfAnswer {
  std::optional<int> match;  // empty: no candidate at any level
  int level = 0;
  std::string error;         // "invalid_treatment", "unknown_user", ...
};

// Demographic counterfactual by full enumeration: at each level build the
// candidate list, sort by (distance, id) and take the head.
inline CfAnswer demographic(const std::vector<CfUser>& users, int query_id,
                            const std::string& attribute,
                            const std::string& target) {
  const CfUser* self = nullptr;
  for (const auto& u : users) {
    if (u.id == query_id) self = &u;
  }
  if (self == nullptr) return {{}, 0, "unknown_user"};
  const auto value = [](const CfUser& u, const std::string& a) {
    if (a == "gender") return std::string(1, u.gender);
    if (a == "age_bracket") return std::to_string(u.age);
    return std::to_string(u.occupation);
  };
  if (value(*self, attribute) == target) return {{}, 0, "invalid_treatment"};

  std::vector<std::string> kept;
  if (attribute == "gender") kept = {"occupation", "age_bracket"};
  if (attribute == "age_bracket") kept = {"occupation", "gender"};
  if (attribute == "occupation") kept = {"age_bracket", "gender"};

  for (int level = 0; level <= 2; ++level) {
    std::vector<std::pair<double, int>> scored;
    for (const auto& u : users) {
      if (u.id == self->id || value(u, attribute) != target) continue;
      bool same = true;
      for (std::size_t a = static_cast<std::size_t>(level); a < kept.size(); ++a) {
        same = same && value(u, kept[a]) == value(*self, kept[a]);
      }
      if (same) scored.emplace_back(hellinger(self->p, u.p), u.id);
    }
    if (!scored.empty()) {
      std::sort(scored.begin(), scored.end());
      return {scored.front().second, level, ""};
    }
  }
  return {{}, 0, "no_match"};
}

inline CfAnswer preference(const std::vector<CfUser>& users, int query_id,
                           std::size_t category, double delta,
                           bool same_demographics) {
  const CfUser* self = nullptr;
  for (const auto& u : users) {
    if (u.id == query_id) self = &u;
  }
  if (self == nullptr) return {{}, 0, "unknown_user"};
  Vec target = self->p;
  target[category] = std::max(0.0, target[category] + delta);
  double total = 0.0;
  for (double x : target) total += x;
  if (total <= 0.0) return {{}, 0, "invalid_shift"};
  for (double& x : target) x /= total;

  std::vector<std::pair<double, int>> scored;
  for (const auto& u : users) {
    if (u.id == self->id) continue;
    if (same_demographics &&
        (u.gender != self->gender || u.age != self->age ||
         u.occupation != self->occupation)) {
      continue;
    }
    scored.emplace_back(hellinger(target, u.p), u.id);
  }
  if (scored.empty()) return {{}, 0, "no_match"};
  std::sort(scored.begin(), scored.end());
  return {scored.front().second, 0, ""};
}

}  // namespace oracle
