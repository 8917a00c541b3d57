#include "oracles.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <tuple>

namespace oracle {

namespace {

using Span = std::tuple<int, size_t, size_t>;
using Rel = std::tuple<int, Span, Span>;

// Largest number of disjoint (pred, gold) equal pairs, by trying every
// assignment of each prediction to an unused gold item or to nothing.
template <typename T>
size_t max_matching(const std::vector<T>& pred, const std::vector<T>& gold) {
  std::vector<bool> used(gold.size(), false);
  std::function<size_t(size_t)> go = [&](size_t i) -> size_t {
    if (i == pred.size()) return 0;
    size_t best = go(i + 1);
    for (size_t g = 0; g < gold.size(); ++g) {
      if (used[g] || !(gold[g] == pred[i])) continue;
      used[g] = true;
      best = std::max(best, 1 + go(i + 1));
      used[g] = false;
    }
    return best;
  };
  return go(0);
}

template <typename T>
std::vector<T> distinct(const std::vector<T>& v) {
  std::vector<T> out;
  for (const auto& x : v) {
    bool seen = false;
    for (const auto& y : out) seen = seen || y == x;
    if (!seen) out.push_back(x);
  }
  return out;
}

Span span_of(const seglens::EntityMention& e) { return {static_cast<int>(e.label), e.start, e.end}; }

const seglens::SentencePrediction& find_pred(const seglens::Prediction& pred, const std::string& id) {
  for (const auto& s : pred.sentences) {
    if (s.id == id) return s;
  }
  throw std::runtime_error("oracle: no prediction for " + id);
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_var(const std::vector<double>& v) {
  double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace

Counts brute_force_ner(const seglens::Corpus& gold, const seglens::Prediction& pred) {
  Counts c;
  for (const auto& s : gold.sentences()) {
    const auto& p = find_pred(pred, s.id);
    std::vector<Span> g, q;
    for (const auto& e : s.entities) g.push_back(span_of(e));
    for (const auto& e : p.entities) q.push_back(span_of(e));
    q = distinct(q);
    c.tp += max_matching(q, g);
    c.predicted += q.size();
    c.gold += g.size();
  }
  return c;
}

Counts brute_force_re(const seglens::Corpus& gold, const seglens::Prediction& pred) {
  Counts c;
  for (const auto& s : gold.sentences()) {
    const auto& p = find_pred(pred, s.id);
    std::vector<Rel> g, q;
    for (const auto& r : s.relations) {
      g.emplace_back(static_cast<int>(r.label), span_of(s.entities[r.head]), span_of(s.entities[r.tail]));
    }
    for (const auto& r : p.relations) {
      q.emplace_back(static_cast<int>(r.label), span_of(p.entities[r.head]), span_of(p.entities[r.tail]));
    }
    q = distinct(q);
    c.tp += max_matching(q, g);
    c.predicted += q.size();
    c.gold += g.size();
  }
  return c;
}

double t_two_sided_p_by_integration(double t, double df) {
  if (std::isinf(t)) return 0.0;
  const long double nu = df;
  const long double log_norm = std::lgamma((nu + 1) / 2) - std::lgamma(nu / 2) - 0.5L * std::log(nu * M_PIl);
  auto density = [&](long double x) {
    return std::exp(log_norm - (nu + 1) / 2 * std::log1p(x * x / nu));
  };
  // Central mass on [0, |t|] is smooth and bounded, so composite Simpson
  // converges fast; p = 1 - 2 * mass.
  const long double a = 0.0L, b = std::fabs(static_cast<long double>(t));
  if (b == 0.0L) return 1.0;
  const int n = 200000;
  const long double h = (b - a) / n;
  long double s = density(a) + density(b);
  for (int i = 1; i < n; ++i) s += density(a + i * h) * (i % 2 ? 4 : 2);
  long double mass = s * h / 3;
  return static_cast<double>(1.0L - 2.0L * mass);
}

TTest welch(const std::vector<double>& a, const std::vector<double>& b) {
  double va = sample_var(a) / static_cast<double>(a.size());
  double vb = sample_var(b) / static_cast<double>(b.size());
  TTest r;
  r.t = (mean(a) - mean(b)) / std::sqrt(va + vb);
  r.df = (va + vb) * (va + vb) /
         (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
  r.p = t_two_sided_p_by_integration(r.t, r.df);
  return r;
}

double mean_pairwise_cosine(const std::vector<std::vector<double>>& vectors) {
  double total = 0.0;
  size_t pairs = 0;
  for (size_t i = 0; i < vectors.size(); ++i) {
    for (size_t j = i + 1; j < vectors.size(); ++j) {
      double dot = 0.0, ni = 0.0, nj = 0.0;
      for (size_t k = 0; k < vectors[i].size(); ++k) {
        dot += vectors[i][k] * vectors[j][k];
        ni += vectors[i][k] * vectors[i][k];
        nj += vectors[j][k] * vectors[j][k];
      }
      total += dot / std::sqrt(ni * nj);
      ++pairs;
    }
  }
  return 100.0 * total / static_cast<double>(pairs);
}

}  // namespace oracle
