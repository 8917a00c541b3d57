#include "seglens/scorer.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "io.hpp"
#include "json.hpp"
#include "seglens/error.hpp"

namespace seglens {

namespace {

const char* kModule = "scorer";

using EntityKey = std::tuple<size_t, size_t, int>;
using RelationKey = std::tuple<int, EntityKey, EntityKey>;

EntityKey key_of(const EntityMention& e) {
  return {e.start, e.end, static_cast<int>(e.label)};
}

// Gold and prediction sentences paired by id. Throws on any mismatch.
std::vector<std::pair<const Sentence*, const SentencePrediction*>> pair_up(
    const Corpus& gold, const Prediction& pred) {
  std::unordered_map<std::string, const SentencePrediction*> by_id;
  for (const auto& p : pred.sentences) {
    if (!by_id.emplace(p.id, &p).second) {
      throw Error(ErrorKind::kValidation, kModule, "prediction lists sentence " + p.id + " twice");
    }
    if (!gold.find(p.id)) {
      throw Error(ErrorKind::kValidation, kModule, "predicted sentence " + p.id + " is not in gold");
    }
  }
  std::vector<std::pair<const Sentence*, const SentencePrediction*>> out;
  out.reserve(gold.size());
  for (const auto& s : gold.sentences()) {
    auto it = by_id.find(s.id);
    if (it == by_id.end()) {
      throw Error(ErrorKind::kValidation, kModule, "no prediction for gold sentence " + s.id);
    }
    out.emplace_back(&s, it->second);
  }
  return out;
}

template <typename Key>
size_t count_matches(const std::set<Key>& predicted, const std::vector<Key>& gold) {
  std::map<Key, size_t> remaining;
  for (const auto& g : gold) ++remaining[g];
  size_t tp = 0;
  for (const auto& p : predicted) {
    auto it = remaining.find(p);
    if (it != remaining.end() && it->second > 0) {
      --it->second;
      ++tp;
    }
  }
  return tp;
}

double sample_mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(const std::vector<double>& v) {
  double m = sample_mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

// Continued fraction for the incomplete beta (modified Lentz).
double beta_continued_fraction(double x, double a, double b) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  double qab = a + b;
  double qap = a + 1.0;
  double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw Error(ErrorKind::kNumeric, kModule, "incomplete beta did not converge");
}

}  // namespace

Prediction prediction_from_corpus(const Corpus& corpus) {
  Prediction p;
  p.sentences.reserve(corpus.size());
  for (const auto& s : corpus.sentences()) p.sentences.push_back({s.id, s.entities, s.relations});
  return p;
}

Prediction load_prediction(const std::filesystem::path& path) {
  return prediction_from_corpus(load_corpus(path));
}

std::string serialize_prediction(const Prediction& pred, const Corpus& gold) {
  std::vector<Sentence> sentences;
  sentences.reserve(pred.sentences.size());
  for (const auto& p : pred.sentences) {
    Sentence s = gold.at(p.id);
    s.entities = p.entities;
    s.relations = p.relations;
    sentences.push_back(std::move(s));
  }
  return serialize_corpus(Corpus(std::move(sentences)));
}

double MetricRow::precision() const {
  return predicted == 0 ? 0.0 : 100.0 * static_cast<double>(true_positives) / static_cast<double>(predicted);
}

double MetricRow::recall() const {
  return gold == 0 ? 0.0 : 100.0 * static_cast<double>(true_positives) / static_cast<double>(gold);
}

double MetricRow::f1() const {
  double p = precision();
  double r = recall();
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

MetricRow score_ner(const Corpus& gold, const Prediction& pred) {
  MetricRow row;
  for (const auto& [g, p] : pair_up(gold, pred)) {
    std::set<EntityKey> predicted;
    for (const auto& e : p->entities) predicted.insert(key_of(e));
    std::vector<EntityKey> truth;
    for (const auto& e : g->entities) truth.push_back(key_of(e));
    row.true_positives += count_matches(predicted, truth);
    row.predicted += predicted.size();
    row.gold += truth.size();
  }
  return row;
}

MetricRow score_re(const Corpus& gold, const Prediction& pred) {
  MetricRow row;
  for (const auto& [g, p] : pair_up(gold, pred)) {
    std::set<RelationKey> predicted;
    for (const auto& r : p->relations) {
      if (r.head >= p->entities.size() || r.tail >= p->entities.size()) {
        throw Error(ErrorKind::kValidation, kModule,
                    "sentence " + p->id + ": relation references a nonexistent predicted entity");
      }
      predicted.insert({static_cast<int>(r.label), key_of(p->entities[r.head]),
                        key_of(p->entities[r.tail])});
    }
    std::vector<RelationKey> truth;
    for (const auto& r : g->relations) {
      truth.push_back({static_cast<int>(r.label), key_of(g->entities[r.head]),
                       key_of(g->entities[r.tail])});
    }
    row.true_positives += count_matches(predicted, truth);
    row.predicted += predicted.size();
    row.gold += truth.size();
  }
  return row;
}

FoldSummary fold_summary(const std::vector<double>& values) {
  if (values.empty()) throw Error(ErrorKind::kArgument, kModule, "no fold values");
  FoldSummary s;
  s.mean = sample_mean(values);
  if (values.size() >= 2) s.stddev = std::sqrt(sample_variance(values));
  return s;
}

std::string format_summary(const FoldSummary& s) {
  std::string out = detail::format_fixed(s.mean, 1);
  if (s.stddev) out += " ± " + detail::format_fixed(*s.stddev, 1);
  return out;
}

double regularized_incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0 && b > 0.0)) throw Error(ErrorKind::kArgument, kModule, "beta parameters must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                     b * std::log1p(-x);
  double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(x, a, b) / a;
  return 1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw Error(ErrorKind::kArgument, kModule, "degrees of freedom must be positive");
  if (std::isnan(t)) throw Error(ErrorKind::kNumeric, kModule, "t statistic is NaN");
  if (std::isinf(t)) return 0.0;
  double x = df / (df + t * t);
  return regularized_incomplete_beta(x, df / 2.0, 0.5);
}

TTestResult welch_ttest(const std::vector<double>& a, const std::vector<double>& b, bool paired) {
  if (a.size() < 2 || b.size() < 2) {
    throw Error(ErrorKind::kArgument, kModule, "each sample needs at least two values");
  }
  TTestResult r;
  double diff = 0.0;
  double se2 = 0.0;
  if (paired) {
    if (a.size() != b.size()) throw Error(ErrorKind::kArgument, kModule, "paired samples differ in length");
    std::vector<double> d(a.size());
    for (size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    diff = sample_mean(d);
    se2 = sample_variance(d) / static_cast<double>(d.size());
    r.df = static_cast<double>(d.size() - 1);
  } else {
    double va = sample_variance(a) / static_cast<double>(a.size());
    double vb = sample_variance(b) / static_cast<double>(b.size());
    diff = sample_mean(a) - sample_mean(b);
    se2 = va + vb;
    double denom = va * va / static_cast<double>(a.size() - 1) +
                   vb * vb / static_cast<double>(b.size() - 1);
    r.df = denom > 0.0 ? se2 * se2 / denom : static_cast<double>(a.size() + b.size() - 2);
  }
  if (se2 == 0.0) {
    if (diff == 0.0) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = diff > 0 ? std::numeric_limits<double>::infinity()
                     : -std::numeric_limits<double>::infinity();
      r.p = 0.0;
    }
  } else {
    r.t = diff / std::sqrt(se2);
    r.p = student_t_two_sided_p(r.t, r.df);
  }
  r.significant = r.p <= 0.05;
  return r;
}

std::string score_csv(const std::vector<ScoreRow>& rows) {
  std::ostringstream out;
  out << "model,aggregation,fold,ner_f1,re_f1\n";
  for (const auto& r : rows) {
    size_t n = std::max(r.ner_f1.size(), r.re_f1.size());
    auto cell = [](const std::vector<double>& v, size_t i) {
      return i < v.size() ? detail::format_fixed(v[i], 1) : std::string();
    };
    for (size_t i = 0; i < n; ++i) {
      out << r.model << ',' << r.aggregation << ',' << i << ',' << cell(r.ner_f1, i) << ','
          << cell(r.re_f1, i) << '\n';
    }
    auto ner = r.ner_f1.empty() ? FoldSummary{} : fold_summary(r.ner_f1);
    auto re = r.re_f1.empty() ? FoldSummary{} : fold_summary(r.re_f1);
    out << r.model << ',' << r.aggregation << ",mean," << detail::format_fixed(ner.mean, 1) << ','
        << detail::format_fixed(re.mean, 1) << '\n';
    out << r.model << ',' << r.aggregation << ",std,"
        << (ner.stddev ? detail::format_fixed(*ner.stddev, 1) : "") << ','
        << (re.stddev ? detail::format_fixed(*re.stddev, 1) : "") << '\n';
  }
  return out.str();
}

std::string score_table(const std::vector<ScoreRow>& rows) {
  auto pad = [](std::string s, size_t w) {
    // Width in code points; the ± sign is two bytes.
    size_t visible = 0;
    for (unsigned char c : s) visible += (c & 0xC0) != 0x80;
    if (visible < w) s.append(w - visible, ' ');
    return s;
  };
  std::ostringstream out;
  out << pad("Language Model", 18) << pad("Aggregation", 14) << pad("NER", 14) << "RE\n";
  for (const auto& r : rows) {
    std::string ner = r.ner_f1.empty() ? "-" : format_summary(fold_summary(r.ner_f1));
    std::string re = r.re_f1.empty() ? "-" : format_summary(fold_summary(r.re_f1));
    out << pad(r.model, 18) << pad(r.aggregation, 14) << pad(ner, 14) << re << '\n';
  }
  return out.str();
}

}  // namespace seglens
