#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "seglens/error.hpp"
#include "seglens/scorer.hpp"

using namespace seglens;
using namespace testing_helpers;

namespace {

Corpus gold_one() {
  return Corpus({sentence("a", {"w0", "w1", "w2", "w3", "w4", "w5", "w6", "w7"},
                          {drug(0, 1), ae(2, 4), drug(5, 6), ae(6, 8)}, {rel(1, 0), rel(3, 2)})});
}

}  // namespace

TEST(ScoreNer, PerfectPrediction) {
  Corpus g = gold_one();
  MetricRow r = score_ner(g, prediction_from_corpus(g));
  EXPECT_DOUBLE_EQ(r.precision(), 100.0);
  EXPECT_DOUBLE_EQ(r.recall(), 100.0);
  EXPECT_DOUBLE_EQ(r.f1(), 100.0);
  EXPECT_DOUBLE_EQ(score_re(g, prediction_from_corpus(g)).f1(), 100.0);
}

TEST(ScoreNer, EmptyPrediction) {
  Corpus g = gold_one();
  Prediction p{{{"a", {}, {}}}};
  EXPECT_DOUBLE_EQ(score_ner(g, p).f1(), 0.0);
  EXPECT_DOUBLE_EQ(score_re(g, p).f1(), 0.0);
}

TEST(ScoreNer, TwoOfThreeAgainstFour) {
  Corpus g = gold_one();
  Prediction p{{{"a", {drug(0, 1), ae(2, 4), ae(2, 3)}, {}}}};
  MetricRow r = score_ner(g, p);
  auto o = oracle::brute_force_ner(g, p);
  EXPECT_EQ(r.true_positives, o.tp);
  EXPECT_NEAR(r.precision(), 66.7, 0.05);
  EXPECT_NEAR(r.recall(), 50.0, 1e-9);
  EXPECT_NEAR(r.f1(), 57.1, 0.05);
}

TEST(ScoreRe, BoundaryErrorIsFalsePositive) {
  Corpus g = gold_one();
  Prediction p{{{"a", {drug(0, 1), ae(2, 3)}, {rel(1, 0)}}}};
  MetricRow r = score_re(g, p);
  EXPECT_EQ(r.true_positives, 0u);
  EXPECT_EQ(r.predicted, 1u);
}

TEST(ScoreRe, OneOfTwo) {
  Corpus g = gold_one();
  Prediction p{{{"a", {drug(0, 1), ae(2, 4), drug(5, 6), ae(6, 7)}, {rel(1, 0), rel(3, 2)}}}};
  MetricRow r = score_re(g, p);
  EXPECT_NEAR(r.precision(), 50.0, 1e-9);
  EXPECT_NEAR(r.recall(), 50.0, 1e-9);
  EXPECT_NEAR(r.f1(), 50.0, 1e-9);
}

TEST(ScoreNer, DuplicatePredictionsCountOnce) {
  Corpus g({sentence("a", {"x"}, {drug(0, 1)})});
  Prediction p{{{"a", {drug(0, 1), drug(0, 1)}, {}}}};
  MetricRow r = score_ner(g, p);
  EXPECT_EQ(r.predicted, 1u);
  EXPECT_EQ(r.true_positives, 1u);
}

TEST(Scorer, IdMismatchAndBadReferences) {
  Corpus g = gold_one();
  EXPECT_THROW(score_ner(g, Prediction{{{"zz", {}, {}}}}), Error);
  EXPECT_THROW(score_ner(g, Prediction{}), Error);
  EXPECT_THROW(score_re(g, Prediction{{{"a", {drug(0, 1)}, {rel(0, 3)}}}}), Error);
}

TEST(Scorer, MatchesBruteForceOnRandomInstances) {
  std::mt19937 rng(2024);
  auto pick = [&](size_t n) { return static_cast<size_t>(rng() % n); };
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Sentence> gold;
    Prediction pred;
    for (int s = 0; s < 3; ++s) {
      auto random_entities = [&] {
        std::vector<EntityMention> e;
        size_t n = pick(7);
        for (size_t i = 0; i < n; ++i) {
          size_t a = pick(4);
          e.push_back({pick(2) ? EntityLabel::kDrug : EntityLabel::kAdverseEffect, a, a + 1 + pick(2)});
        }
        return e;
      };
      auto random_relations = [&](size_t ents) {
        std::vector<RelationMention> r;
        if (ents == 0) return r;
        size_t n = pick(5);
        if (ents < 2) return r;
        for (size_t i = 0; i < n; ++i) {
          size_t h = pick(ents), t = pick(ents - 1);
          r.push_back(rel(h, t >= h ? t + 1 : t));
        }
        return r;
      };
      std::string id = "s" + std::to_string(s);
      auto ge = random_entities();
      auto pe = random_entities();
      gold.push_back(sentence(id, {"a", "b", "c", "d", "e", "f"}, ge, random_relations(ge.size())));
      pred.sentences.push_back({id, pe, random_relations(pe.size())});
    }
    Corpus g(std::move(gold));
    auto on = oracle::brute_force_ner(g, pred);
    auto orr = oracle::brute_force_re(g, pred);
    MetricRow n = score_ner(g, pred);
    MetricRow r = score_re(g, pred);
    ASSERT_EQ(n.true_positives, on.tp);
    ASSERT_EQ(n.predicted, on.predicted);
    ASSERT_EQ(n.gold, on.gold);
    ASSERT_EQ(r.true_positives, orr.tp);
    ASSERT_EQ(r.predicted, orr.predicted);
    ASSERT_EQ(r.gold, orr.gold);
  }
}

TEST(FoldSummary, Cases) {
  EXPECT_EQ(format_summary(fold_summary({80, 80, 80})), "80.0 ± 0.0");
  EXPECT_EQ(format_summary(fold_summary({79, 81})), "80.0 ± 1.4");
  auto one = fold_summary({77.25});
  EXPECT_FALSE(one.stddev);
  EXPECT_EQ(format_summary(one), "77.3");
  EXPECT_THROW(fold_summary({}), Error);
}

TEST(TTest, IdenticalSamples) {
  auto r = welch_ttest({79, 81, 80}, {79, 81, 80}, false);
  EXPECT_EQ(r.t, 0.0);
  EXPECT_DOUBLE_EQ(r.p, 1.0);
  EXPECT_FALSE(r.significant);
  EXPECT_DOUBLE_EQ(welch_ttest({1, 2, 3, 4, 5}, {1, 2, 3, 4, 5}, true).p, 1.0);
}

TEST(TTest, ZeroVarianceDifferentMeans) {
  auto r = welch_ttest({1, 1, 1}, {2, 2, 2}, false);
  EXPECT_TRUE(std::isinf(r.t));
  EXPECT_EQ(r.p, 0.0);
  EXPECT_TRUE(r.significant);
}

TEST(TTest, WelchMatchesIntegrationOracle) {
  auto r = welch_ttest({10, 11, 12, 13}, {20, 21, 22, 23}, false);
  auto o = oracle::welch({10, 11, 12, 13}, {20, 21, 22, 23});
  EXPECT_NEAR(r.t, o.t, 1e-12);
  EXPECT_NEAR(r.df, o.df, 1e-12);
  EXPECT_NEAR(r.p, o.p, 1e-6);
  EXPECT_TRUE(r.significant);
}

TEST(TTest, PairedIsOneSampleOnDifferences) {
  std::vector<double> a{80.1, 81.3, 79.9, 82.0}, b{79.0, 80.8, 80.1, 80.2};
  auto r = welch_ttest(a, b, true);
  EXPECT_DOUBLE_EQ(r.df, 3.0);
  double t = r.t;
  EXPECT_NEAR(r.p, oracle::t_two_sided_p_by_integration(t, 3.0), 1e-6);
  EXPECT_THROW(welch_ttest({1, 2}, {1}, true), Error);
}

TEST(IncompleteBeta, KnownValues) {
  EXPECT_NEAR(regularized_incomplete_beta(0.5, 2, 2), 0.5, 1e-12);
  EXPECT_NEAR(regularized_incomplete_beta(0.3, 1, 1), 0.3, 1e-12);
  // I_x(a, 1) = x^a
  EXPECT_NEAR(regularized_incomplete_beta(0.7, 3.5, 1), std::pow(0.7, 3.5), 1e-12);
  EXPECT_NEAR(student_t_two_sided_p(0.0, 7), 1.0, 1e-15);
}

TEST(ScoreTable, CsvAndMarkdown) {
  std::vector<ScoreRow> rows{{"BERT", "sum", {79, 81}, {50, 52}}};
  std::string csv = score_csv(rows);
  EXPECT_NE(csv.find("BERT,sum,mean,80.0,51.0"), std::string::npos) << csv;
  EXPECT_NE(csv.find("BERT,sum,std,1.4,1.4"), std::string::npos) << csv;
  std::string md = score_table(rows);
  EXPECT_EQ(md.rfind("Language Model", 0), 0u) << md;
  EXPECT_NE(md.find("BERT"), std::string::npos);
  EXPECT_NE(md.find("80.0 ± 1.4"), std::string::npos);
}
