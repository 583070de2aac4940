// Copyright 2026 The lattice-rescore Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <cstring>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "lattice_rescore/ngram.h"
#include "lattice_rescore/scorer.h"

namespace lattice_rescore {
namespace {

std::vector<double> ScoreOne(Scorer& s, const std::string& context, const std::string& target) {
  const std::vector<std::string> targets = {target};
  return s.Score(context, targets);
}

TEST(UniformScorerTest, LengthPlusEndOfText) {
  UniformScorer s(5);
  EXPECT_DOUBLE_EQ(ScoreOne(s, "", "x y z")[0], 4 * std::log(1.0 / 5));
  EXPECT_DOUBLE_EQ(ScoreOne(s, "anything", "")[0], std::log(1.0 / 5));
}

TEST(NGramTest, SymmetricContinuationsAreEqual) {
  const std::vector<std::string> corpus = {"a b", "a c"};
  NGramScorer m = NGramScorer::Train(corpus, 2);
  const std::vector<std::string> a = {"a"};
  EXPECT_DOUBLE_EQ(m.Probability(a, "b"), m.Probability(a, "c"));
}

TEST(NGramTest, FrequentUnigramDominates) {
  const std::vector<std::string> corpus = {"a a a"};
  NGramScorer m = NGramScorer::Train(corpus, 1);
  EXPECT_GT(ScoreOne(m, "", "a")[0], ScoreOne(m, "", "b")[0]);
}

TEST(NGramTest, HandComputedBigram) {
  const std::vector<std::string> corpus = {"a b", "a c", "a b c", "b c", "c"};
  NGramScorer m = NGramScorer::Train(corpus, 2);
  // Outcomes: a b c <unk> </s>. Unigram counts a:3 b:3 c:4 </s>:5, N=15,
  // four seen types, so P1(w) = max(c - .75, 0) / 15 + .75 * 4 / 15 / 5.
  const double p1_b = 2.25 / 15 + 0.04;
  const double p1_end = 4.25 / 15 + 0.04;
  const double p1_unk = 0.04;
  // After "a": b x2, c x1. After "b": c x2, </s> x1.
  const double p_b_a = 1.25 / 3 + 0.75 * 2 / 3 * p1_b;
  const double p_end_b = 0.25 / 3 + 0.75 * 2 / 3 * p1_end;
  const double p_unk_a = 0.75 * 2 / 3 * p1_unk;
  const std::vector<std::string> a = {"a"};
  EXPECT_NEAR(m.Probability(a, "b"), p_b_a, 1e-15);
  EXPECT_NEAR(m.Probability(a, "zzz"), p_unk_a, 1e-15);
  EXPECT_NEAR(ScoreOne(m, "a", "b")[0], std::log(p_b_a * p_end_b), 1e-12);
  // Sentence start: "<s>" was followed by a x3, b x1, c x1.
  const double p1_a = 2.25 / 15 + 0.04;
  const double p_a_bos = 2.25 / 5 + 0.75 * 3 / 5 * p1_a;
  EXPECT_NEAR(m.Probability({}, "a"), p_a_bos, 1e-15);
}

TEST(NGramTest, ConditionalsAreNormalized) {
  std::mt19937_64 rng(1);
  const std::vector<std::string> words = {"a", "b", "c", "d", "é"};
  std::uniform_int_distribution<int> pick(0, 4);
  std::uniform_int_distribution<int> length(0, 6);
  std::vector<std::string> corpus;
  for (int i = 0; i < 30; ++i) {
    std::vector<std::string> s;
    for (int j = length(rng); j > 0; --j) s.push_back(words[static_cast<std::size_t>(pick(rng))]);
    corpus.push_back(Join(s));
  }
  for (int order = 1; order <= 4; ++order) {
    NGramScorer m = NGramScorer::Train(corpus, order);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<std::string> history;
      for (int j = length(rng); j > 0; --j) {
        history.push_back(trial % 7 == 0 ? "oov" : words[static_cast<std::size_t>(pick(rng))]);
      }
      double total = 0.0;
      for (const std::string& w : m.Outcomes()) total += m.Probability(history, w);
      EXPECT_NEAR(total, 1.0, 1e-9) << "order " << order;
    }
  }
}

TEST(NGramTest, ChainRuleAcrossSegments) {
  std::mt19937_64 rng(2);
  const std::vector<std::string> words = {"a", "b", "c", "d"};
  std::uniform_int_distribution<int> pick(0, 3);
  std::vector<std::string> corpus;
  for (int i = 0; i < 20; ++i) {
    std::vector<std::string> s;
    for (int j = 0; j < 6; ++j) s.push_back(words[static_cast<std::size_t>(pick(rng))]);
    corpus.push_back(Join(s));
  }
  for (int order = 1; order <= 3; ++order) {
    NGramScorer m = NGramScorer::Train(corpus, order);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<std::vector<std::string>> segments(3);
      std::vector<std::string> whole;
      for (auto& seg : segments) {
        for (int j = 0; j < 3; ++j) seg.push_back(words[static_cast<std::size_t>(pick(rng))]);
        whole.insert(whole.end(), seg.begin(), seg.end());
      }
      // Each segment conditioned on everything before it; only the last one
      // is closed with end-of-text.
      double sum = 0.0;
      std::vector<std::string> prefix;
      for (std::size_t s = 0; s < segments.size(); ++s) {
        sum += m.ScoreTokens(prefix, segments[s], s + 1 == segments.size());
        prefix.insert(prefix.end(), segments[s].begin(), segments[s].end());
      }
      EXPECT_NEAR(sum, m.ScoreTokens({}, whole, true), 1e-9);
      // A context of at least order-1 words is as good as the full prefix.
      const std::vector<std::string> tail(whole.begin() + 6 - (order - 1), whole.begin() + 6);
      EXPECT_NEAR(m.ScoreTokens(tail, segments[2], true),
                  m.ScoreTokens(std::span(whole).first(6), segments[2], true), 1e-12);
    }
  }
}

TEST(NGramTest, SegmentedScoreIsTheSumOfConditionedScores) {
  const std::vector<std::string> corpus = {"a b c", "b c a", "c a b"};
  NGramScorer m = NGramScorer::Train(corpus, 2);
  const std::vector<std::string> segs = {"a b", "c a", "b"};
  const double expected =
      ScoreOne(m, "", "a b")[0] + ScoreOne(m, "a b", "c a")[0] + ScoreOne(m, "c a", "b")[0];
  EXPECT_NEAR(SegmentedScore(m, segs), expected, 1e-12);
}

TEST(NGramTest, TrainingIsDeterministic) {
  const std::vector<std::string> corpus = {"x y z", "z y", "y y x"};
  NGramScorer a = NGramScorer::Train(corpus, 3);
  NGramScorer b = NGramScorer::Train(corpus, 3);
  const std::vector<std::string> targets = {"x y", "z", "q x y z", ""};
  const std::vector<double> sa = a.Score("y", targets);
  const std::vector<double> sb = b.Score("y", targets);
  for (std::size_t i = 0; i < sa.size(); ++i) {
    EXPECT_EQ(std::memcmp(&sa[i], &sb[i], sizeof(double)), 0);
    EXPECT_LT(sa[i], 0.0);
  }
}

TEST(NGramTest, Errors) {
  const std::vector<std::string> empty;
  EXPECT_THROW(NGramScorer::Train(empty, 2), DataError);
  const std::vector<std::string> corpus = {"a"};
  EXPECT_THROW(NGramScorer::Train(corpus, 0), UsageError);
}

TEST(PerplexityTest, UniformIsLogVocab) {
  UniformScorer s(4);
  const std::vector<std::string> texts = {"a b c", "d"};
  EXPECT_NEAR(LogPerplexityPerWord(s, texts), std::log(4.0), 1e-12);
}

TEST(PerplexityTest, MatchesDirectFormula) {
  const std::vector<std::string> text = {"p q r"};
  NGramScorer m = NGramScorer::Train(text, 1);
  // Counts p q r </s> once each, N=4, five outcomes (with <unk>):
  // P(w) = .25 / 4 + .75 * 4 / 4 / 5 for every scored symbol.
  const double p = 0.25 / 4 + 0.75 / 5;
  EXPECT_NEAR(LogPerplexityPerWord(m, text), -std::log(p), 1e-9);
}

TEST(PerplexityTest, PoolsTotals) {
  const std::vector<std::string> corpus = {"a b", "a c", "b"};
  NGramScorer m = NGramScorer::Train(corpus, 2);
  const std::vector<std::string> texts = {"a b c a", "c"};
  const double ll0 = ScoreOne(m, "", texts[0])[0];
  const double ll1 = ScoreOne(m, "", texts[1])[0];
  const double pooled = -(ll0 + ll1) / (5 + 2);
  EXPECT_NEAR(LogPerplexityPerWord(m, texts), pooled, 1e-12);
  EXPECT_GT(std::abs(pooled - (-ll0 / 5 - ll1 / 2) / 2), 1e-3);
}

TEST(PerplexityTest, NoWordsIsAnError) {
  UniformScorer s(4);
  const std::vector<std::string> none;
  const std::vector<std::string> blank = {"", " "};
  EXPECT_THROW(LogPerplexityPerWord(s, none), DataError);
  EXPECT_THROW(LogPerplexityPerWord(s, blank), DataError);
}

class CountingScorer final : public Scorer {
 public:
  std::string Name() const override { return "counting"; }
  std::vector<double> Score(std::string_view context,
                            std::span<const std::string> targets) override {
    ++calls;
    std::vector<double> out;
    for (const std::string& t : targets) {
      out.push_back(-static_cast<double>(t.size() + context.size()));
      ++targets_seen;
    }
    return out;
  }
  int calls = 0;
  int targets_seen = 0;
};

TEST(CachingScorerTest, ForwardsOnlyMisses) {
  auto inner = std::make_shared<CountingScorer>();
  CachingScorer cache(inner);
  const std::vector<std::string> first = {"a", "bb"};
  const std::vector<std::string> second = {"bb", "ccc", "a"};
  EXPECT_EQ(cache.Score("x", first), (std::vector<double>{-2, -3}));
  EXPECT_EQ(cache.Score("x", second), (std::vector<double>{-3, -4, -2}));
  EXPECT_EQ(inner->targets_seen, 3);
  EXPECT_EQ(cache.Score("x", second), (std::vector<double>{-3, -4, -2}));
  EXPECT_EQ(inner->calls, 2);
  // A different context is a different key.
  cache.Score("", first);
  EXPECT_EQ(inner->targets_seen, 5);
  EXPECT_EQ(cache.size(), 5u);
}

}  // namespace
}  // namespace lattice_rescore
