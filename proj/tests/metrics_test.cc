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

#include "lattice_rescore/metrics.h"

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "lattice_rescore/salient.h"
#include "support/random_lattices.h"

namespace lattice_rescore {
namespace {

using ::lattice_rescore::testing::BruteEditDistance;
using ::lattice_rescore::testing::BruteForcePaths;
using ::lattice_rescore::testing::Chain;
using ::lattice_rescore::testing::RandomDag;

TokenSequence T(const char* text) { return Tokenize(text); }

TokenSequence RandomString(std::mt19937_64& rng, int max_len) {
  std::uniform_int_distribution<int> len(0, max_len), letter(0, 2);
  TokenSequence s;
  for (int i = len(rng); i > 0; --i) s.push_back(std::string(1, static_cast<char>('a' + letter(rng))));
  return s;
}

TEST(AlignTest, Basics) {
  EXPECT_EQ(Align(T("a b c"), T("a b c")).Counts(), (ErrorCounts{3, 3, 0, 0, 0}));
  EXPECT_EQ(Align(T("a b c"), T("a x c")).Counts(), (ErrorCounts{3, 2, 1, 0, 0}));
  EXPECT_EQ(Align(T(""), T("a b")).Counts(), (ErrorCounts{0, 0, 0, 0, 2}));
  EXPECT_EQ(Align(T("a b"), T("")).Counts(), (ErrorCounts{2, 0, 0, 2, 0}));
}

TEST(AlignTest, TieBreakPrefersSubstitutionOverIndels) {
  // "a b" vs "b c": cost 2 either as two substitutions or as a deletion and
  // an insertion around the shared "b"; substitutions win.
  const Alignment a = Align(T("a b"), T("b c"));
  EXPECT_EQ(a.cost(), 2);
  ASSERT_EQ(a.steps.size(), 2u);
  EXPECT_EQ(a.steps[0].op, EditOp::kSubstitution);
  EXPECT_EQ(a.steps[1].op, EditOp::kSubstitution);
  // With unequal lengths the deletion goes where the backtrace meets it first.
  const Alignment b = Align(T("a b c"), T("a c"));
  EXPECT_EQ(b.steps[1].op, EditOp::kDeletion);
}

TEST(AlignTest, MatchesBruteForceAndReconstructs) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const TokenSequence ref = RandomString(rng, 8), hyp = RandomString(rng, 8);
    const Alignment a = Align(ref, hyp);
    ASSERT_EQ(a.cost(), BruteEditDistance(ref, hyp));
    TokenSequence r, h;
    for (const AlignStep& s : a.steps) {
      if (s.op != EditOp::kInsertion) r.push_back(s.ref);
      if (s.op != EditOp::kDeletion) h.push_back(s.hyp);
      if (s.op == EditOp::kMatch) EXPECT_EQ(s.ref, s.hyp);
      if (s.op == EditOp::kSubstitution) EXPECT_NE(s.ref, s.hyp);
    }
    EXPECT_EQ(r, ref);
    EXPECT_EQ(h, hyp);
    // Swapping sides swaps deletions and insertions.
    const ErrorCounts fwd = a.Counts(), back = Align(hyp, ref).Counts();
    EXPECT_EQ(fwd.errors(), back.errors());
    EXPECT_EQ(fwd.deletions - fwd.insertions, back.insertions - back.deletions);
  }
}

TEST(WerTest, Pooled) {
  std::vector<std::pair<TokenSequence, TokenSequence>> perfect = {{T("a b"), T("a b")}};
  EXPECT_EQ(Wer(perfect).wer, 0.0);
  std::vector<std::pair<TokenSequence, TokenSequence>> dropped = {{T("a b"), T("")}};
  EXPECT_EQ(Wer(dropped).wer, 1.0);
  std::vector<std::pair<TokenSequence, TokenSequence>> pooled = {
      {T("a b c"), T("a b x")}, {T("a b c d e f g"), T("a b c d e f g")}};
  EXPECT_DOUBLE_EQ(Wer(pooled).wer, 0.1);
  std::vector<std::pair<TokenSequence, TokenSequence>> empty = {{T(""), T("a")}};
  EXPECT_THROW(Wer(empty), DataError);
}

TEST(OracleWerTest, SinglePathAndContainedReference) {
  EXPECT_DOUBLE_EQ(OracleWer(Chain({"a", "x", "c"}), T("a b c")), 1.0 / 3);
  Lattice diamond;
  diamond.num_states = 3;
  diamond.finals = {2};
  diamond.arcs = {{0, 1, "a", 0, 0}, {0, 1, "b", 0, 0}, {1, 2, "c", 0, 0}};
  EXPECT_DOUBLE_EQ(OracleWer(diamond, T("b c")), 0.0);
  Lattice empty_path;
  empty_path.num_states = 1;
  empty_path.finals = {0};
  EXPECT_DOUBLE_EQ(OracleWer(empty_path, T("a b")), 1.0);
  EXPECT_THROW(OracleWer(diamond, T("")), DataError);
}

TEST(OracleWerTest, MatchesEnumerationMinimum) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const Lattice l = RandomDag(rng, 3 + trial % 9, trial % 12, 3);
    const TokenSequence ref = RandomString(rng, 7);
    if (ref.empty()) continue;
    int best = 1 << 30;
    for (const auto& p : BruteForcePaths(l)) best = std::min(best, BruteEditDistance(ref, p.tokens));
    EXPECT_EQ(OracleErrors(l, ref), best) << "trial " << trial;
  }
}

TEST(PathStatsTest, MeansAndRendering) {
  Utterance u;
  u.segments = {Chain({"a"}), Chain({"b"})};
  std::vector<Utterance> us = {u};
  EXPECT_EQ(AvgPathsPerSegment(us).mean, 1.0);
  EXPECT_EQ(AvgPathsPerSegment(us).Rendered(), "1");
  u.segments = {testing::Diamonds(1), testing::Diamonds(2)};
  us = {u};
  EXPECT_EQ(AvgPathsPerSegment(us).mean, 3.0);
  u.segments = {testing::Diamonds(70), testing::Diamonds(69)};
  us = {u};
  EXPECT_EQ(AvgPathsPerSegment(us).Rendered(), "8.9e20");
  EXPECT_EQ(FormatCount(4e20), "4e20");
  EXPECT_EQ(FormatCount(2.5), "2.5");
  EXPECT_EQ(FormatCount(1234567), "1.2e6");
  us.clear();
  EXPECT_THROW(AvgPathsPerSegment(us), DataError);
}

TEST(PathStatsTest, RandomDagsMatchEnumeration) {
  std::mt19937_64 rng(31);
  Utterance u;
  double total = 0;
  for (int i = 0; i < 20; ++i) {
    u.segments.push_back(RandomDag(rng, 8, 10));
    total += static_cast<double>(BruteForcePaths(u.segments.back()).size());
  }
  std::vector<Utterance> us = {u};
  EXPECT_DOUBLE_EQ(AvgPathsPerSegment(us).mean, total / 20);
}

std::vector<Document> Docs(std::initializer_list<std::pair<const char*, const char*>> items) {
  std::vector<Document> docs;
  for (const auto& [id, text] : items) docs.push_back({id, Tokenize(text)});
  return docs;
}

TEST(SalientTest, HandComputedTfIdf) {
  const auto docs = Docs({{"d1", "x x y"}, {"d2", "y z"}});
  const SalientTermSet set = SelectSalientTerms(docs, 1.0);
  const auto& d1 = set.terms.at("d1");
  ASSERT_FALSE(d1.empty());
  EXPECT_EQ(d1[0].tokens, T("x"));
  EXPECT_DOUBLE_EQ(d1[0].tfidf, 2 * std::log(2.0));
  const auto& d2 = set.terms.at("d2");
  // "z" and "y z" tie on tf*idf and idf; token order puts "y z" first.
  EXPECT_EQ(d2[0].tokens, T("y z"));
  EXPECT_DOUBLE_EQ(d2[0].tfidf, std::log(2.0));
  EXPECT_GT(d1[0].tfidf, d2[0].tfidf);
}

TEST(SalientTest, UbiquitousTermsComeLast) {
  const auto docs = Docs({{"a", "the cat the"}, {"b", "the dog"}, {"c", "the end"}});
  const SalientTermSet set = SelectSalientTerms(docs, 1.0);
  const auto& terms = set.terms.at("a");
  bool seen_zero = false;
  for (const SalientTerm& t : terms) {
    if (t.idf == 0.0) seen_zero = true;
    if (seen_zero) EXPECT_EQ(t.idf, 0.0);
  }
  // Positive-idf terms already cover every position, so "the" is never chosen.
  for (const SalientTerm& t : terms) EXPECT_GT(t.idf, 0.0) << Join(t.tokens);
}

TEST(SalientTest, FractionControlsCoverage) {
  const auto docs = Docs({{"a", "p q r s t u v w x y"}, {"b", "p q z"}});
  const SalientTermSet all = SelectSalientTerms(docs, 1.0);
  // With full coverage every position of "a" is inside some chosen term.
  std::vector<bool> covered(10, false);
  for (const SalientTerm& t : all.terms.at("a")) {
    for (std::size_t s : internal::Occurrences(docs[0].tokens, t.tokens)) {
      for (std::size_t p = s; p < s + t.tokens.size(); ++p) covered[p] = true;
    }
  }
  for (bool c : covered) EXPECT_TRUE(c);
  const SalientTermSet tenth = SelectSalientTerms(docs, 0.1);
  EXPECT_EQ(tenth.terms.at("a").size(), 1u);
  EXPECT_THROW(SelectSalientTerms(docs, 0.0), UsageError);
  EXPECT_THROW(SelectSalientTerms(docs, 1.5), UsageError);
  EXPECT_THROW(SelectSalientTerms(std::span(docs).first(1), 0.5), DataError);
}

SalientTermSet Terms(const char* doc, std::initializer_list<const char*> terms) {
  SalientTermSet set;
  set.fraction = 0.1;
  for (const char* t : terms) set.terms[doc].push_back({Tokenize(t), 1, 1, 1});
  return set;
}

TEST(SterTest, InsertionsNeverCount) {
  const SalientTermSet set = Terms("d", {"alpha", "beta gamma"});
  const std::vector<SterItem> items = {
      {"d", T("alpha x beta gamma alpha"), T("uh alpha x um beta gamma alpha er")}};
  EXPECT_EQ(Ster(items, set).ster, 0.0);
  EXPECT_EQ(Ster(items, set).counts.occurrences, 3);
  std::vector<std::pair<TokenSequence, TokenSequence>> pairs = {{items[0].ref, items[0].hyp}};
  EXPECT_GT(Wer(pairs).wer, 0.0);
}

TEST(SterTest, DeletionsAndSubstitutionsCount) {
  const SalientTermSet set = Terms("d", {"alpha", "beta gamma"});
  // Occurrences: alpha@0, alpha@4, beta gamma@2, alpha@6 -> 4.
  const TokenSequence ref = T("alpha x beta gamma alpha y alpha");
  const std::vector<SterItem> one_deleted = {{"d", ref, T("alpha x beta gamma y alpha")}};
  EXPECT_DOUBLE_EQ(Ster(one_deleted, set).ster, 0.25);
  const std::vector<SterItem> bigram_half = {{"d", ref, T("alpha x beta delta alpha y alpha")}};
  EXPECT_DOUBLE_EQ(Ster(bigram_half, set).ster, 0.25);
  const std::vector<SterItem> none = {{"other", ref, ref}};
  EXPECT_THROW(Ster(none, set), DataError);
}

TEST(SalientTest, FileRoundTrip) {
  const auto docs = Docs({{"d1", "x x y"}, {"d2", "y z é"}});
  const SalientTermSet set = SelectSalientTerms(docs, 0.5);
  const std::string path = ::testing::TempDir() + "/salient.jsonl";
  io::WriteFile(path, SerializeSalientTerms(set));
  const SalientTermSet back = ReadSalientTerms(path);
  EXPECT_EQ(back.fraction, 0.5);
  ASSERT_EQ(back.terms.size(), set.terms.size());
  for (const auto& [id, terms] : set.terms) {
    ASSERT_EQ(back.terms.at(id).size(), terms.size());
    for (std::size_t i = 0; i < terms.size(); ++i) {
      EXPECT_EQ(back.terms.at(id)[i].tokens, terms[i].tokens);
      EXPECT_EQ(back.terms.at(id)[i].tfidf, terms[i].tfidf);
    }
  }
}

}  // namespace
}  // namespace lattice_rescore
