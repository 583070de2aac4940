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

#include "lattice_rescore/evaluation.h"

#include <random>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "lattice_rescore/decoder.h"
#include "support/random_lattices.h"

namespace lattice_rescore {
namespace {

using ::lattice_rescore::testing::Chain;
using ::lattice_rescore::testing::RandomDag;

TEST(EvaluateTest, PerfectTranscripts) {
  Utterance u;
  u.utterance_id = "d1";
  u.segments = {Chain({"red", "fox"})};
  const std::vector<Document> docs = {{"d1", Tokenize("red fox")}, {"d2", Tokenize("blue fox")}};
  const SalientTermSet terms = SelectSalientTerms(docs, 1.0);
  const std::vector<EvalItem> items = {{"d1", docs[0].tokens, docs[0].tokens, &u},
                                       {"d2", docs[1].tokens, docs[1].tokens, nullptr}};
  const EvalReport r = Evaluate(items, &terms);
  EXPECT_EQ(r.wer, 0.0);
  EXPECT_EQ(*r.ster, 0.0);
  EXPECT_FALSE(r.oracle_wer.has_value());
  EXPECT_FALSE(r.paths.has_value());
  EXPECT_GT(r.ster_counts.occurrences, 0);
}

TEST(EvaluateTest, CountsAndOracle) {
  Utterance u;
  u.utterance_id = "d";
  u.segments = {Chain({"a", "b"}), Chain({"c"})};
  Lattice alt;
  alt.num_states = 2;
  alt.finals = {1};
  alt.arcs = {{0, 1, "c", -1, 0}, {0, 1, "x", -2, 0}};
  u.segments[1] = alt;
  const std::vector<EvalItem> items = {{"d", Tokenize("a b x"), Tokenize("a b c z"), &u}};
  const EvalReport r = Evaluate(items);
  EXPECT_EQ(r.counts.ref_words, 3);
  EXPECT_EQ(r.counts.substitutions, 1);
  EXPECT_EQ(r.counts.insertions, 1);
  EXPECT_DOUBLE_EQ(r.wer, 2.0 / 3.0);
  EXPECT_EQ(*r.oracle_wer, 0.0);
  EXPECT_EQ(r.paths->total, 3);
  EXPECT_EQ(r.paths->segments, 2u);
  EXPECT_DOUBLE_EQ(r.paths->mean, 1.5);
}

TEST(EvaluateTest, OracleNeverExceedsFirstPass) {
  std::mt19937_64 rng(21);
  std::vector<Utterance> utts(30);
  std::vector<EvalItem> items;
  for (int i = 0; i < 30; ++i) {
    Utterance& u = utts[static_cast<std::size_t>(i)];
    u.utterance_id = "u" + std::to_string(i);
    u.segments = {RandomDag(rng, 5, 6), RandomDag(rng, 4, 3)};
    items.push_back({u.utterance_id, Tokenize("a b c a b c a"), FirstPassTranscript(u), &u});
  }
  const EvalReport r = Evaluate(items);
  EXPECT_LE(*r.oracle_wer, r.wer);
  for (const DocumentReport& d : r.documents) EXPECT_LE(*d.oracle_errors, d.counts.errors());
}

TEST(EvaluateTest, Errors) {
  EXPECT_THROW(Evaluate({}), DataError);
  const std::vector<EvalItem> empty_ref = {{"d", {}, {"a"}, nullptr}};
  EXPECT_THROW(Evaluate(empty_ref), DataError);
  const SalientTermSet none;
  const std::vector<EvalItem> items = {{"d", {"a"}, {"a"}, nullptr}};
  EXPECT_THROW(Evaluate(items, &none), DataError);
}

TEST(EvaluateTest, CsvAndJson) {
  const std::vector<EvalItem> items = {{"x,1", Tokenize("a b"), Tokenize("a"), nullptr},
                                       {"y", Tokenize("c d"), Tokenize("c d e"), nullptr}};
  const EvalReport r = Evaluate(items);
  EXPECT_EQ(EvalReportToCsv(r),
            "doc_id,ref_words,substitutions,deletions,insertions,wer,oracle_wer,"
            "salient_terms,salient_errors,ster\n"
            "\"x,1\",2,0,1,0,0.500000,,,,\n"
            "y,2,0,0,1,0.500000,,,,\n"
            "*,4,0,1,1,0.500000,,,,\n");
  const OrderedJson j = EvalReportToJson(r);
  EXPECT_EQ(j["wer"], 0.5);
  EXPECT_TRUE(j["oracle_wer"].is_null());
  EXPECT_TRUE(j["ster"].is_null());
  EXPECT_EQ(j["counts"]["errors"], 2);
  EXPECT_EQ(j["documents"].size(), 2u);
}

TEST(QualityBlockTest, Layout) {
  EvalReport r;
  r.counts.ref_words = 10;
  r.wer = 0.123;
  r.oracle_wer = 0.073;
  r.paths = PathStats{PathCount(8), 2, 4e20};
  EvalReport no_refs;
  no_refs.paths = PathStats{PathCount(2), 2, 1.0};
  const std::vector<std::pair<std::string, EvalReport>> rows = {{"merged", r},
                                                                {"trie", no_refs}};
  EXPECT_EQ(QualityBlock(rows),
            "lattice         WER  oracle WER  #paths/segment\n"
            "merged         12.3         7.3            4e20\n"
            "trie              -           -               1\n");
}

}  // namespace
}  // namespace lattice_rescore
