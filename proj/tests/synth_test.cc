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

#include "lattice_rescore/synth.h"

#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "lattice_rescore/decoder.h"
#include "lattice_rescore/metrics.h"
#include "lattice_rescore/ngram.h"
#include "lattice_rescore/rescorer.h"

namespace lattice_rescore {
namespace {

SynthConfig Small(std::uint64_t seed) {
  SynthConfig c;
  c.seed = seed;
  c.utterances = 12;
  c.dev_utterances = 4;
  c.lm_sentences = 50;
  return c;
}

TEST(SynthTest, SameSeedSameCorpus) {
  const SynthCorpus a = GenerateCorpus(Small(3));
  const SynthCorpus b = GenerateCorpus(Small(3));
  const SynthCorpus c = GenerateCorpus(Small(4));
  ASSERT_EQ(a.eval.size(), 12u);
  ASSERT_EQ(a.dev.size(), 4u);
  EXPECT_EQ(a.lm_corpus, b.lm_corpus);
  for (std::size_t i = 0; i < a.eval.size(); ++i) {
    EXPECT_EQ(EmissionUtteranceToJson(a.eval[i].emissions).dump(),
              EmissionUtteranceToJson(b.eval[i].emissions).dump());
    EXPECT_EQ(a.eval[i].reference.tokens, b.eval[i].reference.tokens);
  }
  EXPECT_NE(a.lm_corpus, c.lm_corpus);
  EXPECT_EQ(a.eval[0].emissions.utterance_id, "utt0000");
  EXPECT_EQ(a.dev[3].reference.doc_id, "dev0003");
}

TEST(SynthTest, ShapesAndValidity) {
  const SynthConfig config = Small(5);
  const SynthCorpus corpus = GenerateCorpus(config);
  for (const SynthUtterance& u : corpus.eval) {
    const auto segments = static_cast<int>(u.emissions.segments.size());
    EXPECT_GE(segments, config.min_segments);
    EXPECT_LE(segments, config.max_segments);
    int frames = 0;
    for (const EmissionMatrix& m : u.emissions.segments) {
      ValidateEmissions(m);
      EXPECT_EQ(m.vocab, u.emissions.vocab);
      EXPECT_EQ(m.frames % 2, 0);
      frames += m.frames;
    }
    EXPECT_EQ(static_cast<std::size_t>(frames), 2 * u.reference.tokens.size());
    // Reparses through the file format.
    const Json j = EmissionUtteranceToJson(u.emissions);
    EXPECT_EQ(EmissionUtteranceFromJson(j, "x").segments.size(), u.emissions.segments.size());
  }
}

TEST(SynthTest, NoiselessEmissionsDecodePerfectly) {
  SynthConfig config = Small(8);
  config.noise = 0.0;
  const SynthCorpus corpus = GenerateCorpus(config);
  DecoderConfig dc;
  for (const SynthUtterance& u : corpus.eval) {
    const LabelLM lm(u.emissions.segments[0].Labels(), 1);
    const UtteranceDecodeResult r = DecodeUtterance(u.emissions.segments, lm, dc);
    EXPECT_EQ(FirstPassTranscript(r.utterance), u.reference.tokens);
  }
}

TEST(SynthTest, NoiseMakesErrors) {
  SynthConfig config = Small(8);
  config.noise = 0.5;
  const SynthCorpus corpus = GenerateCorpus(config);
  std::vector<std::pair<TokenSequence, TokenSequence>> pairs;
  for (const SynthUtterance& u : corpus.eval) {
    const LabelLM lm(u.emissions.segments[0].Labels(), 1);
    pairs.emplace_back(u.reference.tokens,
                       FirstPassTranscript(DecodeUtterance(u.emissions.segments, lm, {}).utterance));
  }
  const WerResult w = Wer(pairs);
  EXPECT_GT(w.wer, 0.3);
  EXPECT_EQ(w.counts.insertions + w.counts.deletions, 0);
}

TEST(SynthTest, BadConfig) {
  SynthConfig c;
  c.noise = 1.5;
  EXPECT_THROW(GenerateCorpus(c), UsageError);
  c = SynthConfig{};
  c.max_words = 0;
  EXPECT_THROW(GenerateCorpus(c), UsageError);
}

TEST(CarryoverSuiteTest, OnlyContextDisambiguates) {
  const CarryoverSuite suite = MakeCarryoverSuite(1, 20);
  ASSERT_EQ(suite.utterances.size(), 20u);
  NGramScorer lm = NGramScorer::Train(suite.lm_corpus, 2);
  auto errors = [&](int m) {
    RescoreParams p;
    p.nu = 1.0;
    p.context_segments = m;
    long e = 0;
    for (std::size_t i = 0; i < suite.utterances.size(); ++i) {
      e += Align(suite.refs[i], RescoreUtterance(suite.utterances[i], lm, p).transcript)
               .Counts()
               .errors();
    }
    return e;
  };
  EXPECT_EQ(errors(1), 0);
  EXPECT_EQ(errors(2), 0);
  EXPECT_GT(errors(0), 0);
  // Without context the two readings score the same.
  const std::string targets[] = {"pa0", "qa0"};
  const std::vector<double> s = lm.Score("", targets);
  EXPECT_EQ(s[0], s[1]);
}

}  // namespace
}  // namespace lattice_rescore
