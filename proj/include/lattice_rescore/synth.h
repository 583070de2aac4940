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

// Synthetic corpora: a small Markov-chain language, planted reference
// transcripts and emission matrices with controllable acoustic confusion.
//
// Words come in confusable pairs (2i, 2i+1). Every word is rendered as one
// emission frame followed by one blank frame. On the emission frame the true
// word and its partner share most of the mass; with probability `noise` the
// partner gets the larger share. The chain strongly prefers a few successors
// per word and never prefers both members of a pair, so a language model
// trained on the chain can often undo the confusion.

#ifndef LATTICE_RESCORE_SYNTH_H_
#define LATTICE_RESCORE_SYNTH_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lattice_rescore/emissions.h"
#include "lattice_rescore/errors.h"
#include "lattice_rescore/lattice.h"
#include "lattice_rescore/salient.h"
#include "lattice_rescore/tokens.h"

namespace lattice_rescore {

struct SynthConfig {
  std::uint64_t seed = 7;
  int utterances = 100;
  int dev_utterances = 0;
  int min_segments = 2;
  int max_segments = 3;
  int min_words = 4;  // per segment
  int max_words = 7;
  int word_pairs = 16;
  double noise = 0.15;
  int lm_sentences = 2000;

  void Check() const {
    if (utterances < 1 || dev_utterances < 0) throw UsageError("bad utterance count");
    if (min_segments < 1 || max_segments < min_segments) throw UsageError("bad segment range");
    if (min_words < 1 || max_words < min_words) throw UsageError("bad word range");
    if (word_pairs < 2 || word_pairs > 50) throw UsageError("word pairs must be in [2, 50]");
    if (!(noise >= 0.0 && noise <= 1.0)) throw UsageError("noise must be in [0, 1]");
    if (lm_sentences < 1) throw UsageError("lm sentences must be positive");
  }
};

namespace synth {

constexpr const char* kBlank = "<b>";

// Uniform double in [0, 1) from the top 53 bits; keeps outputs identical
// across standard libraries.
inline double Uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline int UniformInt(std::mt19937_64& rng, int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo + 1);
  return lo + static_cast<int>(rng() % span);
}

inline int Sample(std::mt19937_64& rng, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = Uniform(rng) * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return static_cast<int>(i);
    u -= weights[i];
  }
  return static_cast<int>(weights.size()) - 1;
}

struct Language {
  TokenSequence words;
  std::vector<std::vector<double>> next;  // next[w][v] = P(v | w)

  int Partner(int w) const { return w ^ 1; }

  std::vector<int> SampleText(std::mt19937_64& rng, int length) const {
    std::vector<int> out;
    int w = UniformInt(rng, 0, static_cast<int>(words.size()) - 1);
    for (int i = 0; i < length; ++i) {
      out.push_back(w);
      w = Sample(rng, next[static_cast<std::size_t>(w)]);
    }
    return out;
  }
};

inline Language MakeLanguage(std::mt19937_64& rng, int word_pairs) {
  static const char* kOnsets[] = {"ka", "lo", "mi", "nu", "pe", "ra", "si", "to", "vu", "ze"};
  static const char* kCodas[][2] = {{"da", "ta"}, {"ban", "pan"}, {"gor", "kor"},
                                    {"vel", "fel"}, {"zim", "sim"}};
  Language lang;
  for (int p = 0; p < word_pairs; ++p) {
    const std::string stem = kOnsets[p % 10];
    const auto& coda = kCodas[p / 10];
    lang.words.push_back(stem + coda[0]);
    lang.words.push_back(stem + coda[1]);
  }
  const int n = static_cast<int>(lang.words.size());
  lang.next.assign(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n)));
  static const double kFavored[] = {0.5, 0.3, 0.2};
  for (int w = 0; w < n; ++w) {
    std::vector<double>& row = lang.next[static_cast<std::size_t>(w)];
    for (double& p : row) p = 0.1 / n;
    std::vector<int> pairs(static_cast<std::size_t>(word_pairs));
    for (int p = 0; p < word_pairs; ++p) pairs[static_cast<std::size_t>(p)] = p;
    for (int k = 0; k < 3; ++k) {
      const int j = UniformInt(rng, k, word_pairs - 1);
      std::swap(pairs[static_cast<std::size_t>(k)], pairs[static_cast<std::size_t>(j)]);
      const int v = 2 * pairs[static_cast<std::size_t>(k)] + UniformInt(rng, 0, 1);
      row[static_cast<std::size_t>(v)] += 0.9 * kFavored[k];
    }
  }
  return lang;
}

// One emission frame plus one blank frame per word.
inline EmissionMatrix RenderSegment(std::mt19937_64& rng, const Language& lang,
                                    std::span<const int> words, double noise) {
  EmissionMatrix m;
  m.vocab.push_back(kBlank);
  for (const std::string& w : lang.words) m.vocab.push_back(w);
  m.blank = 0;
  const std::size_t v = m.vocab.size();
  for (int w : words) {
    const bool confused = Uniform(rng) < noise;
    const double margin = 0.04 + 0.3 * Uniform(rng);
    const double high = 0.44 + margin / 2, low = 0.44 - margin / 2;
    std::vector<double> p(v, 0.09 / static_cast<double>(v - 3));
    p[0] = 0.03;
    p[static_cast<std::size_t>(w) + 1] = confused ? low : high;
    p[static_cast<std::size_t>(lang.Partner(w)) + 1] = confused ? high : low;
    for (double x : p) m.logits.push_back(std::log(x));
    m.logits.push_back(std::log(0.94));
    for (std::size_t i = 1; i < v; ++i) {
      m.logits.push_back(std::log(0.06 / static_cast<double>(v - 1)));
    }
    m.frames += 2;
  }
  // Renormalize against rounding so every row passes validation.
  for (int t = 0; t < m.frames; ++t) {
    const double z = LogSumExp(m.row(t));
    for (std::size_t i = 0; i < v; ++i) m.logits[static_cast<std::size_t>(t) * v + i] -= z;
  }
  return m;
}

}  // namespace synth

struct SynthUtterance {
  EmissionUtterance emissions;
  Document reference;  // doc_id == utterance_id
};

struct SynthCorpus {
  std::vector<SynthUtterance> eval;
  std::vector<SynthUtterance> dev;
  std::vector<std::string> lm_corpus;  // fresh samples from the same chain
};

inline SynthCorpus GenerateCorpus(const SynthConfig& config) {
  config.Check();
  std::mt19937_64 rng(config.seed);
  const synth::Language lang = synth::MakeLanguage(rng, config.word_pairs);
  auto make = [&](const std::string& prefix, int count) {
    std::vector<SynthUtterance> out;
    for (int u = 0; u < count; ++u) {
      char id[32];
      std::snprintf(id, sizeof(id), "%s%04d", prefix.c_str(), u);
      SynthUtterance su;
      su.emissions.utterance_id = id;
      su.emissions.blank = synth::kBlank;
      su.reference.doc_id = id;
      const int segments = synth::UniformInt(rng, config.min_segments, config.max_segments);
      std::vector<int> lengths;
      int total = 0;
      for (int s = 0; s < segments; ++s) {
        lengths.push_back(synth::UniformInt(rng, config.min_words, config.max_words));
        total += lengths.back();
      }
      const std::vector<int> text = lang.SampleText(rng, total);
      std::size_t at = 0;
      for (int len : lengths) {
        const std::span<const int> words(text.data() + at, static_cast<std::size_t>(len));
        su.emissions.segments.push_back(synth::RenderSegment(rng, lang, words, config.noise));
        at += static_cast<std::size_t>(len);
      }
      su.emissions.vocab = su.emissions.segments.front().vocab;
      for (int w : text) su.reference.tokens.push_back(lang.words[static_cast<std::size_t>(w)]);
      out.push_back(std::move(su));
    }
    return out;
  };
  SynthCorpus corpus;
  corpus.eval = make("utt", config.utterances);
  corpus.dev = make("dev", config.dev_utterances);
  const int mean_length = (config.min_segments + config.max_segments) *
                          (config.min_words + config.max_words) / 4;
  for (int i = 0; i < config.lm_sentences; ++i) {
    const int len = synth::UniformInt(rng, std::max(1, mean_length / 2), mean_length * 3 / 2);
    TokenSequence words;
    for (int w : lang.SampleText(rng, len)) words.push_back(lang.words[static_cast<std::size_t>(w)]);
    corpus.lm_corpus.push_back(Join(words));
  }
  return corpus;
}

// A suite where segment 2 is ambiguous between a word and its partner and
// only the last word of segment 1 tells them apart; segment 3 hinges on
// segment 2 alone, so context beyond one segment carries no extra signal.
struct CarryoverSuite {
  std::vector<Utterance> utterances;
  std::vector<TokenSequence> refs;
  std::vector<std::string> lm_corpus;
};

inline CarryoverSuite MakeCarryoverSuite(std::uint64_t seed, int count = 50) {
  std::mt19937_64 rng(seed);
  CarryoverSuite suite;
  auto word = [](const char* stem, int i) { return std::string(stem) + std::to_string(i); };
  auto one_path = [](const std::string& id, const std::string& w) {
    Lattice l;
    l.segment_id = id;
    l.num_states = 2;
    l.finals = {1};
    l.arcs = {{0, 1, w, -0.5, -2.0}};
    return l;
  };
  auto two_paths = [](const std::string& id, const std::string& a, double hat_a,
                      const std::string& b, double hat_b) {
    Lattice l;
    l.segment_id = id;
    l.num_states = 2;
    l.finals = {1};
    l.arcs = {{0, 1, a, hat_a, -2.0}, {0, 1, b, hat_b, -2.0}};
    return l;
  };
  for (int i = 0; i < count; ++i) {
    const std::string p = word("pa", i), q = word("qa", i);
    const std::string r = word("ra", i), s = word("sa", i);
    const std::string cue_p = word("cue", 2 * i), cue_q = word("cue", 2 * i + 1);
    // The LM sees both readings equally often, so without context it cannot
    // choose between p and q. Odd utterances say q; the acoustics lean the
    // wrong way about half the time.
    const bool want_q = i % 2 == 1;
    const bool misled = synth::Uniform(rng) < 0.5;
    const double lean = 0.1 + 0.2 * synth::Uniform(rng);
    const double hat_p = -1.0 + ((want_q != misled) ? -lean : lean);
    Utterance u;
    char id[32];
    std::snprintf(id, sizeof(id), "carry%03d", i);
    u.utterance_id = id;
    u.segments = {one_path(u.utterance_id + "-0", want_q ? cue_q : cue_p),
                  two_paths(u.utterance_id + "-1", p, hat_p, q, -1.0),
                  two_paths(u.utterance_id + "-2", r, -1.0, s, -1.05)};
    suite.utterances.push_back(std::move(u));
    suite.refs.push_back(want_q ? TokenSequence{cue_q, q, s} : TokenSequence{cue_p, p, r});
    for (int k = 0; k < 5; ++k) {
      suite.lm_corpus.push_back(cue_p + " " + p + " " + r);
      suite.lm_corpus.push_back(cue_q + " " + q + " " + s);
    }
  }
  return suite;
}

}  // namespace lattice_rescore

#endif  // LATTICE_RESCORE_SYNTH_H_
