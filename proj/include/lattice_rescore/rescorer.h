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

// Second-pass N-best rescoring of segment lattices.
//
// Each hypothesis is scored as
//   combined = hat - mu * ilm + nu * elm
// where hat and ilm come from the lattice and elm from an external scorer
// conditioned on the rescored 1-best text of up to `context_segments`
// preceding segments.

#ifndef LATTICE_RESCORE_RESCORER_H_
#define LATTICE_RESCORE_RESCORER_H_

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lattice_rescore/errors.h"
#include "lattice_rescore/lattice.h"
#include "lattice_rescore/lattice_io.h"
#include "lattice_rescore/scorer.h"
#include "lattice_rescore/tokens.h"

namespace lattice_rescore {

struct Hypothesis {
  TokenSequence tokens;
  double hat = 0.0;
  double ilm = 0.0;
  std::optional<double> elm;
  std::optional<double> combined;
};

struct RescoreParams {
  double mu = 0.0;
  double nu = 0.0;
  std::size_t nbest = 16;
  int context_segments = 1;

  void Check() const {
    if (!(mu >= 0.0) || !(nu >= 0.0) || !std::isfinite(mu) || !std::isfinite(nu)) {
      throw UsageError("mu and nu must be finite and nonnegative");
    }
    if (nbest < 1) throw UsageError("nbest must be at least 1");
    if (context_segments < 0) throw UsageError("context segments must be nonnegative");
  }
};

// hat - mu * ilm + nu * elm. With nu == 0 the external score is ignored, so
// an elm of -infinity cannot turn the result into NaN.
inline double Combine(double hat, double ilm, double mu, double nu, double elm) {
  double s = hat - mu * ilm;
  if (nu != 0.0) s += nu * elm;
  return s;
}

inline double Combine(const Hypothesis& h, double mu, double nu, double elm) {
  return Combine(h.hat, h.ilm, mu, nu, elm);
}

inline std::vector<Hypothesis> NBest(const Lattice& lattice, std::size_t n) {
  std::vector<Hypothesis> out;
  for (PathEntry& p : DistinctBestPaths(lattice, n)) {
    out.push_back({std::move(p.tokens), p.hat, p.ilm, std::nullopt, std::nullopt});
  }
  return out;
}

// Fills `elm` for every hypothesis with one batched scorer call.
inline void ScoreHypotheses(std::vector<Hypothesis>& hyps, Scorer& scorer,
                            std::string_view context) {
  std::vector<std::string> texts;
  texts.reserve(hyps.size());
  for (const Hypothesis& h : hyps) texts.push_back(Join(h.tokens));
  const std::vector<double> scores = scorer.Score(context, texts);
  if (scores.size() != hyps.size()) {
    throw LengthMismatchError("scorer returned " + std::to_string(scores.size()) +
                              " scores for " + std::to_string(hyps.size()) + " hypotheses");
  }
  for (std::size_t i = 0; i < hyps.size(); ++i) hyps[i].elm = scores[i];
}

// Fills `combined` and sorts by it, descending, ties to the smaller token
// sequence. Every hypothesis needs its elm.
inline void RankHypotheses(std::vector<Hypothesis>& hyps, double mu, double nu) {
  for (Hypothesis& h : hyps) {
    if (!h.elm) throw UsageError("cannot rank a hypothesis without an external score");
    h.combined = Combine(h, mu, nu, *h.elm);
  }
  std::stable_sort(hyps.begin(), hyps.end(), [](const Hypothesis& a, const Hypothesis& b) {
    if (*a.combined != *b.combined) return *a.combined > *b.combined;
    return a.tokens < b.tokens;
  });
}

inline std::vector<Hypothesis> RescoreNBest(std::vector<Hypothesis> nbest, Scorer& scorer,
                                            const RescoreParams& params,
                                            std::string_view context) {
  ScoreHypotheses(nbest, scorer, context);
  RankHypotheses(nbest, params.mu, params.nu);
  return nbest;
}

inline std::vector<Hypothesis> RescoreSegment(const Lattice& lattice, Scorer& scorer,
                                              const RescoreParams& params,
                                              std::string_view context) {
  params.Check();
  return RescoreNBest(NBest(lattice, params.nbest), scorer, params, context);
}

struct SegmentNBest {
  std::string segment_id;
  std::vector<Hypothesis> hypotheses;
};

inline std::vector<SegmentNBest> ExtractNBest(const Utterance& utterance, std::size_t n) {
  std::vector<SegmentNBest> out;
  for (const Lattice& l : utterance.segments) out.push_back({l.segment_id, NBest(l, n)});
  return out;
}

struct RescoredSegment {
  std::string segment_id;
  std::vector<Hypothesis> ranked;
};

struct RescoredUtterance {
  std::string utterance_id;
  TokenSequence transcript;
  std::vector<RescoredSegment> segments;
  RescoreParams params;
};

// Segment s is scored with the rescored 1-best texts of segments
// s-m .. s-1 as context (m = context_segments; empty 1-bests are skipped).
inline RescoredUtterance RescoreSegments(std::string utterance_id,
                                         std::span<const SegmentNBest> segments,
                                         Scorer& scorer, const RescoreParams& params) {
  params.Check();
  RescoredUtterance result;
  result.utterance_id = std::move(utterance_id);
  result.params = params;
  std::vector<TokenSequence> best;
  for (const SegmentNBest& segment : segments) {
    TokenSequence context_tokens;
    const std::size_t m = static_cast<std::size_t>(params.context_segments);
    for (std::size_t k = best.size() - std::min(m, best.size()); k < best.size(); ++k) {
      context_tokens.insert(context_tokens.end(), best[k].begin(), best[k].end());
    }
    std::vector<Hypothesis> hyps = segment.hypotheses;
    if (hyps.size() > params.nbest) hyps.resize(params.nbest);
    if (hyps.empty()) throw DataError("segment '" + segment.segment_id + "' has no hypotheses");
    hyps = RescoreNBest(std::move(hyps), scorer, params, Join(context_tokens));
    best.push_back(hyps.front().tokens);
    result.transcript.insert(result.transcript.end(), best.back().begin(), best.back().end());
    result.segments.push_back({segment.segment_id, std::move(hyps)});
  }
  return result;
}

inline RescoredUtterance RescoreUtterance(const Utterance& utterance, Scorer& scorer,
                                          const RescoreParams& params) {
  params.Check();
  const std::vector<SegmentNBest> nbest = ExtractNBest(utterance, params.nbest);
  return RescoreSegments(utterance.utterance_id, nbest, scorer, params);
}

// Transcript file: JSON-lines
//   {"utterance_id": str, "transcript": str, "segments": [{"segment_id": str,
//    "nbest": [{"tokens": str, "hat": f, "ilm": f, "elm": f, "combined": f}]}]}
// An elm or combined score of -infinity is written as null.
inline std::string SerializeTranscript(const RescoredUtterance& u) {
  auto number = [](std::optional<double> v) -> OrderedJson {
    if (!v || !std::isfinite(*v)) return nullptr;
    return *v;
  };
  OrderedJson j;
  j["utterance_id"] = u.utterance_id;
  j["transcript"] = Join(u.transcript);
  OrderedJson segments = OrderedJson::array();
  for (const RescoredSegment& s : u.segments) {
    OrderedJson seg;
    seg["segment_id"] = s.segment_id;
    OrderedJson list = OrderedJson::array();
    for (const Hypothesis& h : s.ranked) {
      OrderedJson e;
      e["tokens"] = Join(h.tokens);
      e["hat"] = h.hat;
      e["ilm"] = h.ilm;
      e["elm"] = number(h.elm);
      e["combined"] = number(h.combined);
      list.push_back(std::move(e));
    }
    seg["nbest"] = std::move(list);
    segments.push_back(std::move(seg));
  }
  j["segments"] = std::move(segments);
  return j.dump();
}

struct TranscriptRecord {
  std::string utterance_id;
  TokenSequence transcript;
};

inline std::vector<TranscriptRecord> ReadTranscripts(const std::string& path,
                                                     bool lowercase = false) {
  std::vector<TranscriptRecord> out;
  const std::vector<std::string> lines = io::ReadLines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string where = path + ":" + std::to_string(i + 1);
    Json j = io::ParseJson(lines[i], where);
    io::RejectUnknownFields(j, {"utterance_id", "transcript", "segments"}, where);
    out.push_back({io::Get<std::string>(j, "utterance_id", where),
                   Tokenize(io::Get<std::string>(j, "transcript", where), lowercase)});
  }
  return out;
}

}  // namespace lattice_rescore

#endif  // LATTICE_RESCORE_RESCORER_H_
