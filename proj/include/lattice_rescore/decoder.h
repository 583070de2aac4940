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

// Frame-synchronous beam search over emission matrices with a limited-context
// label LM, recording a beam trace from which segment lattices are built.
//
// At every frame each active search state either emits blank (consumes the
// frame, no label) or one non-blank label. A hypothesis scores
//   sum(emission log-probs) + label_lm_weight * sum(label-LM log-probs)
// plus, with fusion, -mu_f * sum(label-LM) + nu_f * ELM increments.
//
// Search states are keyed by label context. With merging on the key is the
// last `label_context` labels, so hypotheses that agree on it share a state
// (best score kept for search, every incoming arc kept for the lattice).
// With merging off the key is the whole label history and the lattice is the
// tree of surviving hypotheses. Fusion always disables merging because the
// external LM sees the full history.
//
// Lattice states correspond to (emission frame, key) pairs, which keeps the
// graph acyclic and makes every arc score a function of its two endpoints:
// the arc into a state emitted at frame t from a state emitted at frame t'
// carries the blanks of frames t'+1..t-1 plus the frame-t emission. Trailing
// blanks of a surviving hypothesis are folded into a copy of its last arc
// that ends in a dedicated final state.

#ifndef LATTICE_RESCORE_DECODER_H_
#define LATTICE_RESCORE_DECODER_H_

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lattice_rescore/emissions.h"
#include "lattice_rescore/errors.h"
#include "lattice_rescore/label_lm.h"
#include "lattice_rescore/lattice.h"
#include "lattice_rescore/scorer.h"
#include "lattice_rescore/tokens.h"

namespace lattice_rescore {

struct FusionConfig {
  std::shared_ptr<Scorer> scorer;
  double weight = 0.0;      // on external-LM increments
  double ilm_weight = 0.0;  // on subtracted label-LM log-probs
};

struct DecoderConfig {
  int beam_size = 8;
  int label_context = 2;
  bool merge_states = true;
  double label_lm_weight = 0.0;
  std::optional<FusionConfig> fusion;

  bool EffectiveMerge() const { return merge_states && !fusion.has_value(); }
};

struct TraceNode {
  int frame = -1;          // emission frame; -1 for the segment start
  std::vector<int> key;    // label context at this node
  double best_score = 0.0; // best forward score into this node
  std::vector<int> best_tokens;
};

struct TraceArc {
  int from = 0;
  int to = 0;
  int label = 0;
  double hat = 0.0;
  double ilm = 0.0;
  bool best = false;  // the Viterbi-best incoming arc of `to`
};

struct TracePred {
  int node = 0;
  double trailing = 0.0;  // blank log-probs after the node's frame
};

struct TraceSurvivor {
  std::vector<TracePred> preds;
  std::size_t best_pred = 0;
  double score = 0.0;
  std::vector<int> tokens;
};

// Everything needed to build either lattice topology after a segment search.
struct BeamTrace {
  std::string segment_id;
  TokenSequence labels;  // label id -> token
  int num_frames = 0;
  std::vector<TraceNode> nodes;  // node 0 is the start
  std::vector<TraceArc> arcs;
  std::vector<TraceSurvivor> survivors;
};

struct SegmentDecodeResult {
  Lattice lattice;
  TokenSequence one_best;
  double one_best_score = 0.0;
  BeamTrace trace;
};

// Merge on: every recorded arc, every predecessor of every survivor. Merge
// off: only Viterbi-best arcs and each survivor's best predecessor, which
// yields a tree with one path per surviving hypothesis. The trie path set is
// therefore always a subset of the merged one.
inline Lattice BuildLattice(const BeamTrace& trace, bool merge) {
  if (trace.nodes.empty() || trace.survivors.empty()) {
    throw DataError("cannot build a lattice from an empty beam trace");
  }
  const std::size_t num_nodes = trace.nodes.size();
  std::vector<std::vector<int>> in_arcs(num_nodes);
  for (std::size_t a = 0; a < trace.arcs.size(); ++a) {
    const TraceArc& arc = trace.arcs[a];
    if (arc.from < 0 || arc.to < 0 || static_cast<std::size_t>(arc.from) >= num_nodes ||
        static_cast<std::size_t>(arc.to) >= num_nodes) {
      throw DataError("beam trace arc refers to an unknown node");
    }
    if (arc.label < 0 || static_cast<std::size_t>(arc.label) >= trace.labels.size()) {
      throw DataError("beam trace arc has an unknown label");
    }
    if (merge || arc.best) in_arcs[static_cast<std::size_t>(arc.to)].push_back(static_cast<int>(a));
  }

  // Survivor endpoints, deduplicated, in first-seen order.
  std::vector<TracePred> ends;
  std::set<int> seen_end;
  bool empty_path = false;
  for (const TraceSurvivor& survivor : trace.survivors) {
    std::vector<TracePred> chosen;
    if (merge) {
      chosen = survivor.preds;
    } else if (survivor.best_pred < survivor.preds.size()) {
      chosen.push_back(survivor.preds[survivor.best_pred]);
    }
    for (const TracePred& p : chosen) {
      if (p.node == 0) {
        empty_path = true;
      } else if (seen_end.insert(p.node).second) {
        ends.push_back(p);
      }
    }
  }

  Lattice lattice;
  lattice.segment_id = trace.segment_id;
  if (ends.empty()) {
    if (!empty_path) throw DataError("beam trace has no surviving hypothesis");
    lattice.num_states = 1;
    lattice.start = 0;
    lattice.finals = {0};
    return lattice;
  }

  // Co-reachability from the survivor endpoints over the chosen arcs.
  std::vector<bool> keep(num_nodes, false);
  std::vector<int> stack;
  for (const TracePred& p : ends) {
    if (!keep[static_cast<std::size_t>(p.node)]) {
      keep[static_cast<std::size_t>(p.node)] = true;
      stack.push_back(p.node);
    }
  }
  while (!stack.empty()) {
    const int node = stack.back();
    stack.pop_back();
    for (int a : in_arcs[static_cast<std::size_t>(node)]) {
      const int from = trace.arcs[static_cast<std::size_t>(a)].from;
      if (!keep[static_cast<std::size_t>(from)]) {
        keep[static_cast<std::size_t>(from)] = true;
        stack.push_back(from);
      }
    }
  }
  keep[0] = true;

  // Number kept nodes by (frame, node id); the start has frame -1.
  std::vector<int> kept;
  for (std::size_t i = 0; i < num_nodes; ++i) {
    if (keep[i]) kept.push_back(static_cast<int>(i));
  }
  std::stable_sort(kept.begin(), kept.end(), [&trace](int a, int b) {
    return trace.nodes[static_cast<std::size_t>(a)].frame <
           trace.nodes[static_cast<std::size_t>(b)].frame;
  });
  std::vector<StateId> state_of(num_nodes, -1);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    state_of[static_cast<std::size_t>(kept[i])] = static_cast<StateId>(i);
  }
  StateId next_state = static_cast<StateId>(kept.size());

  // Arcs between kept nodes that lead toward an endpoint.
  for (StateId s = 0; s < static_cast<StateId>(kept.size()); ++s) {
    const int node = kept[static_cast<std::size_t>(s)];
    for (int a : in_arcs[static_cast<std::size_t>(node)]) {
      const TraceArc& arc = trace.arcs[static_cast<std::size_t>(a)];
      lattice.arcs.push_back({state_of[static_cast<std::size_t>(arc.from)], s,
                              trace.labels[static_cast<std::size_t>(arc.label)],
                              arc.hat, arc.ilm});
    }
  }
  // Final copies carry the trailing blanks.
  for (const TracePred& p : ends) {
    const StateId final_state = next_state++;
    lattice.finals.push_back(final_state);
    for (int a : in_arcs[static_cast<std::size_t>(p.node)]) {
      const TraceArc& arc = trace.arcs[static_cast<std::size_t>(a)];
      lattice.arcs.push_back({state_of[static_cast<std::size_t>(arc.from)], final_state,
                              trace.labels[static_cast<std::size_t>(arc.label)],
                              arc.hat + p.trailing, arc.ilm});
    }
  }
  lattice.num_states = next_state;
  lattice.start = 0;

  // Kept nodes that only served as endpoints have no outgoing arcs left; drop
  // them and renumber.
  std::vector<bool> has_out(static_cast<std::size_t>(lattice.num_states), false);
  std::vector<bool> is_final(static_cast<std::size_t>(lattice.num_states), false);
  for (const Arc& arc : lattice.arcs) has_out[static_cast<std::size_t>(arc.from)] = true;
  for (StateId f : lattice.finals) is_final[static_cast<std::size_t>(f)] = true;
  std::vector<StateId> remap(static_cast<std::size_t>(lattice.num_states), -1);
  StateId compact = 0;
  for (StateId s = 0; s < lattice.num_states; ++s) {
    if (s == lattice.start || has_out[static_cast<std::size_t>(s)] ||
        is_final[static_cast<std::size_t>(s)]) {
      remap[static_cast<std::size_t>(s)] = compact++;
    }
  }
  std::vector<Arc> arcs;
  arcs.reserve(lattice.arcs.size());
  for (const Arc& arc : lattice.arcs) {
    if (remap[static_cast<std::size_t>(arc.to)] < 0) continue;
    arcs.push_back({remap[static_cast<std::size_t>(arc.from)],
                    remap[static_cast<std::size_t>(arc.to)], arc.label, arc.hat,
                    arc.ilm});
  }
  lattice.arcs = std::move(arcs);
  for (StateId& f : lattice.finals) f = remap[static_cast<std::size_t>(f)];
  lattice.num_states = compact;
  return lattice;
}

namespace internal {

// Higher score first, then lexicographically smaller label sequence.
inline bool Better(double score_a, const std::vector<int>& tokens_a, double score_b,
                   const std::vector<int>& tokens_b) {
  if (score_a != score_b) return score_a > score_b;
  return tokens_a < tokens_b;
}

inline std::vector<int> Tail(std::vector<int> v, std::size_t n) {
  if (v.size() > n) v.erase(v.begin(), v.end() - static_cast<std::ptrdiff_t>(n));
  return v;
}

}  // namespace internal

// Runs the beam search and returns its trace.
inline BeamTrace RunBeamSearch(const EmissionMatrix& emissions, const LabelLM& label_lm,
                               const DecoderConfig& config,
                               std::span<const std::string> carried_context,
                               std::string segment_id = "") {
  ValidateEmissions(emissions);
  if (emissions.frames == 0) throw DataError("cannot decode a segment with zero frames");
  if (config.beam_size < 1) throw UsageError("beam size must be at least 1");
  if (config.label_context < 1) throw UsageError("label context must be at least 1");
  if (config.label_lm_weight < 0.0) throw UsageError("label LM weight must be nonnegative");
  if (label_lm.order() - 1 > config.label_context) {
    throw UsageError("label LM order - 1 exceeds the label context");
  }
  if (config.fusion && !config.fusion->scorer) throw UsageError("fusion needs a scorer");

  const TokenSequence labels = emissions.Labels();
  if (labels != label_lm.tokens()) {
    throw DataError("label LM vocabulary does not match the emission labels");
  }
  std::vector<int> vocab_of_label;
  for (std::size_t i = 0; i < emissions.vocab.size(); ++i) {
    if (static_cast<int>(i) != emissions.blank) vocab_of_label.push_back(static_cast<int>(i));
  }
  const auto num_labels = static_cast<int>(labels.size());
  const bool merge = config.EffectiveMerge();
  const auto context_size = static_cast<std::size_t>(config.label_context);

  std::vector<int> start_key;
  for (const std::string& token : carried_context) start_key.push_back(label_lm.TokenId(token));
  start_key = internal::Tail(std::move(start_key), context_size);

  BeamTrace trace;
  trace.segment_id = std::move(segment_id);
  trace.labels = labels;
  trace.num_frames = emissions.frames;
  trace.nodes.push_back({-1, start_key, 0.0, {}});

  auto blank_sum = [&emissions](int from_frame, int to_frame) {
    double sum = 0.0;
    for (int t = from_frame; t <= to_frame; ++t) sum += emissions.at(t, emissions.blank);
    return sum;
  };

  // External-LM scores of full label prefixes, for fusion.
  std::map<std::vector<int>, double> elm_cache;
  const std::string fusion_context = Join(carried_context);
  auto prefix_text = [&labels](const std::vector<int>& tokens) {
    std::string text;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i > 0) text.push_back(' ');
      text += labels[static_cast<std::size_t>(tokens[i])];
    }
    return text;
  };

  struct SearchState {
    std::vector<int> key;
    double score = 0.0;
    std::vector<int> tokens;
    std::vector<int> preds;
    bool has_pending = false;
  };
  struct PendingArc {
    int from;
    int label;
    double hat;
    double ilm;
    double score;
    std::vector<int> tokens;
  };
  struct Pending {
    std::vector<PendingArc> arcs;
    std::size_t best = 0;
  };

  std::vector<SearchState> active = {{start_key, 0.0, {}, {0}, false}};

  for (int t = 0; t < emissions.frames; ++t) {
    if (config.fusion) {
      std::vector<std::vector<int>> wanted;
      for (const SearchState& s : active) {
        if (!elm_cache.count(s.tokens)) wanted.push_back(s.tokens);
        for (int y = 0; y < num_labels; ++y) {
          std::vector<int> ext = s.tokens;
          ext.push_back(y);
          if (!elm_cache.count(ext)) wanted.push_back(std::move(ext));
        }
      }
      std::sort(wanted.begin(), wanted.end());
      wanted.erase(std::unique(wanted.begin(), wanted.end()), wanted.end());
      if (!wanted.empty()) {
        std::vector<std::string> texts;
        for (const auto& w : wanted) texts.push_back(prefix_text(w));
        const std::vector<double> scores = config.fusion->scorer->Score(fusion_context, texts);
        if (scores.size() != texts.size()) {
          throw LengthMismatchError("fusion scorer returned the wrong number of scores");
        }
        for (std::size_t i = 0; i < wanted.size(); ++i) elm_cache[wanted[i]] = scores[i];
      }
    }

    std::map<std::vector<int>, SearchState> candidates;
    std::map<std::vector<int>, Pending> pending;
    auto offer = [&candidates](SearchState state) {
      auto [it, inserted] = candidates.try_emplace(state.key, state);
      if (inserted) return;
      SearchState& existing = it->second;
      existing.preds.insert(existing.preds.end(), state.preds.begin(), state.preds.end());
      existing.has_pending = existing.has_pending || state.has_pending;
      if (internal::Better(state.score, state.tokens, existing.score, existing.tokens)) {
        existing.score = state.score;
        existing.tokens = std::move(state.tokens);
      }
    };

    const double blank_logp = emissions.at(t, emissions.blank);
    for (const SearchState& s : active) {
      offer({s.key, s.score + blank_logp, s.tokens, s.preds, false});

      const double elm_base = config.fusion ? elm_cache.at(s.tokens) : 0.0;
      for (int y = 0; y < num_labels; ++y) {
        const double lm = label_lm.LogProb(s.key, y);
        double local = emissions.at(t, vocab_of_label[static_cast<std::size_t>(y)]) +
                       config.label_lm_weight * lm;
        std::vector<int> extended = s.tokens;
        extended.push_back(y);
        if (config.fusion) {
          local += -config.fusion->ilm_weight * lm +
                   config.fusion->weight * (elm_cache.at(extended) - elm_base);
        }
        std::vector<int> key = s.key;
        key.push_back(y);
        if (merge) key = internal::Tail(std::move(key), context_size);
        Pending& target = pending[key];
        for (int p : s.preds) {
          const TraceNode& from = trace.nodes[static_cast<std::size_t>(p)];
          const double hat = blank_sum(from.frame + 1, t - 1) + local;
          std::vector<int> tokens = from.best_tokens;
          tokens.push_back(y);
          PendingArc arc{p, y, hat, lm, from.best_score + hat, std::move(tokens)};
          if (!target.arcs.empty()) {
            const PendingArc& best = target.arcs[target.best];
            if (internal::Better(arc.score, arc.tokens, best.score, best.tokens)) {
              target.best = target.arcs.size();
            }
          }
          target.arcs.push_back(std::move(arc));
        }
      }
    }
    for (auto& [key, p] : pending) {
      const PendingArc& best = p.arcs[p.best];
      offer({key, best.score, best.tokens, {}, true});
    }

    std::vector<SearchState> ranked;
    ranked.reserve(candidates.size());
    for (auto& [key, state] : candidates) ranked.push_back(std::move(state));
    std::stable_sort(ranked.begin(), ranked.end(), [](const SearchState& a, const SearchState& b) {
      return internal::Better(a.score, a.tokens, b.score, b.tokens);
    });
    if (ranked.size() > static_cast<std::size_t>(config.beam_size)) {
      ranked.resize(static_cast<std::size_t>(config.beam_size));
    }

    for (SearchState& state : ranked) {
      if (state.has_pending) {
        const Pending& p = pending.at(state.key);
        const int node = static_cast<int>(trace.nodes.size());
        const PendingArc& best = p.arcs[p.best];
        trace.nodes.push_back({t, state.key, best.score, best.tokens});
        for (std::size_t i = 0; i < p.arcs.size(); ++i) {
          const PendingArc& arc = p.arcs[i];
          trace.arcs.push_back({arc.from, node, arc.label, arc.hat, arc.ilm, i == p.best});
        }
        state.preds.push_back(node);
        state.has_pending = false;
      }
      std::sort(state.preds.begin(), state.preds.end());
    }
    active = std::move(ranked);
  }

  const int last = emissions.frames - 1;
  for (const SearchState& s : active) {
    TraceSurvivor survivor;
    survivor.score = s.score;
    survivor.tokens = s.tokens;
    double best_total = 0.0;
    for (std::size_t i = 0; i < s.preds.size(); ++i) {
      const TraceNode& node = trace.nodes[static_cast<std::size_t>(s.preds[i])];
      const double trailing = blank_sum(node.frame + 1, last);
      survivor.preds.push_back({s.preds[i], trailing});
      const double total = node.best_score + trailing;
      if (i == 0 ||
          internal::Better(total, node.best_tokens, best_total,
                           trace.nodes[static_cast<std::size_t>(
                                           survivor.preds[survivor.best_pred].node)]
                               .best_tokens)) {
        survivor.best_pred = i;
        best_total = total;
      }
    }
    trace.survivors.push_back(std::move(survivor));
  }
  return trace;
}

inline SegmentDecodeResult DecodeSegment(const EmissionMatrix& emissions,
                                         const LabelLM& label_lm,
                                         const DecoderConfig& config,
                                         std::span<const std::string> carried_context,
                                         std::string segment_id = "") {
  SegmentDecodeResult result;
  result.trace =
      RunBeamSearch(emissions, label_lm, config, carried_context, std::move(segment_id));
  result.lattice = BuildLattice(result.trace, config.EffectiveMerge());
  const PathEntry best = BestPath(result.lattice);
  result.one_best = best.tokens;
  result.one_best_score = best.hat;
  return result;
}

struct UtteranceDecodeResult {
  Utterance utterance;
  std::vector<SegmentDecodeResult> segments;
};

// Decodes segments in order. Each segment after the first is seeded with the
// previous segment's 1-best (the most recent non-empty one), which conditions
// the label LM and, under fusion, the external LM.
inline UtteranceDecodeResult DecodeUtterance(std::span<const EmissionMatrix> segments,
                                             const LabelLM& label_lm,
                                             const DecoderConfig& config,
                                             std::string utterance_id = "utt") {
  if (segments.empty()) throw DataError("cannot decode an utterance with no segments");
  UtteranceDecodeResult result;
  result.utterance.utterance_id = std::move(utterance_id);
  TokenSequence carried;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    SegmentDecodeResult segment =
        DecodeSegment(segments[s], label_lm, config, carried,
                      result.utterance.utterance_id + "-" + std::to_string(s));
    if (!segment.one_best.empty()) carried = segment.one_best;
    result.utterance.segments.push_back(segment.lattice);
    result.segments.push_back(std::move(segment));
  }
  return result;
}

// Concatenation of the per-segment 1-best sequences.
inline TokenSequence FirstPassTranscript(const Utterance& utterance) {
  TokenSequence out;
  for (const Lattice& segment : utterance.segments) {
    const PathEntry best = BestPath(segment);
    out.insert(out.end(), best.tokens.begin(), best.tokens.end());
  }
  return out;
}

}  // namespace lattice_rescore

#endif  // LATTICE_RESCORE_DECODER_H_
