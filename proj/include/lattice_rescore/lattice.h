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

// Segment lattices: acyclic, epsilon-free token graphs whose arcs carry two
// natural-log score channels. `hat` is the first-pass posterior contribution
// and `ilm` the internal label-LM contribution; a path's channel score is the
// plain sum over its arcs.
//
// Every operation here is read-only. Operations with a validity precondition
// throw InvalidLatticeError naming the first violated invariant.

#ifndef LATTICE_RESCORE_LATTICE_H_
#define LATTICE_RESCORE_LATTICE_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "lattice_rescore/errors.h"
#include "lattice_rescore/tokens.h"

namespace lattice_rescore {

using StateId = std::int32_t;
using PathCount = boost::multiprecision::cpp_int;

struct Arc {
  StateId from = 0;
  StateId to = 0;
  std::string label;
  double hat = 0.0;
  double ilm = 0.0;

  bool operator==(const Arc&) const = default;
};

struct Lattice {
  std::string segment_id;
  StateId num_states = 0;
  StateId start = 0;
  std::vector<StateId> finals;
  std::vector<Arc> arcs;

  bool operator==(const Lattice&) const = default;
};

struct Utterance {
  std::string utterance_id;
  std::vector<Lattice> segments;
  std::optional<TokenSequence> reference;

  bool operator==(const Utterance&) const = default;
};

enum class ViolationKind {
  kNoStates,
  kStateOutOfRange,
  kNoFinals,
  kDuplicateFinal,
  kStartHasIncoming,
  kFinalHasOutgoing,
  kCycle,
  kUntrimmedState,
  kEpsilonLabel,
  kWhitespaceInLabel,
  kNonFiniteScore,
};

inline const char* ViolationName(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kNoStates: return "no-states";
    case ViolationKind::kStateOutOfRange: return "state-out-of-range";
    case ViolationKind::kNoFinals: return "no-finals";
    case ViolationKind::kDuplicateFinal: return "duplicate-final";
    case ViolationKind::kStartHasIncoming: return "start-has-incoming";
    case ViolationKind::kFinalHasOutgoing: return "dangling-final";
    case ViolationKind::kCycle: return "cycle";
    case ViolationKind::kUntrimmedState: return "unreachable-state";
    case ViolationKind::kEpsilonLabel: return "epsilon-label";
    case ViolationKind::kWhitespaceInLabel: return "whitespace-in-label";
    case ViolationKind::kNonFiniteScore: return "non-finite-score";
  }
  return "unknown";
}

struct Violation {
  ViolationKind kind;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool Has(ViolationKind kind) const {
    return std::any_of(violations.begin(), violations.end(),
                       [kind](const Violation& v) { return v.kind == kind; });
  }
};

namespace internal {

inline std::vector<std::vector<int>> OutArcs(const Lattice& lattice) {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(lattice.num_states));
  for (std::size_t i = 0; i < lattice.arcs.size(); ++i) {
    out[static_cast<std::size_t>(lattice.arcs[i].from)].push_back(
        static_cast<int>(i));
  }
  return out;
}

inline bool InRange(const Lattice& lattice, StateId s) {
  return s >= 0 && s < lattice.num_states;
}

// Kahn's algorithm over in-range arcs; returns fewer than num_states entries
// when a cycle exists.
inline std::vector<StateId> KahnOrder(const Lattice& lattice) {
  const auto n = static_cast<std::size_t>(lattice.num_states);
  std::vector<int> indegree(n, 0);
  std::vector<std::vector<StateId>> succ(n);
  for (const Arc& arc : lattice.arcs) {
    if (!InRange(lattice, arc.from) || !InRange(lattice, arc.to)) continue;
    succ[static_cast<std::size_t>(arc.from)].push_back(arc.to);
    ++indegree[static_cast<std::size_t>(arc.to)];
  }
  std::vector<StateId> order;
  order.reserve(n);
  for (StateId s = 0; s < lattice.num_states; ++s) {
    if (indegree[static_cast<std::size_t>(s)] == 0) order.push_back(s);
  }
  for (std::size_t head = 0; head < order.size(); ++head) {
    for (StateId t : succ[static_cast<std::size_t>(order[head])]) {
      if (--indegree[static_cast<std::size_t>(t)] == 0) order.push_back(t);
    }
  }
  return order;
}

}  // namespace internal

inline ValidationReport Validate(const Lattice& lattice) {
  ValidationReport report;
  auto add = [&report](ViolationKind kind, std::string detail) {
    report.violations.push_back({kind, std::move(detail)});
  };
  if (lattice.num_states < 1) {
    add(ViolationKind::kNoStates, "num_states must be at least 1");
    return report;
  }
  const auto n = static_cast<std::size_t>(lattice.num_states);
  if (!internal::InRange(lattice, lattice.start)) {
    add(ViolationKind::kStateOutOfRange,
        "start state " + std::to_string(lattice.start));
  }
  std::vector<bool> is_final(n, false);
  if (lattice.finals.empty()) add(ViolationKind::kNoFinals, "no final states");
  for (StateId f : lattice.finals) {
    if (!internal::InRange(lattice, f)) {
      add(ViolationKind::kStateOutOfRange, "final state " + std::to_string(f));
      continue;
    }
    if (is_final[static_cast<std::size_t>(f)]) {
      add(ViolationKind::kDuplicateFinal, "final state " + std::to_string(f));
    }
    is_final[static_cast<std::size_t>(f)] = true;
  }

  for (std::size_t i = 0; i < lattice.arcs.size(); ++i) {
    const Arc& arc = lattice.arcs[i];
    const std::string where = "arc " + std::to_string(i);
    if (!internal::InRange(lattice, arc.from) ||
        !internal::InRange(lattice, arc.to)) {
      add(ViolationKind::kStateOutOfRange, where);
      continue;
    }
    if (arc.label.empty()) {
      add(ViolationKind::kEpsilonLabel, where);
    } else if (!IsValidToken(arc.label)) {
      add(ViolationKind::kWhitespaceInLabel, where);
    }
    if (!std::isfinite(arc.hat) || !std::isfinite(arc.ilm)) {
      add(ViolationKind::kNonFiniteScore, where);
    }
    if (arc.to == lattice.start) {
      add(ViolationKind::kStartHasIncoming, where);
    }
    if (is_final[static_cast<std::size_t>(arc.from)]) {
      add(ViolationKind::kFinalHasOutgoing,
          where + " leaves final state " + std::to_string(arc.from));
    }
  }

  if (internal::KahnOrder(lattice).size() != n) {
    add(ViolationKind::kCycle, "the arc graph contains a cycle");
  }

  if (internal::InRange(lattice, lattice.start)) {
    std::vector<bool> forward(n, false), backward(n, false);
    std::vector<std::vector<StateId>> succ(n), pred(n);
    for (const Arc& arc : lattice.arcs) {
      if (!internal::InRange(lattice, arc.from) ||
          !internal::InRange(lattice, arc.to)) {
        continue;
      }
      succ[static_cast<std::size_t>(arc.from)].push_back(arc.to);
      pred[static_cast<std::size_t>(arc.to)].push_back(arc.from);
    }
    auto flood = [](std::vector<bool>& seen,
                    const std::vector<std::vector<StateId>>& edges,
                    std::vector<StateId> stack) {
      for (StateId s : stack) seen[static_cast<std::size_t>(s)] = true;
      while (!stack.empty()) {
        StateId s = stack.back();
        stack.pop_back();
        for (StateId t : edges[static_cast<std::size_t>(s)]) {
          if (!seen[static_cast<std::size_t>(t)]) {
            seen[static_cast<std::size_t>(t)] = true;
            stack.push_back(t);
          }
        }
      }
    };
    flood(forward, succ, {lattice.start});
    std::vector<StateId> final_seeds;
    for (StateId f : lattice.finals) {
      if (internal::InRange(lattice, f)) final_seeds.push_back(f);
    }
    flood(backward, pred, final_seeds);
    for (std::size_t s = 0; s < n; ++s) {
      if (!forward[s] || !backward[s]) {
        add(ViolationKind::kUntrimmedState,
            "state " + std::to_string(s) + " is not on a start-to-final path");
      }
    }
  }
  return report;
}

inline void RequireValid(const Lattice& lattice) {
  ValidationReport report = Validate(lattice);
  if (!report.ok()) {
    const Violation& first = report.violations.front();
    throw InvalidLatticeError(ViolationName(first.kind),
                              (lattice.segment_id.empty()
                                   ? std::string()
                                   : "segment '" + lattice.segment_id + "': ") +
                                  first.detail);
  }
}

// Topological order of a valid lattice.
inline std::vector<StateId> TopologicalOrder(const Lattice& lattice) {
  RequireValid(lattice);
  return internal::KahnOrder(lattice);
}

// Exact number of start-to-final paths, by dynamic programming in
// topological order.
inline PathCount CountPaths(const Lattice& lattice) {
  const std::vector<StateId> order = TopologicalOrder(lattice);
  const auto out = internal::OutArcs(lattice);
  std::vector<PathCount> count(static_cast<std::size_t>(lattice.num_states));
  count[static_cast<std::size_t>(lattice.start)] = 1;
  for (StateId s : order) {
    const PathCount& here = count[static_cast<std::size_t>(s)];
    if (here == 0) continue;
    for (int a : out[static_cast<std::size_t>(s)]) {
      count[static_cast<std::size_t>(lattice.arcs[static_cast<std::size_t>(a)].to)] += here;
    }
  }
  PathCount total = 0;
  for (StateId f : lattice.finals) total += count[static_cast<std::size_t>(f)];
  return total;
}

struct PathEntry {
  TokenSequence tokens;
  double hat = 0.0;
  double ilm = 0.0;

  bool operator==(const PathEntry&) const = default;
};

// Higher hat first, then lexicographically smaller token sequence.
inline bool PathOrder(const PathEntry& a, const PathEntry& b) {
  if (a.hat != b.hat) return a.hat > b.hat;
  return a.tokens < b.tokens;
}

// All paths, sorted by PathOrder. Refuses with PathLimitError when the lattice
// holds more than `limit` paths.
inline std::vector<PathEntry> EnumeratePaths(const Lattice& lattice,
                                             std::uint64_t limit) {
  if (limit < 1) throw UsageError("enumeration limit must be at least 1");
  const PathCount total = CountPaths(lattice);
  if (total > limit) throw PathLimitError(total.str(), limit);

  const auto out = internal::OutArcs(lattice);
  std::vector<bool> is_final(static_cast<std::size_t>(lattice.num_states), false);
  for (StateId f : lattice.finals) is_final[static_cast<std::size_t>(f)] = true;

  std::vector<PathEntry> paths;
  paths.reserve(static_cast<std::size_t>(total));
  PathEntry current;
  std::function<void(StateId)> walk = [&](StateId s) {
    if (is_final[static_cast<std::size_t>(s)]) paths.push_back(current);
    for (int a : out[static_cast<std::size_t>(s)]) {
      const Arc& arc = lattice.arcs[static_cast<std::size_t>(a)];
      const double hat = current.hat;
      const double ilm = current.ilm;
      current.tokens.push_back(arc.label);
      current.hat = hat + arc.hat;
      current.ilm = ilm + arc.ilm;
      walk(arc.to);
      current.tokens.pop_back();
      current.hat = hat;
      current.ilm = ilm;
    }
  };
  walk(lattice.start);
  std::stable_sort(paths.begin(), paths.end(), PathOrder);
  return paths;
}

// The `n` best paths with pairwise distinct token sequences, in PathOrder.
// When several paths spell the same sequence only the highest-hat one is
// reported (its ilm comes along).
//
// Best-first search over token prefixes: each queue item holds the set of
// lattice states reachable by its prefix together with the best forward hat
// into each, so a token sequence is produced exactly once. The priority is the
// forward score plus the exact best completion. Items whose priority lies
// within a small window of the n-th result are still drained and the result
// is sorted exactly, so equal-score ties resolve lexicographically and the
// head of the list does not depend on `n`.
inline std::vector<PathEntry> DistinctBestPaths(const Lattice& lattice,
                                                std::size_t n) {
  if (n < 1) throw UsageError("n-best size must be at least 1");
  const std::vector<StateId> order = TopologicalOrder(lattice);
  const auto out = internal::OutArcs(lattice);
  const auto num_states = static_cast<std::size_t>(lattice.num_states);

  std::vector<std::string> labels;
  for (const Arc& arc : lattice.arcs) labels.push_back(arc.label);
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  std::vector<int> arc_label(lattice.arcs.size());
  for (std::size_t i = 0; i < lattice.arcs.size(); ++i) {
    arc_label[i] = static_cast<int>(
        std::lower_bound(labels.begin(), labels.end(), lattice.arcs[i].label) -
        labels.begin());
  }

  std::vector<bool> is_final(num_states, false);
  for (StateId f : lattice.finals) is_final[static_cast<std::size_t>(f)] = true;
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<double> completion(num_states, kNegInf);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const auto s = static_cast<std::size_t>(*it);
    if (is_final[s]) completion[s] = 0.0;
    for (int a : out[s]) {
      const Arc& arc = lattice.arcs[static_cast<std::size_t>(a)];
      completion[s] = std::max(
          completion[s], arc.hat + completion[static_cast<std::size_t>(arc.to)]);
    }
  }

  struct Member {
    StateId state;
    double hat;
    double ilm;
  };
  struct Item {
    double priority;
    std::vector<int> tokens;
    std::vector<Member> members;  // sorted by state
    bool complete;
    double hat;
    double ilm;
  };
  std::vector<Item> items;
  auto before = [&items](std::size_t a, std::size_t b) {
    // Returns true when `a` should pop after `b`.
    const Item& x = items[a];
    const Item& y = items[b];
    if (x.priority != y.priority) return x.priority < y.priority;
    if (x.tokens != y.tokens) return x.tokens > y.tokens;
    if (x.complete != y.complete) return !x.complete;
    return a > b;
  };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(before)>
      queue(before);

  items.push_back({completion[static_cast<std::size_t>(lattice.start)],
                   {},
                   {{lattice.start, 0.0, 0.0}},
                   false,
                   0.0,
                   0.0});
  queue.push(0);

  constexpr std::size_t kMaxTiePops = 200000;
  auto tolerance = [](double score) { return 1e-9 * (1.0 + std::abs(score)); };

  std::vector<PathEntry> found;
  std::size_t pops_after_n = 0;
  while (!queue.empty()) {
    const std::size_t index = queue.top();
    if (found.size() >= n) {
      const double nth = found[n - 1].hat;
      if (items[index].priority < nth - tolerance(nth)) break;
      if (++pops_after_n > kMaxTiePops) break;
    }
    queue.pop();
    if (items[index].complete) {
      PathEntry entry;
      for (int t : items[index].tokens) {
        entry.tokens.push_back(labels[static_cast<std::size_t>(t)]);
      }
      entry.hat = items[index].hat;
      entry.ilm = items[index].ilm;
      found.push_back(std::move(entry));
      continue;
    }

    // Completion at this prefix.
    {
      const Item& item = items[index];
      std::optional<Member> best_final;
      for (const Member& m : item.members) {
        if (!is_final[static_cast<std::size_t>(m.state)]) continue;
        if (!best_final || m.hat > best_final->hat) best_final = m;
      }
      if (best_final) {
        Item done{best_final->hat, item.tokens, {}, true, best_final->hat,
                  best_final->ilm};
        items.push_back(std::move(done));
        queue.push(items.size() - 1);
      }
    }

    // Expansion by each next token.
    std::map<int, std::map<StateId, Member>> children;
    for (const Member& m : items[index].members) {
      for (int a : out[static_cast<std::size_t>(m.state)]) {
        const Arc& arc = lattice.arcs[static_cast<std::size_t>(a)];
        const double hat = m.hat + arc.hat;
        auto& slot = children[arc_label[static_cast<std::size_t>(a)]];
        auto it = slot.find(arc.to);
        if (it == slot.end()) {
          slot.emplace(arc.to, Member{arc.to, hat, m.ilm + arc.ilm});
        } else if (hat > it->second.hat) {
          it->second = Member{arc.to, hat, m.ilm + arc.ilm};
        }
      }
    }
    for (auto& [label, members] : children) {
      Item child;
      child.tokens = items[index].tokens;
      child.tokens.push_back(label);
      child.priority = kNegInf;
      for (auto& [state, member] : members) {
        child.priority =
            std::max(child.priority,
                     member.hat + completion[static_cast<std::size_t>(state)]);
        child.members.push_back(member);
      }
      child.complete = false;
      child.hat = 0.0;
      child.ilm = 0.0;
      items.push_back(std::move(child));
      queue.push(items.size() - 1);
    }
  }

  std::stable_sort(found.begin(), found.end(), PathOrder);
  if (found.size() > n) found.resize(n);
  return found;
}

// The single best path (highest hat, lexicographic tie-break).
inline PathEntry BestPath(const Lattice& lattice) {
  return DistinctBestPaths(lattice, 1).front();
}

// Joins segment lattices end to end: each segment's finals are identified
// with the next segment's start. Path set of the result is the cross product
// of the segment path sets; arcs and their scores are copied unchanged.
inline Lattice Concat(const Utterance& utterance) {
  if (utterance.segments.empty()) {
    throw DataError("cannot concatenate an utterance with no segments");
  }
  Lattice result;
  result.segment_id = utterance.utterance_id;
  StateId next_id = 1;
  StateId junction = 0;  // state the current segment's start maps to
  for (const Lattice& segment : utterance.segments) {
    RequireValid(segment);
    const bool empty_path_only =
        std::find(segment.finals.begin(), segment.finals.end(),
                  segment.start) != segment.finals.end();
    if (empty_path_only) continue;  // sole path is empty; junction carries over
    const StateId exit = next_id++;
    std::vector<StateId> mapping(static_cast<std::size_t>(segment.num_states), -1);
    mapping[static_cast<std::size_t>(segment.start)] = junction;
    for (StateId f : segment.finals) mapping[static_cast<std::size_t>(f)] = exit;
    for (StateId s = 0; s < segment.num_states; ++s) {
      if (mapping[static_cast<std::size_t>(s)] < 0) {
        mapping[static_cast<std::size_t>(s)] = next_id++;
      }
    }
    for (const Arc& arc : segment.arcs) {
      result.arcs.push_back({mapping[static_cast<std::size_t>(arc.from)],
                             mapping[static_cast<std::size_t>(arc.to)], arc.label,
                             arc.hat, arc.ilm});
    }
    junction = exit;
  }
  result.num_states = next_id;
  result.start = 0;
  result.finals = {junction};
  return result;
}

}  // namespace lattice_rescore

#endif  // LATTICE_RESCORE_LATTICE_H_
