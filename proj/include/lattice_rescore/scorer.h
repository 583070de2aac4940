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

// External language-model scorers.
//
// A scorer maps (context, targets) to one natural-log probability per target:
// log P(target | context), where the target is scored through its
// end-of-text symbol and the context only conditions. An empty context scores
// the target from the start of text. Summing segment scores, each conditioned
// on the preceding segment, gives the segmented long-form score.

#ifndef LATTICE_RESCORE_SCORER_H_
#define LATTICE_RESCORE_SCORER_H_

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lattice_rescore/errors.h"
#include "lattice_rescore/tokens.h"

namespace lattice_rescore {

class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual std::string Name() const = 0;

  // One score per target, same order. Implementations must be safe to call
  // from several threads.
  virtual std::vector<double> Score(std::string_view context,
                                    std::span<const std::string> targets) = 0;
};

// Every word (and end-of-text) has probability 1/vocab_size, so a target of
// L words scores exactly (L + 1) * log(1 / vocab_size).
class UniformScorer final : public Scorer {
 public:
  explicit UniformScorer(int vocab_size) : vocab_size_(vocab_size) {
    if (vocab_size < 1) throw UsageError("uniform scorer needs vocab_size >= 1");
  }

  std::string Name() const override { return "uniform"; }

  std::vector<double> Score(std::string_view,
                            std::span<const std::string> targets) override {
    const double per_symbol = std::log(1.0 / vocab_size_);
    std::vector<double> scores;
    scores.reserve(targets.size());
    for (const std::string& target : targets) {
      const auto length = static_cast<double>(Tokenize(target).size());
      scores.push_back((length + 1.0) * per_symbol);
    }
    return scores;
  }

 private:
  int vocab_size_;
};

// Memoizes scores keyed on the exact (context, target) bytes and forwards
// only the misses, still as one batch. Many concurrent readers, one writer
// per insertion.
class CachingScorer final : public Scorer {
 public:
  explicit CachingScorer(std::shared_ptr<Scorer> inner) : inner_(std::move(inner)) {}

  std::string Name() const override { return inner_->Name(); }

  std::vector<double> Score(std::string_view context,
                            std::span<const std::string> targets) override {
    std::vector<double> scores(targets.size());
    std::vector<std::size_t> missing;
    {
      std::shared_lock lock(mutex_);
      for (std::size_t i = 0; i < targets.size(); ++i) {
        auto it = cache_.find({std::string(context), targets[i]});
        if (it == cache_.end()) {
          missing.push_back(i);
        } else {
          scores[i] = it->second;
        }
      }
    }
    if (missing.empty()) return scores;
    std::vector<std::string> batch;
    batch.reserve(missing.size());
    for (std::size_t i : missing) batch.push_back(targets[i]);
    const std::vector<double> fresh = inner_->Score(context, batch);
    if (fresh.size() != batch.size()) {
      throw LengthMismatchError("scorer returned " + std::to_string(fresh.size()) +
                                " scores for " + std::to_string(batch.size()) +
                                " targets");
    }
    std::unique_lock lock(mutex_);
    for (std::size_t j = 0; j < missing.size(); ++j) {
      scores[missing[j]] = fresh[j];
      cache_.emplace(std::make_pair(std::string(context), batch[j]), fresh[j]);
    }
    ++inner_calls_;
    return scores;
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return cache_.size();
  }

  std::size_t inner_calls() const {
    std::shared_lock lock(mutex_);
    return inner_calls_;
  }

 private:
  std::shared_ptr<Scorer> inner_;
  mutable std::shared_mutex mutex_;
  std::map<std::pair<std::string, std::string>, double> cache_;
  std::size_t inner_calls_ = 0;
};

// Sum of context-conditioned segment scores: segment s is conditioned on the
// text of segment s-1, the first segment on the empty context.
inline double SegmentedScore(Scorer& scorer,
                             std::span<const std::string> segments) {
  double total = 0.0;
  std::string context;
  for (const std::string& segment : segments) {
    const std::string target[] = {segment};
    total += scorer.Score(context, target).at(0);
    context = segment;
  }
  return total;
}

// -(sum of sentence log-likelihoods) / (words + one end-of-text per sentence).
// Pools totals across texts rather than averaging per-text perplexities.
inline double LogPerplexityPerWord(Scorer& scorer,
                                   std::span<const std::string> texts) {
  double log_likelihood = 0.0;
  double symbols = 0.0;
  for (const std::string& text : texts) {
    const std::string target[] = {text};
    log_likelihood += scorer.Score("", target).at(0);
    symbols += static_cast<double>(Tokenize(text).size()) + 1.0;
  }
  if (texts.empty() || symbols - static_cast<double>(texts.size()) < 1.0) {
    throw DataError("log perplexity needs at least one word");
  }
  return -log_likelihood / symbols;
}

}  // namespace lattice_rescore

#endif  // LATTICE_RESCORE_SCORER_H_
