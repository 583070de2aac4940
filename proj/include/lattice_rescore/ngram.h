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

// Word n-gram scorer with interpolated absolute discounting.
//
// For a history h of length k-1 seen c(h) times, followed by N1+(h) distinct
// words:
//   P_k(w | h) = max(c(h, w) - D, 0) / c(h) + D * N1+(h) / c(h) * P_{k-1}(w | h')
// where h' drops the oldest word. Unseen histories defer to P_{k-1}, and the
// recursion bottoms out in the uniform distribution over the vocabulary plus
// <unk> and </s>. Sentences are left-padded with <s>; a context is treated as
// the beginning of the same text, so it fills the history before the target.

#ifndef LATTICE_RESCORE_NGRAM_H_
#define LATTICE_RESCORE_NGRAM_H_

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lattice_rescore/errors.h"
#include "lattice_rescore/scorer.h"
#include "lattice_rescore/tokens.h"

namespace lattice_rescore {

class NGramScorer final : public Scorer {
 public:
  static constexpr double kDiscount = 0.75;
  static constexpr const char* kUnk = "<unk>";
  static constexpr const char* kEnd = "</s>";
  static constexpr const char* kBegin = "<s>";

  static NGramScorer Train(std::span<const std::string> corpus, int order) {
    if (order < 1) throw UsageError("n-gram order must be at least 1");
    if (corpus.empty()) throw DataError("cannot train an n-gram model on an empty corpus");
    NGramScorer model(order);
    std::vector<std::vector<std::string>> sentences;
    for (const std::string& text : corpus) {
      sentences.push_back(Tokenize(text));
      for (const std::string& w : sentences.back()) {
        if (w != kUnk && w != kBegin && w != kEnd) model.AddWord(w);
      }
    }
    for (const auto& sentence : sentences) {
      std::vector<int> ids = model.Pad({});
      for (const std::string& w : sentence) ids.push_back(model.Id(w));
      ids.push_back(model.end_id_);
      for (std::size_t i = static_cast<std::size_t>(order - 1); i < ids.size(); ++i) {
        for (int k = 1; k <= order; ++k) {
          const auto hist_len = static_cast<std::size_t>(k - 1);
          std::vector<int> history(ids.begin() + static_cast<std::ptrdiff_t>(i - hist_len),
                                   ids.begin() + static_cast<std::ptrdiff_t>(i));
          Stats& stats = model.levels_[static_cast<std::size_t>(k - 1)][history];
          if (stats.next[ids[i]]++ == 0) ++stats.types;
          stats.total += 1.0;
        }
      }
    }
    return model;
  }

  std::string Name() const override { return "ngram-" + std::to_string(order_); }

  std::vector<double> Score(std::string_view context,
                            std::span<const std::string> targets) override {
    const std::vector<std::string> context_words = Tokenize(context);
    std::vector<double> scores;
    scores.reserve(targets.size());
    for (const std::string& target : targets) {
      scores.push_back(ScoreTokens(context_words, Tokenize(target), true));
    }
    return scores;
  }

  // Sum of log P(word | history) over `target`, plus log P(</s> | ...) when
  // `include_end`. `context` conditions but is not scored.
  double ScoreTokens(std::span<const std::string> context,
                     std::span<const std::string> target, bool include_end) const {
    std::vector<int> history = Pad(context);
    double total = 0.0;
    for (const std::string& w : target) {
      const int id = Id(w);
      total += std::log(Prob(history, id));
      history.push_back(id);
    }
    if (include_end) total += std::log(Prob(history, end_id_));
    return total;
  }

  // P(word | history words), history BOS-padded. `word` may be "</s>".
  double Probability(std::span<const std::string> history, const std::string& word) const {
    return Prob(Pad(history), word == kEnd ? end_id_ : Id(word));
  }

  int order() const { return order_; }

  // Predictable outcomes: vocabulary, <unk> and </s>.
  int OutcomeCount() const { return static_cast<int>(words_.size()); }

  const std::vector<std::string>& Outcomes() const { return words_; }

 private:
  struct Stats {
    double total = 0.0;
    int types = 0;
    std::map<int, int> next;
  };

  explicit NGramScorer(int order) : order_(order), levels_(static_cast<std::size_t>(order)) {
    unk_id_ = AddWord(kUnk);
    end_id_ = AddWord(kEnd);
  }

  int AddWord(const std::string& w) {
    auto [it, inserted] = ids_.try_emplace(w, static_cast<int>(words_.size()));
    if (inserted) words_.push_back(w);
    return it->second;
  }

  int Id(const std::string& w) const {
    if (w == kEnd) return unk_id_;  // a literal "</s>" inside text is just unknown
    auto it = ids_.find(w);
    return it == ids_.end() ? unk_id_ : it->second;
  }

  // <s> padding followed by the ids of `words`.
  std::vector<int> Pad(std::span<const std::string> words) const {
    std::vector<int> ids(static_cast<std::size_t>(order_ - 1), kBeginId);
    for (const std::string& w : words) ids.push_back(Id(w));
    return ids;
  }

  double Prob(const std::vector<int>& history, int word) const {
    double p = 1.0 / static_cast<double>(words_.size());
    for (int k = 1; k <= order_; ++k) {
      const auto hist_len = static_cast<std::size_t>(k - 1);
      const std::vector<int> h(history.end() - static_cast<std::ptrdiff_t>(hist_len),
                               history.end());
      const auto& level = levels_[static_cast<std::size_t>(k - 1)];
      auto it = level.find(h);
      if (it == level.end()) continue;
      const Stats& s = it->second;
      auto c = s.next.find(word);
      const double count = c == s.next.end() ? 0.0 : static_cast<double>(c->second);
      p = std::max(count - kDiscount, 0.0) / s.total +
          kDiscount * static_cast<double>(s.types) / s.total * p;
    }
    return p;
  }

  static constexpr int kBeginId = -1;

  int order_;
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> ids_;
  int unk_id_ = 0;
  int end_id_ = 0;
  std::vector<std::map<std::vector<int>, Stats>> levels_;  // by history length
};

}  // namespace lattice_rescore

#endif  // LATTICE_RESCORE_NGRAM_H_
