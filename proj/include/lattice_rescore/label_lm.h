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

// Limited-context label LM used inside the first-pass decoder. Its per-token
// log-probabilities fill the `ilm` channel of lattice arcs.

#ifndef LATTICE_RESCORE_LABEL_LM_H_
#define LATTICE_RESCORE_LABEL_LM_H_

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lattice_rescore/errors.h"
#include "lattice_rescore/tokens.h"

namespace lattice_rescore {

// log(sum(exp(values))), stable.
inline double LogSumExp(std::span<const double> values) {
  double peak = -std::numeric_limits<double>::infinity();
  for (double v : values) peak = std::max(peak, v);
  if (!std::isfinite(peak)) return peak;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - peak);
  return peak + std::log(sum);
}

class LabelLM {
 public:
  static constexpr int kBos = -1;
  static constexpr int kUnknown = -2;

  // Uniform conditionals over `tokens`.
  LabelLM(TokenSequence tokens, int order)
      : tokens_(std::move(tokens)), order_(order) {
    if (order_ < 1) throw UsageError("label LM order must be at least 1");
    if (tokens_.empty()) throw UsageError("label LM needs at least one token");
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (!IsValidToken(tokens_[i])) {
        throw UsageError("invalid label LM token '" + tokens_[i] + "'");
      }
      index_[tokens_[i]] = static_cast<int>(i);
    }
    if (index_.size() != tokens_.size()) throw UsageError("duplicate label LM token");
    default_.assign(tokens_.size(), -std::log(static_cast<double>(tokens_.size())));
  }

  // Add-k smoothed counts from whitespace-tokenized sentences. Every history
  // seen in training gets its own conditional; unseen histories fall back to
  // the add-k unigram. Out-of-vocabulary words are skipped.
  static LabelLM Train(std::span<const std::string> corpus, TokenSequence tokens,
                       int order, double add_k = 0.5) {
    if (add_k <= 0.0) throw UsageError("add-k must be positive");
    LabelLM lm(std::move(tokens), order);
    const auto vocab = static_cast<double>(lm.tokens_.size());
    std::map<std::vector<int>, std::vector<double>> counts;
    std::vector<double> unigram(lm.tokens_.size(), 0.0);
    for (const std::string& sentence : corpus) {
      std::vector<int> history(static_cast<std::size_t>(order - 1), kBos);
      for (const std::string& word : Tokenize(sentence)) {
        const int id = lm.TokenId(word);
        if (id < 0) continue;
        unigram[static_cast<std::size_t>(id)] += 1.0;
        if (order > 1) {
          auto& row = counts[history];
          if (row.empty()) row.assign(lm.tokens_.size(), 0.0);
          row[static_cast<std::size_t>(id)] += 1.0;
          history.erase(history.begin());
          history.push_back(id);
        }
      }
    }
    auto normalize = [&](const std::vector<double>& c) {
      double total = 0.0;
      for (double x : c) total += x;
      std::vector<double> logp(c.size());
      for (std::size_t i = 0; i < c.size(); ++i) {
        logp[i] = std::log((c[i] + add_k) / (total + add_k * vocab));
      }
      return logp;
    };
    lm.SetDefault(normalize(unigram));
    for (const auto& [history, row] : counts) lm.SetConditional(history, normalize(row));
    return lm;
  }

  // `history` holds exactly order-1 ids (kBos allowed for padding).
  void SetConditional(std::span<const int> history, std::vector<double> log_probs) {
    if (static_cast<int>(history.size()) != order_ - 1) {
      throw UsageError("history length must equal order - 1");
    }
    CheckDistribution(log_probs);
    conditionals_[std::vector<int>(history.begin(), history.end())] =
        std::move(log_probs);
  }

  void SetDefault(std::vector<double> log_probs) {
    CheckDistribution(log_probs);
    default_ = std::move(log_probs);
  }

  // Conditions on the last order-1 entries of `context`, left-padded with
  // kBos when the context is shorter.
  double LogProb(std::span<const int> context, int token) const {
    if (token < 0 || token >= static_cast<int>(tokens_.size())) {
      throw UsageError("label LM token id out of range");
    }
    const auto needed = static_cast<std::size_t>(order_ - 1);
    if (needed > 0) {
      std::vector<int> history(needed, kBos);
      const std::size_t take = std::min(needed, context.size());
      std::copy(context.end() - static_cast<std::ptrdiff_t>(take), context.end(),
                history.end() - static_cast<std::ptrdiff_t>(take));
      auto it = conditionals_.find(history);
      if (it != conditionals_.end()) return it->second[static_cast<std::size_t>(token)];
    }
    return default_[static_cast<std::size_t>(token)];
  }

  int TokenId(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnknown : it->second;
  }

  int order() const { return order_; }
  const TokenSequence& tokens() const { return tokens_; }

 private:
  void CheckDistribution(const std::vector<double>& log_probs) const {
    if (log_probs.size() != tokens_.size()) {
      throw UsageError("distribution size does not match the label vocabulary");
    }
    if (std::abs(LogSumExp(log_probs)) > 1e-9) {
      throw UsageError("label LM distribution is not normalized");
    }
  }

  TokenSequence tokens_;
  int order_;
  std::map<std::string, int> index_;
  std::vector<double> default_;
  std::map<std::vector<int>, std::vector<double>> conditionals_;
};

}  // namespace lattice_rescore

#endif  // LATTICE_RESCORE_LABEL_LM_H_
