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

// Grid search of the rescoring weights (mu, nu) on a development set.

#ifndef LATTICE_RESCORE_TUNER_H_
#define LATTICE_RESCORE_TUNER_H_

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lattice_rescore/errors.h"
#include "lattice_rescore/evaluation.h"
#include "lattice_rescore/lattice.h"
#include "lattice_rescore/lattice_io.h"
#include "lattice_rescore/metrics.h"
#include "lattice_rescore/parallel.h"
#include "lattice_rescore/rescorer.h"
#include "lattice_rescore/salient.h"
#include "lattice_rescore/scorer.h"

namespace lattice_rescore {

struct TuneGrid {
  std::vector<double> mu;
  std::vector<double> nu;
  bool require_anchor = true;  // (0, 0) must be a grid point

  // {0, 0.1, ..., 1.0} on both axes.
  static TuneGrid Default() {
    TuneGrid g;
    for (int i = 0; i <= 10; ++i) {
      g.mu.push_back(i / 10.0);
      g.nu.push_back(i / 10.0);
    }
    return g;
  }

  void Check() const {
    auto check_axis = [](const std::vector<double>& v, const char* name) {
      if (v.empty()) throw UsageError(std::string("empty ") + name + " grid");
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i]) || v[i] < 0.0) {
          throw UsageError(std::string(name) + " grid values must be finite and nonnegative");
        }
        if (i > 0 && !(v[i - 1] < v[i])) {
          throw UsageError(std::string(name) + " grid must be strictly increasing");
        }
      }
    };
    check_axis(mu, "mu");
    check_axis(nu, "nu");
    if (require_anchor && (mu.front() != 0.0 || nu.front() != 0.0)) {
      throw UsageError("grid must contain (0, 0)");
    }
  }
};

// Parses "a,b,c" or "start:stop:step" (inclusive of stop up to rounding).
inline std::vector<double> ParseGridAxis(const std::string& spec) {
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw UsageError("bad grid value '" + s + "'");
    return v;
  };
  std::vector<double> out;
  if (spec.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= spec.size(); ++i) {
      if (i == spec.size() || spec[i] == ':') {
        parts.push_back(spec.substr(start, i - start));
        start = i + 1;
      }
    }
    if (parts.size() != 3) throw UsageError("grid range must be start:stop:step");
    const double lo = number(parts[0]), hi = number(parts[1]), step = number(parts[2]);
    if (!(step > 0) || hi < lo) throw UsageError("bad grid range '" + spec + "'");
    const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    if (n > 100000) throw UsageError("grid range too large");
    for (long i = 0; i <= n; ++i) {
      const double v = lo + static_cast<double>(i) * step;
      out.push_back(std::round(v * 1e12) / 1e12);  // 0.30000000000000004 -> 0.3
    }
    return out;
  }
  std::size_t start = 0;
  for (std::size_t i = 0; i <= spec.size(); ++i) {
    if (i == spec.size() || spec[i] == ',') {
      out.push_back(number(spec.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

enum class TuneObjective { kWer, kSter };

struct SurfacePoint {
  double mu = 0.0;
  double nu = 0.0;
  double value = 0.0;  // WER or STER
  long errors = 0;
  long total = 0;  // reference words or salient occurrences
};

struct TuneResult {
  TuneObjective objective = TuneObjective::kWer;
  double best_mu = 0.0;
  double best_nu = 0.0;
  double best_value = 0.0;
  std::vector<SurfacePoint> surface;  // mu-major grid order
  std::size_t scorer_calls = 0;       // calls that reached the wrapped scorer
};

struct TuneOptions {
  int jobs = 1;
  bool cache = true;
  TuneObjective objective = TuneObjective::kWer;
  const SalientTermSet* terms = nullptr;  // required for kSter
};

struct LabeledUtterance {
  const Utterance* lattices = nullptr;
  TokenSequence ref;
};

namespace internal {

// Counts the scorer calls passing through it.
class CountingScorer final : public Scorer {
 public:
  explicit CountingScorer(std::shared_ptr<Scorer> inner) : inner_(std::move(inner)) {}
  std::string Name() const override { return inner_->Name(); }
  std::vector<double> Score(std::string_view context,
                            std::span<const std::string> targets) override {
    ++calls_;
    return inner_->Score(context, targets);
  }
  std::size_t calls() const { return calls_; }

 private:
  std::shared_ptr<Scorer> inner_;
  std::atomic<std::size_t> calls_{0};
};

// Non-owning shared_ptr for a scorer owned elsewhere.
inline std::shared_ptr<Scorer> Borrow(Scorer& scorer) {
  return std::shared_ptr<Scorer>(&scorer, [](Scorer*) {});
}

}  // namespace internal

inline TuneResult Tune(std::span<const LabeledUtterance> dev, Scorer& scorer,
                       const TuneGrid& grid, const RescoreParams& base,
                       const TuneOptions& options = {}) {
  if (dev.empty()) throw DataError("tuning needs at least one development utterance");
  grid.Check();
  base.Check();
  if (options.objective == TuneObjective::kSter && options.terms == nullptr) {
    throw UsageError("STER tuning needs salient terms");
  }
  auto counting = std::make_shared<internal::CountingScorer>(internal::Borrow(scorer));
  std::shared_ptr<Scorer> channel = counting;
  if (options.cache) channel = std::make_shared<CachingScorer>(counting);

  std::vector<std::vector<SegmentNBest>> nbest(dev.size());
  for (std::size_t i = 0; i < dev.size(); ++i) {
    if (dev[i].lattices == nullptr) throw UsageError("development utterance without lattices");
    nbest[i] = ExtractNBest(*dev[i].lattices, base.nbest);
  }

  TuneResult result;
  result.objective = options.objective;
  bool have_best = false;
  long best_errors = 0, best_total = 1;
  for (double mu : grid.mu) {
    for (double nu : grid.nu) {
      RescoreParams params = base;
      params.mu = mu;
      params.nu = nu;
      std::vector<TokenSequence> hyps(dev.size());
      ParallelFor(dev.size(), options.jobs, [&](std::size_t i) {
        hyps[i] = RescoreSegments(dev[i].lattices->utterance_id, nbest[i], *channel, params)
                      .transcript;
      });
      SurfacePoint point{mu, nu, 0.0, 0, 0};
      for (std::size_t i = 0; i < dev.size(); ++i) {
        if (options.objective == TuneObjective::kWer) {
          const ErrorCounts c = Align(dev[i].ref, hyps[i]).Counts();
          point.errors += c.errors();
          point.total += c.ref_words;
        } else {
          auto it = options.terms->terms.find(dev[i].lattices->utterance_id);
          if (it == options.terms->terms.end()) continue;
          const SterCounts c = SterForDocument(it->second, dev[i].ref, hyps[i]);
          point.errors += c.errors;
          point.total += c.occurrences;
        }
      }
      if (point.total == 0) throw DataError("tuning objective has an empty denominator");
      point.value = static_cast<double>(point.errors) / static_cast<double>(point.total);
      // Exact comparison of errors/total; the denominator is fixed across
      // the grid, so ties are exact and go to the earlier grid point.
      if (!have_best || point.errors * best_total < best_errors * point.total) {
        have_best = true;
        best_errors = point.errors;
        best_total = point.total;
        result.best_mu = mu;
        result.best_nu = nu;
        result.best_value = point.value;
      }
      result.surface.push_back(point);
    }
  }
  result.scorer_calls = counting->calls();
  return result;
}

inline const char* ObjectiveName(TuneObjective o) {
  return o == TuneObjective::kWer ? "wer" : "ster";
}

// Surface file: one JSON object
//   {"objective": "wer", "best": {"mu": f, "nu": f, "value": f},
//    "base": {"nbest": n, "context_segments": m},
//    "surface": [{"mu": f, "nu": f, "value": f, "errors": n, "total": n}]}
inline std::string SerializeSurface(const TuneResult& r, const RescoreParams& base) {
  OrderedJson j;
  j["objective"] = ObjectiveName(r.objective);
  j["best"] = {{"mu", r.best_mu}, {"nu", r.best_nu}, {"value", r.best_value}};
  j["base"] = {{"nbest", base.nbest}, {"context_segments", base.context_segments}};
  OrderedJson list = OrderedJson::array();
  for (const SurfacePoint& p : r.surface) {
    list.push_back(OrderedJson{{"mu", p.mu},
                               {"nu", p.nu},
                               {"value", p.value},
                               {"errors", p.errors},
                               {"total", p.total}});
  }
  j["surface"] = std::move(list);
  return j.dump(2) + "\n";
}

// Reads the chosen parameters back from a surface file.
inline RescoreParams ReadTunedParams(const std::string& path) {
  std::string text;
  for (const std::string& line : io::ReadLines(path)) text += line + "\n";
  const Json j = io::ParseJson(text, path);
  io::RejectUnknownFields(j, {"objective", "best", "base", "surface"}, path);
  const Json& best = io::Field(j, "best", path);
  const Json& base = io::Field(j, "base", path);
  RescoreParams p;
  p.mu = io::Get<double>(best, "mu", path);
  p.nu = io::Get<double>(best, "nu", path);
  p.nbest = io::Get<std::size_t>(base, "nbest", path);
  p.context_segments = io::Get<int>(base, "context_segments", path);
  p.Check();
  return p;
}

// Rows are mu, columns nu; values in percent.
inline std::string SurfaceTable(const TuneResult& r) {
  std::vector<double> nus;
  for (const SurfacePoint& p : r.surface) {
    if (std::find(nus.begin(), nus.end(), p.nu) == nus.end()) nus.push_back(p.nu);
  }
  char buf[64];
  std::string out = "mu\\nu  ";
  for (double nu : nus) {
    std::snprintf(buf, sizeof(buf), "%7.2f", nu);
    out += buf;
  }
  out += "\n";
  for (std::size_t i = 0; i < r.surface.size(); ++i) {
    if (i % nus.size() == 0) {
      std::snprintf(buf, sizeof(buf), "%6.2f ", r.surface[i].mu);
      out += buf;
    }
    const bool best = r.surface[i].mu == r.best_mu && r.surface[i].nu == r.best_nu;
    std::snprintf(buf, sizeof(buf), "%6.2f%c", 100.0 * r.surface[i].value, best ? '*' : ' ');
    out += buf;
    if (i % nus.size() + 1 == nus.size()) out += "\n";
  }
  std::snprintf(buf, sizeof(buf), "best mu=%g nu=%g %s=%.2f%%\n", r.best_mu, r.best_nu,
                ObjectiveName(r.objective), 100.0 * r.best_value);
  return out + buf;
}

struct ApplyResult {
  std::vector<RescoredUtterance> rescored;
  EvalReport report;
};

inline ApplyResult Apply(std::span<const LabeledUtterance> eval, Scorer& scorer,
                         const RescoreParams& params, const SalientTermSet* terms = nullptr,
                         int jobs = 1) {
  if (eval.empty()) throw DataError("nothing to evaluate");
  params.Check();
  ApplyResult out;
  out.rescored.resize(eval.size());
  ParallelFor(eval.size(), jobs, [&](std::size_t i) {
    out.rescored[i] = RescoreUtterance(*eval[i].lattices, scorer, params);
  });
  std::vector<EvalItem> items;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    items.push_back({eval[i].lattices->utterance_id, eval[i].ref, out.rescored[i].transcript,
                     eval[i].lattices});
  }
  out.report = Evaluate(items, terms);
  return out;
}

}  // namespace lattice_rescore

#endif  // LATTICE_RESCORE_TUNER_H_
