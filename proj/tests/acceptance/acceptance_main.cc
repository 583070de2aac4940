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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.
//
// Usage: acceptance CLI_PATH [WORK_DIR]

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lattice_rescore/decoder.h"
#include "lattice_rescore/lattice.h"
#include "lattice_rescore/metrics.h"
#include "lattice_rescore/ngram.h"
#include "lattice_rescore/rescorer.h"
#include "lattice_rescore/salient.h"
#include "lattice_rescore/scorer.h"
#include "lattice_rescore/synth.h"
#include "lattice_rescore/tuner.h"
#include "support/random_lattices.h"

namespace lattice_rescore {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

// Decoded synthetic corpus shared by several checks.
struct Decoded {
  SynthCorpus corpus;
  std::vector<Utterance> eval_merged;
  std::vector<Utterance> eval_trie;
  std::vector<Utterance> dev;
  double seconds = 0.0;
};

const Decoded& SyntheticCorpus() {
  static const Decoded decoded = [] {
    const auto start = Clock::now();
    Decoded d;
    SynthConfig config;
    config.seed = 7;
    config.utterances = 100;
    config.dev_utterances = 30;
    d.corpus = GenerateCorpus(config);
    const DecoderConfig dc;
    auto decode = [&](const SynthUtterance& su, std::vector<Utterance>* merged,
                      std::vector<Utterance>* trie) {
      const LabelLM lm(su.emissions.segments.front().Labels(), 1);
      const UtteranceDecodeResult r =
          DecodeUtterance(su.emissions.segments, lm, dc, su.emissions.utterance_id);
      merged->push_back(r.utterance);
      if (trie != nullptr) {
        Utterance t;
        t.utterance_id = r.utterance.utterance_id;
        for (const SegmentDecodeResult& s : r.segments) {
          t.segments.push_back(BuildLattice(s.trace, false));
        }
        trie->push_back(std::move(t));
      }
    };
    for (const SynthUtterance& su : d.corpus.eval) decode(su, &d.eval_merged, &d.eval_trie);
    for (const SynthUtterance& su : d.corpus.dev) decode(su, &d.dev, nullptr);
    d.seconds = Seconds(start);
    return d;
  }();
  return decoded;
}

Outcome StateMerging() {
  const auto start = Clock::now();
  const Decoded& d = SyntheticCorpus();
  int more_paths = 0, no_worse = 0, strictly_better = 0;
  const auto n = static_cast<int>(d.eval_merged.size());
  for (int i = 0; i < n; ++i) {
    const Lattice merged = Concat(d.eval_merged[static_cast<std::size_t>(i)]);
    const Lattice trie = Concat(d.eval_trie[static_cast<std::size_t>(i)]);
    const TokenSequence& ref = d.corpus.eval[static_cast<std::size_t>(i)].reference.tokens;
    more_paths += CountPaths(merged) >= CountPaths(trie);
    const long om = OracleErrors(merged, ref), ot = OracleErrors(trie, ref);
    no_worse += om <= ot;
    strictly_better += om < ot;
  }
  const double seconds = Seconds(start);
  return {n == 100 && more_paths == n && no_worse == n && strictly_better >= 30 && seconds < 60,
          Format("paths(merged)>=paths(trie) %d/%d, oracle(merged)<=oracle(trie) %d/%d, "
                 "strictly better %d, %.1fs",
                 more_paths, n, no_worse, n, strictly_better, seconds)};
}

Outcome RescoringExactness() {
  std::mt19937_64 rng(2026);
  std::vector<std::string> corpus;
  for (int i = 0; i < 40; ++i) {
    std::string s;
    for (int k = 0; k < 6; ++k) s += std::string(k ? " " : "") + static_cast<char>('a' + rng() % 4);
    corpus.push_back(s);
  }
  NGramScorer lm = NGramScorer::Train(corpus, 2);
  // ILM is a property of the label sequence, so arcs get a per-label value.
  const std::map<std::string, double> ilm = {{"a", -1.1}, {"b", -0.7}, {"c", -1.9}, {"d", -0.4}};
  int matches = 0, total = 0;
  while (total < 200) {
    Lattice l = testing::RandomDag(rng, 4 + static_cast<int>(rng() % 8),
                                   2 + static_cast<int>(rng() % 10), 4);
    for (Arc& arc : l.arcs) arc.ilm = ilm.at(arc.label);
    const PathCount count = CountPaths(l);
    if (count > 10000) continue;
    ++total;
    RescoreParams p;
    p.mu = static_cast<double>(rng() % 1000) / 500.0;
    p.nu = static_cast<double>(rng() % 1000) / 500.0;
    p.nbest = static_cast<std::size_t>(count);
    p.context_segments = 0;
    const std::string context = total % 3 == 0 ? "a b" : "";
    TokenSequence best;
    double best_score = -INFINITY;
    for (const testing::BrutePath& path : testing::BruteForcePaths(l)) {
      const std::string target[] = {Join(path.tokens)};
      const double s = Combine(path.hat, path.ilm, p.mu, p.nu, lm.Score(context, target)[0]);
      if (s > best_score || (s == best_score && path.tokens < best)) {
        best_score = s;
        best = path.tokens;
      }
    }
    matches += RescoreSegment(l, lm, p, context).front().tokens == best;
  }
  return {matches == 200, Format("%d/200 exact token-sequence matches", matches)};
}

Outcome Identity() {
  const Decoded& d = SyntheticCorpus();
  NGramScorer lm = NGramScorer::Train(d.corpus.lm_corpus, 3);
  int same = 0, total = 0;
  for (const auto* set : {&d.eval_merged, &d.eval_trie, &d.dev}) {
    for (const Utterance& u : *set) {
      ++total;
      const RescoredUtterance r = RescoreUtterance(u, lm, RescoreParams{});
      same += Join(r.transcript) == Join(FirstPassTranscript(u));
    }
  }
  return {same == total, Format("%d/%d transcripts byte-identical to first pass", same, total)};
}

Outcome ContextCarryover() {
  const CarryoverSuite suite = MakeCarryoverSuite(31, 50);
  NGramScorer lm = NGramScorer::Train(suite.lm_corpus, 2);
  auto wer = [&](int m) {
    RescoreParams p;
    p.nu = 1.0;
    p.context_segments = m;
    std::vector<std::pair<TokenSequence, TokenSequence>> pairs;
    for (std::size_t i = 0; i < suite.utterances.size(); ++i) {
      pairs.emplace_back(suite.refs[i], RescoreUtterance(suite.utterances[i], lm, p).transcript);
    }
    return Wer(pairs).wer;
  };
  const double w0 = wer(0), w1 = wer(1), w2 = wer(2);
  return {suite.utterances.size() == 50 && w1 < w0 && w2 == w1,
          Format("WER m=0 %.2f%%, m=1 %.2f%%, m=2 %.2f%%", 100 * w0, 100 * w1, 100 * w2)};
}

Outcome BeatsBaseline() {
  const Decoded& d = SyntheticCorpus();
  NGramScorer lm = NGramScorer::Train(d.corpus.lm_corpus, 3);
  std::vector<LabeledUtterance> dev, eval;
  std::vector<std::pair<TokenSequence, TokenSequence>> dev_first;
  for (std::size_t i = 0; i < d.dev.size(); ++i) {
    dev.push_back({&d.dev[i], d.corpus.dev[i].reference.tokens});
    dev_first.emplace_back(d.corpus.dev[i].reference.tokens, FirstPassTranscript(d.dev[i]));
  }
  for (std::size_t i = 0; i < d.eval_merged.size(); ++i) {
    eval.push_back({&d.eval_merged[i], d.corpus.eval[i].reference.tokens});
  }
  const TuneResult tuned = Tune(dev, lm, TuneGrid::Default(), RescoreParams{});
  const SurfacePoint& anchor = tuned.surface.front();
  const bool anchor_ok = anchor.mu == 0.0 && anchor.nu == 0.0 &&
                         anchor.value == Wer(dev_first).wer;
  RescoreParams best;
  best.mu = tuned.best_mu;
  best.nu = tuned.best_nu;
  const double first = Apply(eval, lm, RescoreParams{}).report.wer;
  const double rescored = Apply(eval, lm, best).report.wer;
  return {anchor_ok && rescored < first,
          Format("eval WER first pass %.2f%% -> rescored %.2f%% at mu=%g nu=%g; "
                 "surface(0,0) %s first-pass dev WER %.2f%%",
                 100 * first, 100 * rescored, best.mu, best.nu, anchor_ok ? "equals" : "differs from",
                 100 * Wer(dev_first).wer)};
}

Outcome MetricOracles() {
  std::mt19937_64 rng(99);
  int align_ok = 0;
  for (int i = 0; i < 1000; ++i) {
    TokenSequence a, b;
    const int na = static_cast<int>(rng() % 9), nb = static_cast<int>(rng() % 9);
    for (int k = 0; k < na; ++k) a.push_back(std::string(1, static_cast<char>('a' + rng() % 3)));
    for (int k = 0; k < nb; ++k) b.push_back(std::string(1, static_cast<char>('a' + rng() % 3)));
    const int brute = testing::BruteEditDistance(a, b);
    const Alignment al = Align(a, b);
    bool ok = al.cost() == brute;
    if (!a.empty()) {
      const std::pair<TokenSequence, TokenSequence> pair[] = {{a, b}};
      ok = ok && Wer(pair).wer == static_cast<double>(brute) / static_cast<double>(a.size());
    }
    align_ok += ok;
  }
  int oracle_ok = 0;
  for (int i = 0; i < 200; ++i) {
    const Lattice l = testing::RandomDag(rng, 3 + static_cast<int>(rng() % 6),
                                         static_cast<int>(rng() % 8));
    TokenSequence ref;
    const int n = 1 + static_cast<int>(rng() % 6);
    for (int k = 0; k < n; ++k) ref.push_back(std::string(1, static_cast<char>('a' + rng() % 3)));
    int best = 1 << 30;
    for (const testing::BrutePath& p : testing::BruteForcePaths(l)) {
      best = std::min(best, testing::BruteEditDistance(ref, p.tokens));
    }
    oracle_ok += OracleWer(l, ref) == static_cast<double>(best) / static_cast<double>(n);
  }
  // Unigram model of one sentence with unique tokens: every scored symbol
  // (3 words + end) has P = 0.25/4 + 0.75/5 over 5 outcomes.
  const std::vector<std::string> text = {"p q r"};
  NGramScorer unigram = NGramScorer::Train(text, 1);
  const double ppl_error =
      std::abs(LogPerplexityPerWord(unigram, text) + std::log(0.25 / 4 + 0.75 / 5));
  // Segment scores with carried prefixes add up to the whole-text score.
  std::vector<std::string> corpus;
  for (int i = 0; i < 30; ++i) {
    std::string s;
    for (int k = 0; k < 7; ++k) s += std::string(k ? " " : "") + static_cast<char>('a' + rng() % 4);
    corpus.push_back(s);
  }
  double chain_error = 0.0;
  for (int order = 1; order <= 4; ++order) {
    NGramScorer lm = NGramScorer::Train(corpus, order);
    for (int t = 0; t < 50; ++t) {
      TokenSequence whole, prefix;
      double sum = 0.0;
      for (int s = 0; s < 3; ++s) {
        TokenSequence seg;
        for (int k = 0; k < 1 + static_cast<int>(rng() % 3); ++k) {
          seg.push_back(std::string(1, static_cast<char>('a' + rng() % 5)));
        }
        sum += lm.ScoreTokens(prefix, seg, s == 2);
        prefix.insert(prefix.end(), seg.begin(), seg.end());
      }
      chain_error = std::max(chain_error, std::abs(sum - lm.ScoreTokens({}, prefix, true)));
    }
  }
  return {align_ok == 1000 && oracle_ok == 200 && ppl_error <= 1e-9 && chain_error <= 1e-9,
          Format("align/wer %d/1000, oracle WER %d/200, ppl error %.1e, chain-rule error %.1e",
                 align_ok, oracle_ok, ppl_error, chain_error)};
}

Outcome SterSemantics() {
  // "zeta" repeats in d1 only, so it alone covers the salient fraction there.
  const std::vector<Document> docs = {
      {"d1", Tokenize("alpha zeta bravo zeta charlie zeta delta zeta echo")},
      {"d2", Tokenize("alpha omega bravo omega charlie omega delta")},
      {"d3", Tokenize("alpha bravo charlie delta kappa kappa echo")}};
  const SalientTermSet terms = SelectSalientTerms(docs, 0.3);
  // Insertions only.
  std::vector<SterItem> inserted;
  std::vector<std::pair<TokenSequence, TokenSequence>> pairs;
  for (const Document& d : docs) {
    TokenSequence hyp;
    for (const std::string& w : d.tokens) {
      hyp.push_back(w);
      hyp.push_back("uh");
    }
    inserted.push_back({d.doc_id, d.tokens, hyp});
    pairs.emplace_back(d.tokens, hyp);
  }
  const double ster_ins = Ster(inserted, terms).ster;
  const double wer_ins = Wer(pairs).wer;
  // Delete k of the N salient unigram occurrences in d1.
  const Document& d1 = docs[0];
  std::vector<std::size_t> unigram_positions;
  long occurrences = 0;
  bool only_unigrams = true;
  for (const SalientTerm& t : terms.terms.at("d1")) {
    only_unigrams = only_unigrams && t.tokens.size() == 1;
    for (std::size_t at : internal::Occurrences(d1.tokens, t.tokens)) {
      unigram_positions.push_back(at);
      ++occurrences;
    }
  }
  bool exact = only_unigrams && occurrences >= 2;
  std::string deletions;
  for (long k = 0; exact && k <= occurrences; ++k) {
    std::vector<bool> drop(d1.tokens.size(), false);
    for (long j = 0; j < k; ++j) drop[unigram_positions[static_cast<std::size_t>(j)]] = true;
    TokenSequence hyp;
    for (std::size_t i = 0; i < d1.tokens.size(); ++i) {
      if (!drop[i]) hyp.push_back(d1.tokens[i]);
    }
    const SterItem item[] = {{"d1", d1.tokens, hyp}};
    const double ster = Ster(item, terms).ster;
    exact = ster == static_cast<double>(k) / static_cast<double>(occurrences);
    deletions += Format("%s%ld/%ld", k ? " " : "", k, occurrences);
  }
  return {ster_ins == 0.0 && wer_ins > 0.0 && exact,
          Format("insertions only: STER %.2f with WER %.2f; deletions k/N exact for k = %s",
                 ster_ins, wer_ins, deletions.c_str())};
}

Outcome PathCounting() {
  int ok = 0, total = 0;
  for (int layers : {1, 10, 33, 64, 99, 100}) {
    ++total;
    ok += CountPaths(testing::Diamonds(layers)) == (PathCount(1) << layers);
  }
  const double top = static_cast<double>(CountPaths(testing::Diamonds(100)));
  return {ok == total && top >= 1e30,
          Format("%d/%d layered-diamond counts equal 2^layers, largest %s paths", ok, total,
                 FormatCount(top).c_str())};
}

// ---------------------------------------------------------------------------
// Determinism of the command-line tool.

std::string Slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome Determinism(const std::string& cli, const fs::path& work) {
  std::vector<std::string> subcommands = {"gen",  "decode", "tune", "rescore",
                                          "salient", "eval", "ppl",  "vectors"};
  std::map<std::string, std::vector<std::string>> outputs;  // per run
  std::string failure;
  for (const char* run : {"a", "b"}) {
    const fs::path dir = work / run;
    fs::remove_all(dir);
    fs::create_directories(dir);
    // Relative paths keep command lines, and so any echoed paths, identical.
    auto p = [](const std::string& f) { return f; };
    const std::string ngram = " --ngram-corpus " + p("c/lm_corpus.txt");
    const std::vector<std::pair<std::string, std::string>> steps = {
        {"gen", "--seed 7 gen --out " + p("c") + " --utterances 40 --dev 15"},
        {"decode", "decode --emissions " + p("c/emissions.jsonl") + " --refs " +
                       p("c/refs.jsonl") + " --out " + p("lat.jsonl") + " --trie-out " +
                       p("trie.jsonl")},
        {"decode", "decode --emissions " + p("c/dev_emissions.jsonl") + " --out " +
                       p("dev.jsonl")},
        {"tune", "tune --lattices " + p("dev.jsonl") + " --refs " + p("c/dev_refs.jsonl") +
                     " --out " + p("surface.json") + ngram},
        {"rescore", "--jobs 2 rescore --lattices " + p("lat.jsonl") + " --params " +
                        p("surface.json") + " --out " + p("tr.jsonl") + ngram},
        {"salient", "salient --refs " + p("c/refs.jsonl") + " --out " + p("sal.jsonl")},
        {"eval", "eval --transcripts " + p("tr.jsonl") + " --refs " + p("c/refs.jsonl") +
                     " --lattices " + p("lat.jsonl") + " --salient " + p("sal.jsonl") +
                     " --out " + p("report.json")},
        {"eval", "eval --csv --transcripts " + p("tr.jsonl") + " --refs " + p("c/refs.jsonl")},
        {"ppl", "ppl --text " + p("c/lm_corpus.txt") + ngram},
        {"vectors", "vectors --out " + p("vectors.jsonl") + ngram},
    };
    for (const auto& [name, args] : steps) {
      const std::string cmd = "cd '" + dir.string() + "' && '" + cli + "' " + args +
                              " >stdout.txt 2>stderr.txt";
      const int status = std::system(cmd.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        failure = name + " failed: " + Slurp(dir / "stderr.txt");
        break;
      }
      outputs[run].push_back(name + "\n" + Slurp(dir / "stdout.txt"));
    }
    if (!failure.empty()) break;
    for (const char* f : {"c/emissions.jsonl", "c/refs.jsonl", "c/lm_corpus.txt",
                          "c/dev_emissions.jsonl", "c/dev_refs.jsonl", "lat.jsonl", "trie.jsonl",
                          "dev.jsonl", "surface.json", "tr.jsonl", "sal.jsonl", "report.json",
                          "vectors.jsonl"}) {
      outputs[run].push_back(std::string(f) + "\n" + Slurp(dir / f));
    }
  }
  if (!failure.empty()) return {false, failure};
  int identical = 0;
  const auto& a = outputs["a"];
  const auto& b = outputs["b"];
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) identical += a[i] == b[i];
  const bool pass = a.size() == b.size() && identical == static_cast<int>(a.size());
  return {pass, Format("%d/%zu outputs byte-identical across two runs of %zu subcommands",
                       identical, a.size(), subcommands.size())};
}

}  // namespace
}  // namespace lattice_rescore

int main(int argc, char** argv) {
  using namespace lattice_rescore;
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s CLI_PATH [WORK_DIR]\n", argv[0]);
    return 2;
  }
  const std::string cli = fs::absolute(argv[1]).string();
  const fs::path work =
      argc > 2 ? fs::absolute(argv[2]) : fs::temp_directory_path() / "lattice_rescore_acceptance";
  fs::create_directories(work);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks = {
      {"state-merging-direction", StateMerging},
      {"rescoring-exactness", RescoringExactness},
      {"identity", Identity},
      {"context-carryover-direction", ContextCarryover},
      {"rescoring-beats-baseline", BeatsBaseline},
      {"metric-oracles", MetricOracles},
      {"ster-semantics", SterSemantics},
      {"path-counting", PathCounting},
      {"determinism", [&] { return Determinism(cli, work); }},
  };
  const auto start = Clock::now();
  int failed = 0;
  for (const auto& [name, check] : checks) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria pass in %.1fs\n", static_cast<int>(checks.size()) - failed,
              checks.size(), Seconds(start));
  return failed == 0 ? 0 : 1;
}
