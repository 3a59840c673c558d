// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.
//
//   acceptance_test --workdir DIR [--only N[,N...]]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "bleu_oracle.h"
#include "bpe_oracle.h"
#include "dictattach/attach.h"
#include "dictattach/bleu.h"
#include "dictattach/bpe.h"
#include "dictattach/dict.h"
#include "dictattach/experiment.h"
#include "dictattach/gradient_check.h"
#include "dictattach/synthetic.h"
#include "dictattach/transformer.h"
#include "model_fixtures.h"

namespace dictattach {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Collects failures while keeping the first few messages.
class Checker {
 public:
  void Expect(bool ok, const std::string& message) {
    if (ok) return;
    ++failures_;
    if (messages_.size() < 5) messages_.push_back(message);
  }
  bool ok() const { return failures_ == 0; }
  Outcome Finish(const std::string& summary) const {
    std::string detail = summary;
    for (const auto& m : messages_) detail += "; " + m;
    if (failures_ > messages_.size()) {
      detail += fmt::format("; ... {} failures in total", failures_);
    }
    return {ok(), detail};
  }

 private:
  size_t failures_ = 0;
  std::vector<std::string> messages_;
};

std::string DefinitionText(const Dictionary& d, const std::string& headword) {
  const DictEntry* entry = d.Find(Sentence{headword});
  return entry == nullptr ? "<missing>" : Join(entry->definition);
}

// ---------------------------------------------------------------------------
// 1. Dictionary cleaning fixtures.

Outcome CleaningFixtures() {
  Checker check;
  const std::vector<std::string> cedict = {
      "三自 三自 [san1 zi4] /abbr. for 三自爱国教会, Three-Self Patriotic Movement/",
      "U盤 U盘 [U pan2] /USB flash drive/see also 闪存盘/",
      "閃存盤 闪存盘 [shan3 cun2 pan2] /USB flash drive/jump drive/thumb drive/memory stick/",
  };
  const CedictParseResult parsed = ParseCedict(cedict);
  check.Expect(parsed.skipped.empty(), "CEDICT fixture lines were skipped");
  const Dictionary zh = CleanCedict(parsed.entries);
  const std::map<std::string, std::string> expected = {
      {"三自", "Three-Self Patriotic Movement"},
      {"U盘", "USB flash drive jump drive thumb drive memory stick"},
      {"闪存盘", "USB flash drive jump drive thumb drive memory stick"},
  };
  check.Expect(zh.size() == expected.size(), fmt::format("{} entries", zh.size()));
  for (const auto& [head, def] : expected) {
    const std::string got = DefinitionText(zh, head);
    check.Expect(got == def, fmt::format("{} -> '{}'", head, got));
  }

  const Dictionary de = CleanTsvDictionary({"(Aktien) zusammenlegen\tto merge (with)"});
  const std::string got = DefinitionText(de, "zusammenlegen");
  // Surface string after joining the punctuation-split tokens back together.
  std::string surface = got;
  for (const auto& [from, to] : {std::pair<std::string, std::string>{"( ", "("},
                                 {" )", ")"}}) {
    for (size_t at; (at = surface.find(from)) != std::string::npos;) {
      surface.replace(at, from.size(), to);
    }
  }
  check.Expect(de.size() == 1, fmt::format("{} TSV entries", de.size()));
  check.Expect(surface == "to merge (with)", fmt::format("zusammenlegen -> '{}'", got));
  return check.Finish("3 CEDICT entries and 1 TSV entry cleaned");
}

// ---------------------------------------------------------------------------
// 2. Encoder order independence.

Matrix<double> Permuted(const Matrix<double>& rows, const std::vector<size_t>& order) {
  Matrix<double> out(rows.rows(), rows.cols());
  for (size_t r = 0; r < order.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = rows.row(static_cast<Eigen::Index>(order[r]));
  }
  return out;
}

Outcome OrderIndependence() {
  constexpr size_t kVocab = 40;
  const Transformer<double> model(testing::TinyConfig(), kVocab);
  std::mt19937 rng(11);
  std::uniform_int_distribution<size_t> source_length(2, 8);
  std::uniform_int_distribution<size_t> target_length(1, 6);
  std::uniform_int_distribution<size_t> attachments(1, 3);
  double worst_definitions = 0.0;
  double worst_all = 0.0;
  for (int i = 0; i < 100; ++i) {
    const size_t n = source_length(rng);
    const TrainingExample ex = testing::RandomExample(
        &rng, kVocab, n, target_length(rng), std::min(n, attachments(rng)));
    const EncodedSequence<double> source = model.Encode(ex.source);
    const size_t rows = source.size();
    const size_t base = ex.source.tokens.size();
    std::vector<TokenId> prefix = {Vocabulary::kBos};
    prefix.insert(prefix.end(), ex.target.begin(), ex.target.end());
    const Matrix<double> reference = model.Forward(source.rows, prefix);

    std::vector<size_t> order(rows);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin() + static_cast<long>(base), order.end(), rng);
    worst_definitions =
        std::max(worst_definitions,
                 (model.Forward(Permuted(source.rows, order), prefix) - reference)
                     .cwiseAbs()
                     .maxCoeff());
    std::shuffle(order.begin(), order.end(), rng);
    worst_all = std::max(
        worst_all,
        (model.Forward(Permuted(source.rows, order), prefix) - reference).cwiseAbs().maxCoeff());
  }
  const bool pass = worst_definitions < 1e-5 && worst_all < 1e-5;
  return {pass, fmt::format("max |diff| definition rows {:.2e}, all rows {:.2e} (< 1e-5)",
                            worst_definitions, worst_all)};
}

// ---------------------------------------------------------------------------
// 3. Gradient check.

Outcome GradientAgreement() {
  constexpr size_t kVocab = 14;
  const Transformer<double> model(testing::TinyConfig(), kVocab);
  std::mt19937 rng(12);
  const std::vector<TrainingExample> data = {
      testing::RandomExample(&rng, kVocab, 4, 3, 2),
      testing::RandomExample(&rng, kVocab, 5, 4, 3),
  };
  const GradientCheckResult result = GradientCheck(model, testing::Pointers(data));
  Checker check;
  check.Expect(result.max_relative_error < 1e-4,
               fmt::format("worst tensor {}", result.worst_tensor));
  for (const char* name : {"embedding", "definition_positions"}) {
    const TensorCheck* t = result.Find(name);
    check.Expect(t != nullptr && t->max_abs_analytic > 0.0,
                 fmt::format("{} not exercised", name));
  }
  size_t attention_tensors = 0;
  for (const auto& t : result.tensors) {
    if (t.name.find("attn") != std::string::npos) ++attention_tensors;
  }
  check.Expect(attention_tensors > 0, "no attention tensors checked");
  return check.Finish(fmt::format("max relative error {:.2e} over {} tensors (< 1e-4)",
                                  result.max_relative_error, result.tensors.size()));
}

// ---------------------------------------------------------------------------
// 4. BPE round trip and prefix property.

std::vector<Sentence> RandomWords(std::mt19937* rng, size_t sentences) {
  // Zipf-ish letter choice so that merges have clear winners.
  const std::string letters = "aaaabbbccdefghij";
  std::uniform_int_distribution<size_t> letter(0, letters.size() - 1);
  std::uniform_int_distribution<size_t> word_length(1, 7);
  std::uniform_int_distribution<size_t> sentence_length(1, 12);
  std::vector<Sentence> out(sentences);
  for (auto& s : out) {
    s.resize(sentence_length(*rng));
    for (auto& w : s) {
      const size_t n = word_length(*rng);
      for (size_t i = 0; i < n; ++i) w += letters[letter(*rng)];
    }
  }
  return out;
}

Outcome BpeProperties() {
  Checker check;
  std::mt19937 rng(13);
  const std::vector<Sentence> corpus = RandomWords(&rng, 10000);
  const std::vector<Sentence> half(corpus.begin(), corpus.begin() + 5000);
  const BpeModel model = LearnJointBpe(half, {}, 300);
  BpeApplier applier(model);
  size_t round_trips = 0;
  for (const auto& s : corpus) {
    const Sentence segmented = applier.Apply(s);
    if (UndoBpe(segmented) == s) ++round_trips;
  }
  check.Expect(round_trips == corpus.size(),
               fmt::format("{} of {} sentences round-trip", round_trips, corpus.size()));

  const std::vector<Sentence> small(corpus.begin(), corpus.begin() + 300);
  BpeModel previous = LearnJointBpe(small, {}, 0);
  for (size_t n = 1; n <= 60; ++n) {
    const BpeModel next = LearnJointBpe(small, {}, n);
    const auto& a = previous.merges();
    const auto& b = next.merges();
    check.Expect(a.size() <= b.size() && std::equal(a.begin(), a.end(), b.begin()),
                 fmt::format("merges({}) not a prefix of merges({})", n - 1, n));
    previous = next;
  }

  const std::vector<Sentence> fixture = {
      {"low", "low", "low", "low", "low", "lower", "lower"},
      {"newest", "newest", "newest", "newest", "newest", "newest"},
      {"widest", "widest", "widest", "lowest", "newer", "wider", "slow"},
  };
  const size_t words = std::accumulate(fixture.begin(), fixture.end(), size_t{0},
                                       [](size_t n, const Sentence& s) { return n + s.size(); });
  check.Expect(words == 20, fmt::format("fixture has {} words", words));
  const auto learned = LearnJointBpe(fixture, {}, 5).merges();
  const auto oracle = testing::NaiveLearn(fixture, {}, 5);
  std::string listed;
  for (const auto& [l, r] : learned) listed += fmt::format(" ({} {})", l, r);
  check.Expect(learned == oracle, "first 5 merges differ from pair-counting oracle:" + listed);
  return check.Finish(fmt::format("10000 round trips, 60 prefix steps, first merges:{}", listed));
}

// ---------------------------------------------------------------------------
// 5. Leftmost-longest matching against exhaustive enumeration.

struct Span {
  size_t start;
  size_t length;
  bool operator==(const Span&) const = default;
};

// True if selection `a` is preferred by a left-to-right scan: at the first
// difference it starts earlier or, at the same start, is longer. A selection
// that extends another one is preferred because the scan never skips an
// admissible match.
bool ScanPrefers(const std::vector<Span>& a, const std::vector<Span>& b) {
  for (size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    if (a[i] == b[i]) continue;
    if (a[i].start != b[i].start) return a[i].start < b[i].start;
    return a[i].length > b[i].length;
  }
  return a.size() > b.size();
}

void Enumerate(const std::vector<Span>& candidates, size_t from, size_t free_at,
               std::vector<Span>* current, std::vector<Span>* best, size_t* count) {
  ++*count;
  if (ScanPrefers(*current, *best)) *best = *current;
  for (size_t i = from; i < candidates.size(); ++i) {
    if (candidates[i].start < free_at) continue;
    current->push_back(candidates[i]);
    Enumerate(candidates, i + 1, candidates[i].start + candidates[i].length, current, best,
              count);
    current->pop_back();
  }
}

Outcome MatchingOracle() {
  std::mt19937 rng(14);
  const std::vector<std::string> alphabet = {"a", "b", "c", "d", "e", "f"};
  std::uniform_int_distribution<size_t> symbol(0, alphabet.size() - 1);
  std::uniform_int_distribution<size_t> head_length(1, 3);
  const auto random_sentence = [&](size_t n) {
    Sentence s(n);
    for (auto& t : s) t = alphabet[symbol(rng)];
    return s;
  };
  Dictionary dictionary;
  std::set<Sentence> headwords;
  while (dictionary.size() < 50) {
    const Sentence head = random_sentence(head_length(rng));
    if (dictionary.Add(head, {"def"})) headwords.insert(head);
  }
  std::vector<Sentence> training;
  for (int i = 0; i < 200; ++i) training.push_back(random_sentence(6));
  const FrequencyTable frequencies = FrequencyTable::Build(training, dictionary);
  // Independent occurrence counts for the finite threshold.
  std::map<Sentence, int64_t> counts;
  for (const auto& s : training) {
    for (size_t i = 0; i < s.size(); ++i) {
      for (size_t n = 1; n <= 3 && i + n <= s.size(); ++n) {
        ++counts[Sentence(s.begin() + static_cast<long>(i), s.begin() + static_cast<long>(i + n))];
      }
    }
  }

  Checker check;
  std::uniform_int_distribution<size_t> sentence_length(3, 10);
  size_t selections = 0;
  size_t matched_spans = 0;
  for (int i = 0; i < 1000; ++i) {
    const Sentence sentence = random_sentence(sentence_length(rng));
    MatchOptions options;
    if (i % 2 == 1) options.threshold = FrequencyThreshold(25);
    std::vector<Span> candidates;
    for (size_t start = 0; start < sentence.size(); ++start) {
      for (size_t n = 3; n >= 1; --n) {
        if (start + n > sentence.size()) continue;
        const Sentence piece(sentence.begin() + static_cast<long>(start),
                             sentence.begin() + static_cast<long>(start + n));
        if (!headwords.count(piece)) continue;
        if (!options.threshold.Admits(counts[piece])) continue;
        candidates.push_back({start, n});
      }
    }
    std::vector<Span> current, best;
    Enumerate(candidates, 0, 0, &current, &best, &selections);
    std::vector<Span> got;
    for (const MatchSpan& m : FindMatches(sentence, dictionary, frequencies, options)) {
      got.push_back({m.start, m.end - m.start});
    }
    matched_spans += got.size();
    check.Expect(got == best, fmt::format("sentence '{}' differs", Join(sentence)));
  }
  return check.Finish(fmt::format("1000 sentences, {} selections enumerated, {} spans",
                                  selections, matched_spans));
}

// ---------------------------------------------------------------------------
// 6, 7, 9. Synthetic experiments.

class SyntheticRuns {
 public:
  explicit SyntheticRuns(fs::path root) : root_(std::move(root)) {}

  ExperimentConfig Config(uint64_t seed, Condition condition, const std::string& run) {
    const fs::path task = root_ / fmt::format("task_seed{}", seed);
    if (!fs::exists(task / "lexicon.tsv")) {
      SyntheticSpec spec;
      spec.seed = seed;
      WriteSyntheticTask(GenerateSyntheticTask(spec), task.string());
    }
    const auto path = [&](const char* name) { return (task / name).string(); };
    ExperimentConfig config;
    config.condition = condition;
    config.segmentation = Segmentation::kWord;
    // Rare words occur once in training and must stay out of the vocabulary.
    config.vocab_min_count = 3;
    config.dictionary = path("dict.tsv");
    config.train_source = path("train.src");
    config.train_target = path("train.tgt");
    config.dev_source = path("dev.src");
    config.dev_target = path("dev.tgt");
    config.test_source = path("test.src");
    config.test_target = path("test.tgt");
    config.lexicon = path("lexicon.tsv");
    config.train.epochs = 30;
    config.train.learning_rate = 3e-3;
    config.train.warmup_steps = 200;
    config.dev_beam = 1;
    config.test_beam = 4;
    config.seed = seed;
    config.model.seed = seed;
    config.output_dir = (root_ / run).string();
    return config;
  }

  const ExperimentResult& Run(uint64_t seed, Condition condition) {
    const auto key = std::make_pair(seed, condition);
    auto it = results_.find(key);
    if (it != results_.end()) return it->second;
    const std::string run = fmt::format("{}_seed{}", ToString(condition), seed);
    const auto start = std::chrono::steady_clock::now();
    ExperimentResult result = RunExperiment(Config(seed, condition, run));
    std::cout << fmt::format("  {:<16} rare {:.3f}  dev BLEU {:.2f}  best dev {:.2f}  {:.0f} s\n",
                             run, result.dev_rare_accuracy.value_or(-1.0), result.dev.bleu,
                             result.best_dev_bleu.value_or(-1.0),
                             std::chrono::duration<double>(
                                 std::chrono::steady_clock::now() - start)
                                 .count())
              << std::flush;
    return results_.emplace(key, std::move(result)).first->second;
  }

  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
  std::map<std::pair<uint64_t, Condition>, ExperimentResult> results_;
};

Outcome RareWordExperiment(SyntheticRuns* runs) {
  Checker check;
  std::string summary;
  for (uint64_t seed : {1, 2, 3}) {
    std::map<Condition, double> accuracy;
    for (Condition c :
         {Condition::kBaseline, Condition::kAppend, Condition::kFuse, Condition::kAttach}) {
      accuracy[c] = runs->Run(seed, c).dev_rare_accuracy.value_or(-1.0);
    }
    const double attach = accuracy[Condition::kAttach];
    check.Expect(attach >= 0.90, fmt::format("seed {} attach {:.3f} < 0.90", seed, attach));
    check.Expect(accuracy[Condition::kBaseline] <= 0.10,
                 fmt::format("seed {} baseline > 0.10", seed));
    check.Expect(accuracy[Condition::kFuse] <= 0.10, fmt::format("seed {} fuse > 0.10", seed));
    check.Expect(accuracy[Condition::kAppend] < attach,
                 fmt::format("seed {} append >= attach", seed));
    check.Expect(attach > accuracy[Condition::kBaseline],
                 fmt::format("seed {} attach <= baseline", seed));
    summary += fmt::format("{}seed {}: attach {:.3f} append {:.3f} fuse {:.3f} baseline {:.3f}",
                           summary.empty() ? "" : "; ", seed, attach,
                           accuracy[Condition::kAppend], accuracy[Condition::kFuse],
                           accuracy[Condition::kBaseline]);
  }
  return check.Finish(summary);
}

Outcome ThresholdSweep(SyntheticRuns* runs) {
  const ExperimentResult& baseline = runs->Run(1, Condition::kBaseline);
  const double baseline_bleu = baseline.best_dev_bleu.value_or(baseline.dev.bleu);
  SweepSpec spec;
  spec.thresholds = SweepSpec::ParseThresholds("0,5,inf");
  spec.base = runs->Config(1, Condition::kAttach, "sweep");
  const std::vector<SweepRow> rows = RunSweep(spec);
  Checker check;
  std::string summary = fmt::format("baseline {:.2f}", baseline_bleu);
  std::optional<double> k0;
  double best_positive = -1.0;
  for (const SweepRow& row : rows) {
    check.Expect(row.status == "ok" && row.dev_bleu.has_value(),
                 fmt::format("k={} {}", row.k.ToString(), row.status));
    if (!row.dev_bleu) continue;
    summary += fmt::format(", k={} {:.2f}", row.k.ToString(), *row.dev_bleu);
    if (!row.k.is_infinite() && row.k.limit() == 0) {
      k0 = row.dev_bleu;
    } else {
      best_positive = std::max(best_positive, *row.dev_bleu);
    }
  }
  check.Expect(k0.has_value(), "no k=0 row");
  if (k0) {
    check.Expect(std::abs(*k0 - baseline_bleu) <= 0.5, "k=0 not within 0.5 of baseline");
    check.Expect(best_positive >= *k0 + 1.0, "no k>0 at least 1 BLEU above k=0");
  }
  return check.Finish(summary);
}

std::string Slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "<missing " + path.string() + ">";
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

Outcome Determinism(SyntheticRuns* runs) {
  runs->Run(1, Condition::kAttach);
  const ExperimentConfig config = runs->Config(1, Condition::kAttach, "attach_seed1_rerun");
  RunExperiment(config);
  Checker check;
  const fs::path first = runs->root() / "attach_seed1";
  const fs::path second = config.output_dir;
  size_t compared = 0;
  for (const char* name :
       {"dev.hyp", "test.hyp", "dev_bleu.json", "test_bleu.json", "result.json",
        "model.ckpt"}) {
    const std::string a = Slurp(first / name);
    check.Expect(a.rfind("<missing", 0) != 0, a);
    check.Expect(a == Slurp(second / name), fmt::format("{} differs", name));
    ++compared;
  }
  return check.Finish(fmt::format("{} artifacts compared between two runs", compared));
}

// ---------------------------------------------------------------------------
// 8. BLEU and bootstrap oracles.

Outcome BleuOracles() {
  Checker check;
  std::vector<std::string> hyps, refs;
  for (const auto& [h, r] : testing::HandCheckablePairs()) {
    hyps.push_back(h);
    refs.push_back(r);
  }
  const double ours = ComputeBleu(hyps, refs).bleu;
  const double oracle = testing::OracleCorpusBleu(hyps, refs);
  check.Expect(std::abs(ours - oracle) <= 0.01,
               fmt::format("corpus BLEU {:.4f} vs oracle {:.4f}", ours, oracle));

  const std::vector<std::string> a = {"a b c d e f g h", "i j k l x y z w"};
  const std::vector<std::string> b = {"a b c d e f q r", "i j k l m n o p"};
  const std::vector<std::string> r = {"a b c d e f g h", "i j k l m n o p"};
  const double exact = testing::ExhaustiveBootstrapP(a, b, r);
  SignificanceOptions options;
  options.samples = 100000;
  const double p = BootstrapSignificance(a, b, r, options).p_value;
  check.Expect(std::abs(p - exact) <= 0.01,
               fmt::format("bootstrap p {:.4f} vs exhaustive {:.4f}", p, exact));
  return check.Finish(fmt::format("BLEU {:.4f} (oracle {:.4f}), p {:.4f} (exhaustive {:.4f})",
                                  ours, oracle, p, exact));
}

}  // namespace
}  // namespace dictattach

int main(int argc, char** argv) {
  using namespace dictattach;
  std::string workdir = "acceptance_work";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--workdir" && i + 1 < argc) {
      workdir = argv[++i];
    } else if (arg == "--only" && i + 1 < argc) {
      std::stringstream list(argv[++i]);
      for (std::string item; std::getline(list, item, ',');) only.insert(std::stoi(item));
    } else {
      std::cerr << "usage: acceptance_test [--workdir DIR] [--only N[,N...]]\n";
      return 64;
    }
  }
  spdlog::set_level(spdlog::level::warn);
  fs::remove_all(workdir);
  fs::create_directories(workdir);
  SyntheticRuns runs(workdir);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"dictionary cleaning fixtures", CleaningFixtures},
      {"encoder order independence", OrderIndependence},
      {"gradient check", GradientAgreement},
      {"BPE round trip and prefix", BpeProperties},
      {"leftmost-longest matching oracle", MatchingOracle},
      {"synthetic rare-word experiment", [&] { return RareWordExperiment(&runs); }},
      {"threshold sweep shape", [&] { return ThresholdSweep(&runs); }},
      {"BLEU and bootstrap oracles", BleuOracles},
      {"pipeline determinism", [&] { return Determinism(&runs); }},
  };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(number)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!outcome.pass) ++failed;
    std::cout << fmt::format("[{}] Criterion {}: {} ({:.1f} s) {}\n",
                             outcome.pass ? "PASS" : "FAIL", number, criteria[i].first,
                             seconds, outcome.detail)
              << std::flush;
  }
  return failed == 0 ? 0 : 1;
}
