#include "dictattach/synthetic.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "dictattach/tensor.h"
#include "dictattach/text.h"

namespace dictattach {

void SyntheticSpec::Validate() const {
  if (train_pairs == 0) throw std::invalid_argument("train_pairs must be positive");
  if (common_types < 2 || function_types >= common_types) {
    throw std::invalid_argument("need at least one content word and fewer function words");
  }
  if (function_types == 0) throw std::invalid_argument("function_types must be positive");
  if (!(rare_fraction >= 0.0 && rare_fraction <= 1.0)) {
    throw std::invalid_argument("rare_fraction must lie in [0, 1]");
  }
  if (rare_train_occurrences == 0) {
    throw std::invalid_argument("rare_train_occurrences must be positive");
  }
  if (min_length < 2 || max_length < min_length) {
    throw std::invalid_argument("sentence lengths must satisfy 2 <= min <= max");
  }
  if (min_definition_length < 1 || max_definition_length < min_definition_length) {
    throw std::invalid_argument("definition lengths must satisfy 1 <= min <= max");
  }
}

namespace {

class Generator {
 public:
  explicit Generator(const SyntheticSpec& spec)
      : spec_(spec), rng_(DeriveSeed(spec.seed, "synthetic")) {
    for (size_t i = 0; i < spec.common_types; ++i) {
      source_common_.push_back("zu" + std::to_string(i));
      target_common_.push_back(i < spec.function_types ? "w" + std::to_string(i)
                                                       : "en" + std::to_string(i));
    }
  }

  SyntheticTask Run() {
    SyntheticTask task;
    task.dictionary.set_source_label("synthetic");
    const size_t rare_sentences = static_cast<size_t>(
        std::llround(spec_.rare_fraction * static_cast<double>(spec_.train_pairs)));
    const size_t rare_types = rare_sentences / spec_.rare_train_occurrences;
    const size_t content = spec_.common_types - spec_.function_types;
    std::uniform_int_distribution<size_t> pick_content(spec_.function_types,
                                                       spec_.common_types - 1);
    std::vector<std::string> rare;
    std::vector<size_t> rare_target;
    for (size_t r = 0; r < rare_types; ++r) {
      rare.push_back("qx" + std::to_string(r));
      // Cycle through content words first so every one of them is a target.
      rare_target.push_back(r < content ? spec_.function_types + r : pick_content(rng_));
    }
    std::vector<size_t> order(rare_types);
    for (size_t r = 0; r < rare_types; ++r) order[r] = r;
    std::shuffle(order.begin(), order.end(), rng_);
    const size_t eval = std::min(spec_.eval_rare_types, rare_types);
    std::vector<size_t> eval_ids(order.begin(), order.begin() + static_cast<long>(eval));
    std::sort(eval_ids.begin(), eval_ids.end());

    for (size_t r = 0; r < rare_types; ++r) {
      task.lexicon[rare[r]] = target_common_[rare_target[r]];
      task.dictionary.Add({rare[r]}, Definition(rare_target[r]));
    }
    for (size_t r : eval_ids) task.eval_rare.push_back(rare[r]);

    // Training: each rare type appears in exactly rare_train_occurrences
    // sentences; the remaining sentences are common words only.
    std::vector<long> train_rare(spec_.train_pairs, -1);
    for (size_t r = 0, slot = 0; r < rare_types; ++r) {
      for (size_t k = 0; k < spec_.rare_train_occurrences; ++k) train_rare[slot++] = r;
    }
    std::shuffle(train_rare.begin(), train_rare.end(), rng_);
    for (size_t i = 0; i < spec_.train_pairs; ++i) {
      AddPair(&task.train, train_rare[i] < 0 ? nullptr : &rare[train_rare[i]],
              train_rare[i] < 0 ? 0 : rare_target[train_rare[i]]);
    }
    for (ParallelCorpus* split : {&task.dev, &task.test}) {
      const size_t pairs = split == &task.dev ? spec_.dev_pairs : spec_.test_pairs;
      for (size_t i = 0; i < pairs; ++i) {
        if (eval_ids.empty()) {
          AddPair(split, nullptr, 0);
        } else {
          const size_t r = eval_ids[i % eval_ids.size()];
          AddPair(split, &rare[r], rare_target[r]);
        }
      }
    }
    return task;
  }

 private:
  Sentence Definition(size_t target) {
    std::uniform_int_distribution<size_t> length(spec_.min_definition_length,
                                                 spec_.max_definition_length);
    std::uniform_int_distribution<size_t> distractor(0, spec_.function_types - 1);
    const size_t n = length(rng_);
    Sentence definition;
    for (size_t i = 0; i + 1 < n; ++i) {
      definition.push_back(target_common_[distractor(rng_)]);
    }
    std::uniform_int_distribution<size_t> slot(0, definition.size());
    definition.insert(definition.begin() + static_cast<long>(slot(rng_)),
                      target_common_[target]);
    return definition;
  }

  // A sentence of common words, optionally with one rare word whose
  // translation does not otherwise occur in the sentence.
  void AddPair(ParallelCorpus* corpus, const std::string* rare, size_t rare_target) {
    std::uniform_int_distribution<size_t> length(spec_.min_length, spec_.max_length);
    std::uniform_int_distribution<size_t> word(0, spec_.common_types - 1);
    const size_t n = length(rng_);
    Sentence source, target;
    std::vector<size_t> ids;
    while (ids.size() < n) {
      const size_t id = word(rng_);
      if (rare != nullptr && id == rare_target) continue;
      ids.push_back(id);
    }
    size_t rare_pos = n;
    if (rare != nullptr) {
      std::uniform_int_distribution<size_t> pos(0, n - 1);
      rare_pos = pos(rng_);
    }
    for (size_t i = 0; i < n; ++i) {
      if (i == rare_pos) {
        source.push_back(*rare);
        target.push_back(target_common_[rare_target]);
      } else {
        source.push_back(source_common_[ids[i]]);
        target.push_back(target_common_[ids[i]]);
      }
    }
    corpus->source.push_back(std::move(source));
    corpus->target.push_back(std::move(target));
  }

  const SyntheticSpec& spec_;
  Rng rng_;
  std::vector<std::string> source_common_;
  std::vector<std::string> target_common_;
};

}  // namespace

SyntheticTask GenerateSyntheticTask(const SyntheticSpec& spec) {
  spec.Validate();
  return Generator(spec).Run();
}

void WriteSyntheticTask(const SyntheticTask& task, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path root(dir);
  WriteParallelCorpus(task.train, root / "train.src", root / "train.tgt");
  WriteParallelCorpus(task.dev, root / "dev.src", root / "dev.tgt");
  WriteParallelCorpus(task.test, root / "test.src", root / "test.tgt");
  WriteDictionaryToFile(task.dictionary, root / "dict.tsv");
  WriteLexicon(task.lexicon, root / "lexicon.tsv");
  WriteLinesToFile(root / "eval_rare.txt", task.eval_rare);
}

void WriteLexicon(const Lexicon& lexicon, const std::string& path) {
  std::vector<std::string> lines;
  for (const auto& [source, target] : lexicon) lines.push_back(source + "\t" + target);
  WriteLinesToFile(path, lines);
}

Lexicon ReadLexicon(const std::string& path) {
  Lexicon lexicon;
  size_t number = 0;
  for (const auto& line : ReadLinesFromFile(path)) {
    ++number;
    if (TrimWhitespace(line).empty()) continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(number) +
                               ": expected source<TAB>target");
    }
    lexicon[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return lexicon;
}

RareWordScore RareWordAccuracy(const std::vector<std::string>& hypotheses,
                               const std::vector<Sentence>& sources,
                               const Lexicon& lexicon) {
  if (hypotheses.size() != sources.size()) {
    throw std::invalid_argument("hypotheses and sources must be aligned");
  }
  RareWordScore score;
  for (size_t i = 0; i < sources.size(); ++i) {
    std::map<std::string, size_t> expected;
    for (const auto& token : sources[i]) {
      const auto it = lexicon.find(token);
      if (it != lexicon.end()) ++expected[it->second];
    }
    if (expected.empty()) continue;
    std::map<std::string, size_t> produced;
    for (const auto& token : SplitWhitespace(hypotheses[i])) ++produced[token];
    for (const auto& [word, count] : expected) {
      score.total += count;
      const auto it = produced.find(word);
      if (it != produced.end()) score.correct += std::min(count, it->second);
    }
  }
  return score;
}

}  // namespace dictattach
