// Toy translation task with rare source words, for end-to-end experiments.
//
// Source sentences are sequences of common words translated word by word.
// Rare source words appear exactly `rare_train_occurrences` times in
// training and translate to a content word; their dictionary definition
// holds that word among function-word distractors. Every dev/test sentence
// carries one held-out rare word.

#ifndef DICTATTACH_SYNTHETIC_H_
#define DICTATTACH_SYNTHETIC_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dictattach/corpus.h"
#include "dictattach/dict.h"

namespace dictattach {

struct SyntheticSpec {
  size_t train_pairs = 5000;
  size_t dev_pairs = 500;
  size_t test_pairs = 500;
  size_t common_types = 300;
  size_t function_types = 24;  // subset of the common types
  // Fraction of training pairs that carry a rare word.
  double rare_fraction = 0.3;
  size_t rare_train_occurrences = 1;
  // Rare types reserved for dev/test (capped by the number of rare types).
  size_t eval_rare_types = 200;
  size_t min_length = 4;
  size_t max_length = 8;
  size_t min_definition_length = 2;
  size_t max_definition_length = 5;
  uint64_t seed = 1;

  void Validate() const;
};

using Lexicon = std::map<std::string, std::string>;

struct SyntheticTask {
  ParallelCorpus train;
  ParallelCorpus dev;
  ParallelCorpus test;
  Dictionary dictionary;
  Lexicon lexicon;                      // every rare type -> its translation
  std::vector<std::string> eval_rare;   // rare types used in dev/test
};

SyntheticTask GenerateSyntheticTask(const SyntheticSpec& spec);

// Writes {train,dev,test}.{src,tgt}, dict.tsv and lexicon.tsv into `dir`.
void WriteSyntheticTask(const SyntheticTask& task, const std::string& dir);

void WriteLexicon(const Lexicon& lexicon, const std::string& path);
Lexicon ReadLexicon(const std::string& path);

struct RareWordScore {
  size_t correct = 0;
  size_t total = 0;

  double accuracy() const {
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  }
};

// For each source token listed in `lexicon`, its translation is expected in
// the hypothesis; matches are clipped per sentence.
RareWordScore RareWordAccuracy(const std::vector<std::string>& hypotheses,
                               const std::vector<Sentence>& sources,
                               const Lexicon& lexicon);

}  // namespace dictattach

#endif  // DICTATTACH_SYNTHETIC_H_
