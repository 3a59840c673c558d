#ifndef DICTATTACH_CORPUS_H_
#define DICTATTACH_CORPUS_H_

#include <string>
#include <vector>

#include "dictattach/text.h"

namespace dictattach {

// Line-aligned source/target sentences.
struct ParallelCorpus {
  std::vector<Sentence> source;
  std::vector<Sentence> target;

  size_t size() const { return source.size(); }
  // Throws std::invalid_argument when the sides differ in length.
  void Validate() const;
  void Append(const ParallelCorpus& other);
};

ParallelCorpus ReadParallelCorpus(const std::string& source_path,
                                  const std::string& target_path);
void WriteParallelCorpus(const ParallelCorpus& corpus,
                         const std::string& source_path,
                         const std::string& target_path);

struct SplitFractions {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
};

struct CorpusSplit {
  ParallelCorpus train;
  ParallelCorpus dev;
  ParallelCorpus test;
};

// Line counts for a contiguous split: train = floor(n * train), dev =
// floor(n * dev), test takes the remainder.
struct SplitSizes {
  size_t train = 0;
  size_t dev = 0;
  size_t test = 0;
};
SplitSizes ComputeSplitSizes(size_t lines, const SplitFractions& fractions);

// Contiguous prefix/middle/suffix split. Rejects empty corpora and fractions
// that are negative or do not sum to 1.
CorpusSplit SplitCorpus(const ParallelCorpus& corpus,
                        const SplitFractions& fractions);

}  // namespace dictattach

#endif  // DICTATTACH_CORPUS_H_
