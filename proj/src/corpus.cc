#include "dictattach/corpus.h"

#include <cmath>
#include <stdexcept>

namespace dictattach {

void ParallelCorpus::Validate() const {
  if (source.size() != target.size()) {
    throw std::invalid_argument(
        "parallel corpus sides differ: " + std::to_string(source.size()) +
        " source vs " + std::to_string(target.size()) + " target lines");
  }
}

void ParallelCorpus::Append(const ParallelCorpus& other) {
  source.insert(source.end(), other.source.begin(), other.source.end());
  target.insert(target.end(), other.target.begin(), other.target.end());
}

ParallelCorpus ReadParallelCorpus(const std::string& source_path,
                                  const std::string& target_path) {
  ParallelCorpus corpus{ReadSentencesFromFile(source_path),
                        ReadSentencesFromFile(target_path)};
  corpus.Validate();
  return corpus;
}

void WriteParallelCorpus(const ParallelCorpus& corpus,
                         const std::string& source_path,
                         const std::string& target_path) {
  WriteSentencesToFile(source_path, corpus.source);
  WriteSentencesToFile(target_path, corpus.target);
}

SplitSizes ComputeSplitSizes(size_t lines, const SplitFractions& fractions) {
  const double parts[] = {fractions.train, fractions.dev, fractions.test};
  for (double part : parts) {
    if (!(part >= 0.0 && part <= 1.0)) {
      throw std::invalid_argument("split fractions must lie in [0, 1]");
    }
  }
  if (std::abs(fractions.train + fractions.dev + fractions.test - 1.0) > 1e-9) {
    throw std::invalid_argument("split fractions must sum to 1");
  }
  // The epsilon keeps products such as 0.29 * 100 from flooring to 28.
  const auto floor_of = [lines](double fraction) {
    return static_cast<size_t>(
        std::floor(fraction * static_cast<double>(lines) + 1e-9));
  };
  SplitSizes sizes;
  sizes.train = std::min(lines, floor_of(fractions.train));
  sizes.dev = std::min(lines - sizes.train, floor_of(fractions.dev));
  sizes.test = lines - sizes.train - sizes.dev;
  return sizes;
}

CorpusSplit SplitCorpus(const ParallelCorpus& corpus,
                        const SplitFractions& fractions) {
  corpus.Validate();
  if (corpus.size() == 0) throw std::invalid_argument("cannot split an empty corpus");
  const SplitSizes sizes = ComputeSplitSizes(corpus.size(), fractions);
  const auto slice = [&](size_t begin, size_t count) {
    ParallelCorpus part;
    part.source.assign(corpus.source.begin() + begin,
                       corpus.source.begin() + begin + count);
    part.target.assign(corpus.target.begin() + begin,
                       corpus.target.begin() + begin + count);
    return part;
  };
  return {slice(0, sizes.train), slice(sizes.train, sizes.dev),
          slice(sizes.train + sizes.dev, sizes.test)};
}

}  // namespace dictattach
