// Corpus BLEU-4 and paired bootstrap resampling.

#ifndef DICTATTACH_BLEU_H_
#define DICTATTACH_BLEU_H_

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dictattach/text.h"

namespace dictattach {

enum class Casing { kInsensitive, kSensitive };

inline constexpr int kBleuOrder = 4;

// Evaluation tokenization applied to hypotheses and references alike:
// optional lowercasing, then punctuation split off from words (the usual
// "13a" style: symbols, periods and commas not between digits, dashes after
// digits).
Sentence TokenizeForBleu(std::string_view line, Casing casing);

// Clipped n-gram matches and totals for one sentence pair.
struct BleuStats {
  std::array<int64_t, kBleuOrder> matches{};
  std::array<int64_t, kBleuOrder> totals{};
  int64_t hypothesis_length = 0;
  int64_t reference_length = 0;

  void Add(const BleuStats& other);
};

BleuStats SentenceStats(const Sentence& hypothesis, const Sentence& reference);

struct BleuReport {
  double bleu = 0.0;  // 0..100
  std::array<double, kBleuOrder> precisions{};  // 0..1
  double brevity_penalty = 0.0;
  int64_t hypothesis_length = 0;
  int64_t reference_length = 0;
  BleuStats stats;

  std::string ToText() const;
  std::string ToJson() const;
};

BleuReport BleuFromStats(const BleuStats& stats);

// Throws std::invalid_argument when the line counts differ.
BleuReport ComputeBleu(const std::vector<std::string>& hypotheses,
                       const std::vector<std::string>& references,
                       Casing casing = Casing::kInsensitive);

struct SignificanceOptions {
  size_t samples = 1000;
  double level = 0.05;
  uint64_t seed = 1;
  Casing casing = Casing::kInsensitive;
};

struct SignificanceResult {
  double score_a = 0.0;
  double score_b = 0.0;
  // Fraction of resamples in which the system with the lower full-corpus
  // score wins or ties; 1 when the full-corpus scores tie.
  double p_value = 1.0;
  size_t samples = 0;
  double level = 0.05;
  bool significant = false;  // p_value < level

  std::string ToText() const;
  std::string ToJson() const;
};

SignificanceResult BootstrapSignificance(const std::vector<std::string>& hypotheses_a,
                                         const std::vector<std::string>& hypotheses_b,
                                         const std::vector<std::string>& references,
                                         const SignificanceOptions& options = {});

}  // namespace dictattach

#endif  // DICTATTACH_BLEU_H_
