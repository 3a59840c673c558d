#include "dictattach/bleu.h"

#include <cmath>
#include <map>
#include <stdexcept>

#include <fmt/format.h>

#include "dictattach/tensor.h"
#include "json.hpp"

namespace dictattach {

namespace {

bool IsDigit(char c) { return c >= '0' && c <= '9'; }

bool IsSymbol(char c) {
  switch (c) {
    case '{': case '|': case '}': case '~': case '[': case '\\': case ']':
    case '^': case '_': case '`': case '!': case '"': case '#': case '$':
    case '%': case '&': case '(': case ')': case '*': case '+': case '/':
    case ':': case ';': case '<': case '=': case '>': case '?': case '@':
      return true;
    default:
      return false;
  }
}

std::map<std::vector<std::string>, int64_t> CountNgrams(const Sentence& tokens, int n) {
  std::map<std::vector<std::string>, int64_t> counts;
  for (size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
  }
  return counts;
}

}  // namespace

Sentence TokenizeForBleu(std::string_view line, Casing casing) {
  const std::string text =
      casing == Casing::kInsensitive ? AsciiLower(line) : std::string(line);
  std::string spaced;
  spaced.reserve(text.size() * 2);
  const auto pad = [&](char c) {
    spaced += ' ';
    spaced += c;
    spaced += ' ';
  };
  for (size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    const char prev = i > 0 ? text[i - 1] : ' ';
    const char next = i + 1 < text.size() ? text[i + 1] : ' ';
    if (IsSymbol(c)) {
      pad(c);
    } else if ((c == '.' || c == ',') && !(IsDigit(prev) && IsDigit(next))) {
      pad(c);
    } else if (c == '-' && IsDigit(prev)) {
      pad(c);
    } else {
      spaced += c;
    }
  }
  return SplitWhitespace(spaced);
}

void BleuStats::Add(const BleuStats& other) {
  for (int n = 0; n < kBleuOrder; ++n) {
    matches[n] += other.matches[n];
    totals[n] += other.totals[n];
  }
  hypothesis_length += other.hypothesis_length;
  reference_length += other.reference_length;
}

BleuStats SentenceStats(const Sentence& hypothesis, const Sentence& reference) {
  BleuStats stats;
  stats.hypothesis_length = static_cast<int64_t>(hypothesis.size());
  stats.reference_length = static_cast<int64_t>(reference.size());
  for (int n = 1; n <= kBleuOrder; ++n) {
    const auto hyp = CountNgrams(hypothesis, n);
    const auto ref = CountNgrams(reference, n);
    for (const auto& [gram, count] : hyp) {
      const auto it = ref.find(gram);
      if (it != ref.end()) stats.matches[n - 1] += std::min(count, it->second);
      stats.totals[n - 1] += count;
    }
  }
  return stats;
}

BleuReport BleuFromStats(const BleuStats& stats) {
  BleuReport report;
  report.stats = stats;
  report.hypothesis_length = stats.hypothesis_length;
  report.reference_length = stats.reference_length;
  bool zero = stats.hypothesis_length == 0;
  double log_sum = 0.0;
  for (int n = 0; n < kBleuOrder; ++n) {
    report.precisions[n] =
        stats.totals[n] == 0 ? 0.0
                             : static_cast<double>(stats.matches[n]) /
                                   static_cast<double>(stats.totals[n]);
    if (report.precisions[n] == 0.0) {
      zero = true;
    } else {
      log_sum += std::log(report.precisions[n]);
    }
  }
  if (stats.hypothesis_length > 0) {
    report.brevity_penalty =
        stats.hypothesis_length >= stats.reference_length
            ? 1.0
            : std::exp(1.0 - static_cast<double>(stats.reference_length) /
                                 static_cast<double>(stats.hypothesis_length));
  }
  report.bleu = zero ? 0.0
                     : 100.0 * report.brevity_penalty * std::exp(log_sum / kBleuOrder);
  return report;
}

BleuReport ComputeBleu(const std::vector<std::string>& hypotheses,
                       const std::vector<std::string>& references, Casing casing) {
  if (hypotheses.size() != references.size()) {
    throw std::invalid_argument(fmt::format("{} hypotheses but {} references",
                                            hypotheses.size(), references.size()));
  }
  BleuStats total;
  for (size_t i = 0; i < hypotheses.size(); ++i) {
    total.Add(SentenceStats(TokenizeForBleu(hypotheses[i], casing),
                            TokenizeForBleu(references[i], casing)));
  }
  return BleuFromStats(total);
}

std::string BleuReport::ToText() const {
  return fmt::format("BLEU = {:.2f}, {:.1f}/{:.1f}/{:.1f}/{:.1f} (BP={:.3f}, hyp_len={}, ref_len={})",
                     bleu, 100 * precisions[0], 100 * precisions[1], 100 * precisions[2],
                     100 * precisions[3], brevity_penalty, hypothesis_length,
                     reference_length);
}

std::string BleuReport::ToJson() const {
  nlohmann::ordered_json out;
  out["bleu"] = bleu;
  out["precisions"] = precisions;
  out["brevity_penalty"] = brevity_penalty;
  out["hypothesis_length"] = hypothesis_length;
  out["reference_length"] = reference_length;
  out["matches"] = stats.matches;
  out["totals"] = stats.totals;
  return out.dump(2);
}

SignificanceResult BootstrapSignificance(const std::vector<std::string>& hypotheses_a,
                                         const std::vector<std::string>& hypotheses_b,
                                         const std::vector<std::string>& references,
                                         const SignificanceOptions& options) {
  if (hypotheses_a.size() != references.size() || hypotheses_b.size() != references.size()) {
    throw std::invalid_argument("system outputs and references must be aligned");
  }
  if (options.samples == 0) throw std::invalid_argument("samples must be positive");
  std::vector<BleuStats> stats_a, stats_b;
  BleuStats total_a, total_b;
  for (size_t i = 0; i < references.size(); ++i) {
    const Sentence ref = TokenizeForBleu(references[i], options.casing);
    stats_a.push_back(SentenceStats(TokenizeForBleu(hypotheses_a[i], options.casing), ref));
    stats_b.push_back(SentenceStats(TokenizeForBleu(hypotheses_b[i], options.casing), ref));
    total_a.Add(stats_a.back());
    total_b.Add(stats_b.back());
  }
  SignificanceResult result;
  result.score_a = BleuFromStats(total_a).bleu;
  result.score_b = BleuFromStats(total_b).bleu;
  result.samples = options.samples;
  result.level = options.level;
  if (result.score_a == result.score_b || references.empty()) {
    result.p_value = 1.0;
    result.significant = false;
    return result;
  }
  const bool a_higher = result.score_a > result.score_b;
  Rng rng(DeriveSeed(options.seed, "bootstrap"));
  std::uniform_int_distribution<size_t> pick(0, references.size() - 1);
  size_t lower_wins = 0;
  for (size_t s = 0; s < options.samples; ++s) {
    BleuStats sample_a, sample_b;
    for (size_t i = 0; i < references.size(); ++i) {
      const size_t index = pick(rng);
      sample_a.Add(stats_a[index]);
      sample_b.Add(stats_b[index]);
    }
    const double a = BleuFromStats(sample_a).bleu;
    const double b = BleuFromStats(sample_b).bleu;
    if (a_higher ? b >= a : a >= b) ++lower_wins;
  }
  result.p_value = static_cast<double>(lower_wins) / static_cast<double>(options.samples);
  result.significant = result.p_value < options.level;
  return result;
}

std::string SignificanceResult::ToText() const {
  return fmt::format("A = {:.2f}, B = {:.2f}, p = {:.4f} ({} samples), {} at level {}",
                     score_a, score_b, p_value, samples,
                     significant ? "significant" : "not significant", level);
}

std::string SignificanceResult::ToJson() const {
  nlohmann::ordered_json out;
  out["score_a"] = score_a;
  out["score_b"] = score_b;
  out["p_value"] = p_value;
  out["samples"] = samples;
  out["level"] = level;
  out["significant"] = significant;
  return out.dump(2);
}

}  // namespace dictattach
