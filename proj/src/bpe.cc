#include "dictattach/bpe.h"

#include <fstream>
#include <set>
#include <stdexcept>
#include <tuple>

#include <spdlog/spdlog.h>

namespace dictattach {
namespace {

constexpr std::string_view kVersionHeader = "#version: 0.2";

std::vector<std::string> InitialSymbols(const std::string& word) {
  std::vector<std::string> symbols = SplitCodePoints(word);
  if (!symbols.empty()) symbols.back().append(kEndOfWord);
  return symbols;
}

// Replaces every non-overlapping occurrence of (left, right), scanning left
// to right.
void MergeInPlace(std::vector<std::string>& symbols, const std::string& left,
                  const std::string& right) {
  std::vector<std::string> merged;
  merged.reserve(symbols.size());
  for (size_t i = 0; i < symbols.size(); ++i) {
    if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
      merged.push_back(left + right);
      ++i;
    } else {
      merged.push_back(std::move(symbols[i]));
    }
  }
  symbols = std::move(merged);
}

class BpeLearner {
 public:
  BpeLearner(const std::vector<Sentence>& source,
             const std::vector<Sentence>& target) {
    std::unordered_map<std::string, size_t> word_ids;
    const auto add = [&](const std::vector<Sentence>& side) {
      for (const auto& sentence : side) {
        for (const auto& token : sentence) {
          auto [it, inserted] = word_ids.try_emplace(token, words_.size());
          if (inserted) {
            words_.push_back(InitialSymbols(token));
            counts_.push_back(0);
          }
          ++counts_[it->second];
        }
      }
    };
    add(source);
    add(target);
    for (size_t w = 0; w < words_.size(); ++w) AddWordPairs(w);
  }

  std::vector<BpePair> Learn(size_t num_merges) {
    std::vector<BpePair> merges;
    while (merges.size() < num_merges && !queue_.empty()) {
      const auto [neg_count, left, right] = *queue_.begin();
      if (-neg_count <= 0) break;
      BpePair best{left, right};
      const std::set<size_t> affected = index_[best];
      for (size_t w : affected) {
        RemoveWordPairs(w);
        MergeInPlace(words_[w], best.first, best.second);
        AddWordPairs(w);
      }
      merges.push_back(std::move(best));
    }
    return merges;
  }

 private:
  void Adjust(const BpePair& pair, int64_t delta) {
    int64_t& count = stats_[pair];
    if (count > 0) queue_.erase({-count, pair.first, pair.second});
    count += delta;
    if (count > 0) {
      queue_.insert({-count, pair.first, pair.second});
    } else {
      stats_.erase(pair);
    }
  }

  void AddWordPairs(size_t w) {
    const auto& symbols = words_[w];
    for (size_t i = 0; i + 1 < symbols.size(); ++i) {
      BpePair pair{symbols[i], symbols[i + 1]};
      index_[pair].insert(w);
      Adjust(pair, counts_[w]);
    }
  }

  void RemoveWordPairs(size_t w) {
    const auto& symbols = words_[w];
    for (size_t i = 0; i + 1 < symbols.size(); ++i) {
      BpePair pair{symbols[i], symbols[i + 1]};
      auto it = index_.find(pair);
      if (it != index_.end()) {
        it->second.erase(w);
        if (it->second.empty()) index_.erase(it);
      }
      Adjust(pair, -counts_[w]);
    }
  }

  std::vector<std::vector<std::string>> words_;
  std::vector<int64_t> counts_;
  std::map<BpePair, int64_t> stats_;
  std::map<BpePair, std::set<size_t>> index_;
  // Ordered by descending count, then ascending (left, right).
  std::set<std::tuple<int64_t, std::string, std::string>> queue_;
};

}  // namespace

size_t BpeModel::PairHash::operator()(const BpePair& p) const {
  return static_cast<size_t>(
      Fnv1a64(p.second, Fnv1a64(p.first) ^ 0x9E3779B97F4A7C15ULL));
}

BpeModel::BpeModel(std::vector<BpePair> merges) : merges_(std::move(merges)) {
  for (size_t i = 0; i < merges_.size(); ++i) {
    if (!ranks_.try_emplace(merges_[i], static_cast<int64_t>(i)).second) {
      throw std::invalid_argument("duplicate BPE merge: " + merges_[i].first +
                                  " " + merges_[i].second);
    }
  }
}

int64_t BpeModel::Rank(const std::string& left, const std::string& right) const {
  auto it = ranks_.find(BpePair{left, right});
  return it == ranks_.end() ? -1 : it->second;
}

void BpeModel::Save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << kVersionHeader << '\n';
  for (const auto& [left, right] : merges_) out << left << ' ' << right << '\n';
}

BpeModel BpeModel::FromLines(const std::vector<std::string>& lines) {
  std::vector<BpePair> merges;
  for (size_t i = 0; i < lines.size(); ++i) {
    if (i == 0 && lines[i].rfind("#version", 0) == 0) continue;
    if (lines[i].empty()) continue;
    const Sentence parts = SplitWhitespace(lines[i]);
    if (parts.size() != 2) {
      throw std::runtime_error("BPE model line " + std::to_string(i + 1) +
                               ": expected `left right`");
    }
    merges.emplace_back(parts[0], parts[1]);
  }
  return BpeModel(std::move(merges));
}

BpeModel BpeModel::Load(const std::string& path) {
  return FromLines(ReadLinesFromFile(path));
}

BpeModel LearnJointBpe(const std::vector<Sentence>& source,
                       const std::vector<Sentence>& target,
                       size_t num_merges) {
  if (num_merges == 0) return BpeModel();
  return BpeModel(BpeLearner(source, target).Learn(num_merges));
}

std::vector<std::string> SegmentWord(const std::string& word,
                                     const BpeModel& model) {
  std::vector<std::string> symbols = InitialSymbols(word);
  while (symbols.size() > 1) {
    int64_t best_rank = -1;
    size_t best_at = 0;
    for (size_t i = 0; i + 1 < symbols.size(); ++i) {
      const int64_t rank = model.Rank(symbols[i], symbols[i + 1]);
      if (rank >= 0 && (best_rank < 0 || rank < best_rank)) {
        best_rank = rank;
        best_at = i;
      }
    }
    if (best_rank < 0) break;
    const std::string left = symbols[best_at];
    const std::string right = symbols[best_at + 1];
    MergeInPlace(symbols, left, right);
  }
  if (!symbols.empty()) {
    std::string& last = symbols.back();
    last.erase(last.size() - kEndOfWord.size());
  }
  return symbols;
}

Sentence ApplyBpe(const Sentence& sentence, const BpeModel& model) {
  BpeApplier applier(model);
  return applier.Apply(sentence);
}

const std::vector<std::string>& BpeApplier::Segment(const std::string& word) {
  auto it = cache_.find(word);
  if (it == cache_.end()) {
    it = cache_.emplace(word, SegmentWord(word, model_)).first;
  }
  return it->second;
}

Sentence BpeApplier::Apply(const Sentence& sentence) {
  Sentence out;
  out.reserve(sentence.size() * 2);
  for (const auto& word : sentence) {
    const auto& pieces = Segment(word);
    for (size_t i = 0; i < pieces.size(); ++i) {
      out.push_back(i + 1 < pieces.size() ? pieces[i] + std::string(kBpeMarker)
                                          : pieces[i]);
    }
  }
  return out;
}

Sentence UndoBpe(const Sentence& sentence) {
  const auto has_marker = [](const std::string& token) {
    return token.size() >= kBpeMarker.size() &&
           token.compare(token.size() - kBpeMarker.size(), kBpeMarker.size(),
                         kBpeMarker) == 0;
  };
  Sentence out;
  std::string pending;
  bool open = false;
  for (const auto& token : sentence) {
    if (has_marker(token)) {
      pending.append(token, 0, token.size() - kBpeMarker.size());
      open = true;
    } else {
      pending.append(token);
      out.push_back(std::move(pending));
      pending.clear();
      open = false;
    }
  }
  if (open) {
    spdlog::debug("undo_bpe: dangling continuation marker at sentence end");
    if (!pending.empty()) out.push_back(std::move(pending));
  }
  return out;
}

}  // namespace dictattach
