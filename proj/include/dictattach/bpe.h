// Joint byte pair encoding with `@@` continuation markers.
//
// Merges are learned over the code points of each word with an implicit
// end-of-word symbol attached to the final code point (written `</w>` in the
// model file), following the subword-nmt convention.

#ifndef DICTATTACH_BPE_H_
#define DICTATTACH_BPE_H_

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dictattach/text.h"

namespace dictattach {

inline constexpr std::string_view kEndOfWord = "</w>";
inline constexpr std::string_view kBpeMarker = "@@";

using BpePair = std::pair<std::string, std::string>;

class BpeModel {
 public:
  BpeModel() = default;
  explicit BpeModel(std::vector<BpePair> merges);

  const std::vector<BpePair>& merges() const { return merges_; }
  size_t size() const { return merges_.size(); }

  // Learning order of a merge, or -1 if absent.
  int64_t Rank(const std::string& left, const std::string& right) const;

  void Save(const std::string& path) const;
  static BpeModel Load(const std::string& path);
  static BpeModel FromLines(const std::vector<std::string>& lines);

 private:
  struct PairHash {
    size_t operator()(const BpePair& p) const;
  };
  std::vector<BpePair> merges_;
  std::unordered_map<BpePair, int64_t, PairHash> ranks_;
};

// Learns up to `num_merges` merges over the words of both corpora. At each
// step the most frequent adjacent pair is merged; ties go to the
// lexicographically smallest (left, right) pair.
BpeModel LearnJointBpe(const std::vector<Sentence>& source,
                       const std::vector<Sentence>& target,
                       size_t num_merges);

// Segments one word into subwords, without markers. The final subword has the
// end-of-word symbol stripped.
std::vector<std::string> SegmentWord(const std::string& word,
                                     const BpeModel& model);

// Segments every word; all subwords except the last of a word get `@@`.
Sentence ApplyBpe(const Sentence& sentence, const BpeModel& model);

// Caching front end for applying one model to a large corpus.
class BpeApplier {
 public:
  explicit BpeApplier(const BpeModel& model) : model_(model) {}
  Sentence Apply(const Sentence& sentence);
  const std::vector<std::string>& Segment(const std::string& word);

 private:
  const BpeModel& model_;
  std::unordered_map<std::string, std::vector<std::string>> cache_;
};

// Joins each run of `@@`-suffixed tokens with its follower. A marker on the
// final token is stripped and the token kept.
Sentence UndoBpe(const Sentence& sentence);

}  // namespace dictattach

#endif  // DICTATTACH_BPE_H_
