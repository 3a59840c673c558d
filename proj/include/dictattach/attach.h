// Dictionary matching, span fusion and definition attachment.
//
// Pipeline for one source sentence (pre-BPE, tokenized):
//   FindMatches -> Fuse -> SegmentFused (BPE mode only splits non-fused
//   tokens) -> AttachSegmented (vocabulary lookup, UNK replacement,
//   definition truncation).
// The vocabulary is built between the segmentation and attachment steps, so
// the stages are exposed separately as well as through MakeAttachedCorpus.

#ifndef DICTATTACH_ATTACH_H_
#define DICTATTACH_ATTACH_H_

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dictattach/bpe.h"
#include "dictattach/corpus.h"
#include "dictattach/dict.h"
#include "dictattach/text.h"
#include "dictattach/vocab.h"

namespace dictattach {

inline constexpr size_t kMaxDefinitionLength = 50;

// Maximum training count for a headword to be fused and defined. An empty
// limit means infinity (every match qualifies).
class FrequencyThreshold {
 public:
  FrequencyThreshold() = default;
  explicit FrequencyThreshold(int64_t limit) : limit_(limit) {}
  static FrequencyThreshold Infinite() { return FrequencyThreshold(); }
  // Accepts a non-negative integer or "inf".
  static FrequencyThreshold Parse(const std::string& text);

  bool is_infinite() const { return !limit_.has_value(); }
  int64_t limit() const { return limit_.value_or(INT64_MAX); }
  bool Admits(int64_t count) const { return !limit_ || count <= *limit_; }
  std::string ToString() const;

  bool operator==(const FrequencyThreshold&) const = default;

 private:
  std::optional<int64_t> limit_;
};

// Occurrence counts of unigrams and of multi-token dictionary headwords in
// the (pre-BPE) training source text, keyed by fused surface form.
class FrequencyTable {
 public:
  static FrequencyTable Build(const std::vector<Sentence>& sentences,
                              const Dictionary& dictionary);
  int64_t Count(const std::string& key) const;
  int64_t Count(const Sentence& tokens) const;

 private:
  std::unordered_map<std::string, int64_t> counts_;
};

struct MatchSpan {
  size_t start = 0;
  size_t end = 0;  // exclusive
  Sentence headword;

  bool operator==(const MatchSpan&) const = default;
};

struct MatchOptions {
  FrequencyThreshold threshold;
  bool single_word_only = false;
};

// Leftmost-longest selection: scanning left to right, take the longest
// admissible headword starting at the current position and resume after it.
std::vector<MatchSpan> FindMatches(const Sentence& sentence,
                                   const Dictionary& dictionary,
                                   const FrequencyTable& frequencies,
                                   const MatchOptions& options);

struct FusionRecord {
  std::string surface;
  Sentence original;
  Sentence headword;
  size_t position = 0;  // index of the fused token in the fused sentence
};

struct FusedSentence {
  Sentence tokens;
  std::vector<FusionRecord> fusions;
  // Old token index -> new token index.
  std::vector<size_t> position_map;
};

// Joins each span's tokens with kFuseSeparator. Spans must be sorted, in
// range and non-overlapping; anything else throws std::invalid_argument.
FusedSentence Fuse(const Sentence& sentence, const std::vector<MatchSpan>& spans);

// Expands every fused token back into its original tokens.
Sentence Defuse(const FusedSentence& fused);

// Throws std::invalid_argument if any token contains kFuseSeparator.
void ValidateNoFuseSeparator(const std::vector<Sentence>& sentences);

enum class Segmentation { kWord, kBpe };
enum class AttachTarget { kUnknownOnly, kAllMatched };

std::string ToString(Segmentation segmentation);
Segmentation ParseSegmentation(const std::string& text);

struct AttachOptions {
  Segmentation segmentation = Segmentation::kWord;
  FrequencyThreshold threshold;
  bool single_word_only = false;
  // Word mode only; BPE mode defines every fused token.
  AttachTarget target = AttachTarget::kUnknownOnly;
  size_t max_definition_length = kMaxDefinitionLength;

  MatchOptions match() const { return {threshold, single_word_only}; }
};

struct Attachment {
  size_t pos = 0;      // 0-based index into AttachedSentence::tokens
  std::string anchor;  // vocabulary form of the anchor, possibly UNK
  Sentence definition;

  bool operator==(const Attachment&) const = default;
};

struct AttachedSentence {
  Sentence tokens;
  std::vector<Attachment> attachments;

  bool operator==(const AttachedSentence&) const = default;
};

// Source tokens after fusion and, in BPE mode, segmentation of everything
// that was not fused.
struct SegmentedSource {
  Sentence tokens;
  std::vector<std::pair<size_t, Sentence>> anchors;  // (index, headword)
};

FusedSentence FuseSentence(const Sentence& sentence, const Dictionary& dictionary,
                           const FrequencyTable& frequencies,
                           const AttachOptions& options);

// `bpe` must be non-null in BPE mode.
SegmentedSource SegmentFused(const FusedSentence& fused,
                             Segmentation segmentation, BpeApplier* bpe);

AttachedSentence AttachSegmented(const SegmentedSource& source,
                                 const Dictionary& dictionary,
                                 const Vocabulary& vocab,
                                 const AttachOptions& options, BpeApplier* bpe);

std::vector<AttachedSentence> MakeAttachedCorpus(
    const std::vector<Sentence>& sentences, const Dictionary& dictionary,
    const FrequencyTable& frequencies, const Vocabulary& vocab,
    const AttachOptions& options, const BpeModel* bpe = nullptr);

// Same base tokens as MakeAttachedCorpus, no attachments.
std::vector<AttachedSentence> MakeFuseOnlyCorpus(
    const std::vector<Sentence>& sentences, const Dictionary& dictionary,
    const FrequencyTable& frequencies, const Vocabulary& vocab,
    const AttachOptions& options, const BpeModel* bpe = nullptr);

// Plain sentences wrapped without fusion or attachments; OOV tokens keep
// their surface form.
std::vector<AttachedSentence> WrapPlain(const std::vector<Sentence>& sentences);

// One pair per entry: headword as source, definition as target.
ParallelCorpus MakeAppendCorpus(const Dictionary& dictionary);

// JSON-lines form: {"tokens":[...],"attachments":[{"pos":..,"anchor":..,"def":[..]}]}
std::string ToJsonLine(const AttachedSentence& sentence);
AttachedSentence FromJsonLine(const std::string& line);
void WriteAttachedCorpus(const std::string& path,
                         const std::vector<AttachedSentence>& corpus);
std::vector<AttachedSentence> ReadAttachedCorpus(const std::string& path);

}  // namespace dictattach

#endif  // DICTATTACH_ATTACH_H_
