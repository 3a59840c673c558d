#include "dictattach/attach.h"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace dictattach {

FrequencyThreshold FrequencyThreshold::Parse(const std::string& text) {
  const std::string lowered = AsciiLower(TrimWhitespace(text));
  if (lowered == "inf" || lowered == "infinity" || lowered == "∞") {
    return Infinite();
  }
  size_t consumed = 0;
  int64_t value = 0;
  try {
    value = std::stoll(lowered, &consumed);
  } catch (const std::exception&) {
    throw std::invalid_argument("invalid frequency threshold: " + text);
  }
  if (consumed != lowered.size() || value < 0) {
    throw std::invalid_argument("invalid frequency threshold: " + text);
  }
  return FrequencyThreshold(value);
}

std::string FrequencyThreshold::ToString() const {
  return limit_ ? std::to_string(*limit_) : "inf";
}

FrequencyTable FrequencyTable::Build(const std::vector<Sentence>& sentences,
                                     const Dictionary& dictionary) {
  FrequencyTable table;
  const size_t max_length = std::max<size_t>(1, dictionary.max_headword_length());
  for (const auto& sentence : sentences) {
    for (size_t start = 0; start < sentence.size(); ++start) {
      std::string key = sentence[start];
      ++table.counts_[key];
      for (size_t n = 2; n <= max_length && start + n <= sentence.size(); ++n) {
        key.append(kFuseSeparator);
        key.append(sentence[start + n - 1]);
        if (dictionary.FindKey(key) != nullptr) ++table.counts_[key];
      }
    }
  }
  return table;
}

int64_t FrequencyTable::Count(const std::string& key) const {
  auto it = counts_.find(key);
  return it == counts_.end() ? 0 : it->second;
}

int64_t FrequencyTable::Count(const Sentence& tokens) const {
  return Count(Dictionary::KeyOf(tokens));
}

std::vector<MatchSpan> FindMatches(const Sentence& sentence,
                                   const Dictionary& dictionary,
                                   const FrequencyTable& frequencies,
                                   const MatchOptions& options) {
  std::vector<MatchSpan> spans;
  const size_t max_length =
      options.single_word_only ? 1 : dictionary.max_headword_length();
  std::vector<std::string> keys;
  size_t start = 0;
  while (start < sentence.size()) {
    keys.clear();
    std::string key;
    for (size_t n = 1; n <= max_length && start + n <= sentence.size(); ++n) {
      if (n > 1) key.append(kFuseSeparator);
      key.append(sentence[start + n - 1]);
      keys.push_back(key);
    }
    size_t taken = 0;
    for (size_t n = keys.size(); n >= 1; --n) {
      if (dictionary.FindKey(keys[n - 1]) != nullptr &&
          options.threshold.Admits(frequencies.Count(keys[n - 1]))) {
        taken = n;
        break;
      }
    }
    if (taken == 0) {
      ++start;
      continue;
    }
    spans.push_back({start, start + taken,
                     Sentence(sentence.begin() + start,
                              sentence.begin() + start + taken)});
    start += taken;
  }
  return spans;
}

FusedSentence Fuse(const Sentence& sentence, const std::vector<MatchSpan>& spans) {
  size_t previous_end = 0;
  for (const auto& span : spans) {
    if (span.start >= span.end || span.end > sentence.size()) {
      throw std::invalid_argument("match span out of range");
    }
    if (span.start < previous_end) {
      throw std::invalid_argument("match spans overlap or are unsorted");
    }
    previous_end = span.end;
  }
  FusedSentence fused;
  fused.position_map.resize(sentence.size());
  size_t next_span = 0;
  for (size_t i = 0; i < sentence.size();) {
    if (next_span < spans.size() && spans[next_span].start == i) {
      const MatchSpan& span = spans[next_span++];
      FusionRecord record;
      record.original.assign(sentence.begin() + span.start,
                             sentence.begin() + span.end);
      record.surface = Join(record.original, kFuseSeparator);
      record.headword = span.headword.empty() ? record.original : span.headword;
      record.position = fused.tokens.size();
      for (size_t j = span.start; j < span.end; ++j) {
        fused.position_map[j] = record.position;
      }
      fused.tokens.push_back(record.surface);
      fused.fusions.push_back(std::move(record));
      i = span.end;
    } else {
      fused.position_map[i] = fused.tokens.size();
      fused.tokens.push_back(sentence[i]);
      ++i;
    }
  }
  return fused;
}

Sentence Defuse(const FusedSentence& fused) {
  Sentence out;
  size_t next = 0;
  for (size_t i = 0; i < fused.tokens.size(); ++i) {
    if (next < fused.fusions.size() && fused.fusions[next].position == i) {
      const auto& original = fused.fusions[next++].original;
      out.insert(out.end(), original.begin(), original.end());
    } else {
      out.push_back(fused.tokens[i]);
    }
  }
  return out;
}

void ValidateNoFuseSeparator(const std::vector<Sentence>& sentences) {
  for (size_t i = 0; i < sentences.size(); ++i) {
    for (const auto& token : sentences[i]) {
      if (token.find(kFuseSeparator) != std::string::npos) {
        throw std::invalid_argument(
            "line " + std::to_string(i + 1) +
            " contains the reserved fusion separator U+2581");
      }
    }
  }
}

std::string ToString(Segmentation segmentation) {
  return segmentation == Segmentation::kWord ? "word" : "bpe";
}

Segmentation ParseSegmentation(const std::string& text) {
  if (text == "word") return Segmentation::kWord;
  if (text == "bpe") return Segmentation::kBpe;
  throw std::invalid_argument("segmentation must be `word` or `bpe`: " + text);
}

FusedSentence FuseSentence(const Sentence& sentence, const Dictionary& dictionary,
                           const FrequencyTable& frequencies,
                           const AttachOptions& options) {
  return Fuse(sentence,
              FindMatches(sentence, dictionary, frequencies, options.match()));
}

SegmentedSource SegmentFused(const FusedSentence& fused,
                             Segmentation segmentation, BpeApplier* bpe) {
  SegmentedSource out;
  if (segmentation == Segmentation::kBpe && bpe == nullptr) {
    throw std::invalid_argument("BPE segmentation requires a BPE model");
  }
  size_t next = 0;
  for (size_t i = 0; i < fused.tokens.size(); ++i) {
    if (next < fused.fusions.size() && fused.fusions[next].position == i) {
      out.anchors.emplace_back(out.tokens.size(), fused.fusions[next].headword);
      out.tokens.push_back(fused.tokens[i]);
      ++next;
    } else if (segmentation == Segmentation::kBpe) {
      const Sentence pieces = bpe->Apply({fused.tokens[i]});
      out.tokens.insert(out.tokens.end(), pieces.begin(), pieces.end());
    } else {
      out.tokens.push_back(fused.tokens[i]);
    }
  }
  return out;
}

AttachedSentence AttachSegmented(const SegmentedSource& source,
                                 const Dictionary& dictionary,
                                 const Vocabulary& vocab,
                                 const AttachOptions& options, BpeApplier* bpe) {
  AttachedSentence out;
  out.tokens.reserve(source.tokens.size());
  for (const auto& token : source.tokens) out.tokens.push_back(vocab.Canonical(token));
  for (const auto& [pos, headword] : source.anchors) {
    const std::string& anchor = out.tokens[pos];
    if (options.segmentation == Segmentation::kWord &&
        options.target == AttachTarget::kUnknownOnly &&
        anchor != Vocabulary::UnkToken()) {
      continue;
    }
    const DictEntry* entry = dictionary.Find(headword);
    if (entry == nullptr) {
      throw std::logic_error("fused span has no dictionary entry");
    }
    Sentence definition = options.segmentation == Segmentation::kBpe
                              ? bpe->Apply(entry->definition)
                              : entry->definition;
    if (definition.size() > options.max_definition_length) {
      definition.resize(options.max_definition_length);
    }
    if (definition.empty()) continue;
    out.attachments.push_back({pos, anchor, std::move(definition)});
  }
  return out;
}

namespace {

std::vector<AttachedSentence> MakeCorpus(const std::vector<Sentence>& sentences,
                                         const Dictionary& dictionary,
                                         const FrequencyTable& frequencies,
                                         const Vocabulary& vocab,
                                         const AttachOptions& options,
                                         const BpeModel* bpe, bool attach) {
  if (options.segmentation == Segmentation::kBpe && bpe == nullptr) {
    throw std::invalid_argument("BPE mode requires a BPE model");
  }
  std::optional<BpeApplier> applier;
  if (bpe != nullptr) applier.emplace(*bpe);
  BpeApplier* applier_ptr = applier ? &*applier : nullptr;
  std::vector<AttachedSentence> out;
  out.reserve(sentences.size());
  for (const auto& sentence : sentences) {
    const FusedSentence fused =
        FuseSentence(sentence, dictionary, frequencies, options);
    const SegmentedSource segmented =
        SegmentFused(fused, options.segmentation, applier_ptr);
    AttachedSentence attached =
        AttachSegmented(segmented, dictionary, vocab, options, applier_ptr);
    if (!attach) attached.attachments.clear();
    out.push_back(std::move(attached));
  }
  return out;
}

}  // namespace

std::vector<AttachedSentence> MakeAttachedCorpus(
    const std::vector<Sentence>& sentences, const Dictionary& dictionary,
    const FrequencyTable& frequencies, const Vocabulary& vocab,
    const AttachOptions& options, const BpeModel* bpe) {
  return MakeCorpus(sentences, dictionary, frequencies, vocab, options, bpe, true);
}

std::vector<AttachedSentence> MakeFuseOnlyCorpus(
    const std::vector<Sentence>& sentences, const Dictionary& dictionary,
    const FrequencyTable& frequencies, const Vocabulary& vocab,
    const AttachOptions& options, const BpeModel* bpe) {
  return MakeCorpus(sentences, dictionary, frequencies, vocab, options, bpe, false);
}

std::vector<AttachedSentence> WrapPlain(const std::vector<Sentence>& sentences) {
  std::vector<AttachedSentence> out;
  out.reserve(sentences.size());
  for (const auto& sentence : sentences) out.push_back({sentence, {}});
  return out;
}

ParallelCorpus MakeAppendCorpus(const Dictionary& dictionary) {
  ParallelCorpus corpus;
  for (const auto& entry : dictionary.entries()) {
    corpus.source.push_back(entry.headword);
    corpus.target.push_back(entry.definition);
  }
  return corpus;
}

std::string ToJsonLine(const AttachedSentence& sentence) {
  nlohmann::ordered_json json;
  json["tokens"] = sentence.tokens;
  json["attachments"] = nlohmann::ordered_json::array();
  for (const auto& attachment : sentence.attachments) {
    nlohmann::ordered_json record;
    record["pos"] = attachment.pos;
    record["anchor"] = attachment.anchor;
    record["def"] = attachment.definition;
    json["attachments"].push_back(std::move(record));
  }
  return json.dump();
}

AttachedSentence FromJsonLine(const std::string& line) {
  const auto json = nlohmann::ordered_json::parse(line);
  AttachedSentence sentence;
  sentence.tokens = json.at("tokens").get<Sentence>();
  for (const auto& record : json.at("attachments")) {
    Attachment attachment;
    attachment.pos = record.at("pos").get<size_t>();
    attachment.anchor = record.at("anchor").get<std::string>();
    attachment.definition = record.at("def").get<Sentence>();
    if (attachment.pos >= sentence.tokens.size()) {
      throw std::invalid_argument("attachment position out of range");
    }
    sentence.attachments.push_back(std::move(attachment));
  }
  return sentence;
}

void WriteAttachedCorpus(const std::string& path,
                         const std::vector<AttachedSentence>& corpus) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& sentence : corpus) out << ToJsonLine(sentence) << '\n';
}

std::vector<AttachedSentence> ReadAttachedCorpus(const std::string& path) {
  std::vector<AttachedSentence> corpus;
  for (const auto& line : ReadLinesFromFile(path)) {
    if (line.empty()) continue;
    corpus.push_back(FromJsonLine(line));
  }
  return corpus;
}

}  // namespace dictattach
