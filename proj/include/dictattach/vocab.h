#ifndef DICTATTACH_VOCAB_H_
#define DICTATTACH_VOCAB_H_

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "dictattach/text.h"

namespace dictattach {

using TokenId = int32_t;

// Token <-> id map with four reserved symbols at ids 0..3.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kBos = 2;
  static constexpr TokenId kEos = 3;
  static constexpr size_t kNumReserved = 4;
  static const std::string& PadToken();
  static const std::string& UnkToken();
  static const std::string& BosToken();
  static const std::string& EosToken();

  Vocabulary();

  // Appends a token; returns its id (existing id if already present).
  TokenId Add(const std::string& token, int64_t frequency = 0);

  bool Contains(const std::string& token) const;
  // Unknown tokens map to kUnk.
  TokenId IdOf(const std::string& token) const;
  const std::string& TokenOf(TokenId id) const;
  int64_t FrequencyOf(TokenId id) const { return frequencies_.at(id); }

  std::vector<TokenId> Encode(const Sentence& sentence) const;
  Sentence Decode(const std::vector<TokenId>& ids) const;
  // Vocabulary form of a token: itself if known, the UNK symbol otherwise.
  const std::string& Canonical(const std::string& token) const;

  size_t size() const { return tokens_.size(); }
  // FNV-1a over the tokens in id order.
  uint64_t Hash() const;

  // `token<TAB>frequency` lines, descending frequency, reserved symbols
  // omitted.
  void Save(const std::string& path) const;
  static Vocabulary Load(const std::string& path);

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::vector<int64_t> frequencies_;
  std::unordered_map<std::string, TokenId> ids_;
};

struct VocabOptions {
  // Total size including the reserved symbols. Must be at least 4.
  size_t size_cap = 32000;
  // Tokens seen fewer times are left out even when the cap has room.
  int64_t min_count = 1;
};

// Joint vocabulary over every token of every sentence in `sides`, most
// frequent first; ties keep first-occurrence order.
Vocabulary BuildVocab(const std::vector<const std::vector<Sentence>*>& sides,
                      const VocabOptions& options);

}  // namespace dictattach

#endif  // DICTATTACH_VOCAB_H_
