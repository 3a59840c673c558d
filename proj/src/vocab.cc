#include "dictattach/vocab.h"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace dictattach {

const std::string& Vocabulary::PadToken() {
  static const std::string token = "<pad>";
  return token;
}
const std::string& Vocabulary::UnkToken() {
  static const std::string token = "<unk>";
  return token;
}
const std::string& Vocabulary::BosToken() {
  static const std::string token = "<s>";
  return token;
}
const std::string& Vocabulary::EosToken() {
  static const std::string token = "</s>";
  return token;
}

Vocabulary::Vocabulary() {
  Add(PadToken());
  Add(UnkToken());
  Add(BosToken());
  Add(EosToken());
}

TokenId Vocabulary::Add(const std::string& token, int64_t frequency) {
  auto [it, inserted] =
      ids_.try_emplace(token, static_cast<TokenId>(tokens_.size()));
  if (inserted) {
    tokens_.push_back(token);
    frequencies_.push_back(frequency);
  }
  return it->second;
}

bool Vocabulary::Contains(const std::string& token) const {
  return ids_.count(token) > 0;
}

TokenId Vocabulary::IdOf(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::TokenOf(TokenId id) const {
  if (id < 0 || static_cast<size_t>(id) >= tokens_.size()) return UnkToken();
  return tokens_[id];
}

std::vector<TokenId> Vocabulary::Encode(const Sentence& sentence) const {
  std::vector<TokenId> ids;
  ids.reserve(sentence.size());
  for (const auto& token : sentence) ids.push_back(IdOf(token));
  return ids;
}

Sentence Vocabulary::Decode(const std::vector<TokenId>& ids) const {
  Sentence out;
  out.reserve(ids.size());
  for (TokenId id : ids) out.push_back(TokenOf(id));
  return out;
}

const std::string& Vocabulary::Canonical(const std::string& token) const {
  return TokenOf(IdOf(token));
}

uint64_t Vocabulary::Hash() const {
  uint64_t hash = Fnv1a64("");
  for (const auto& token : tokens_) {
    hash = Fnv1a64(token, hash);
    hash = Fnv1a64(std::string_view("\n", 1), hash);
  }
  return hash;
}

void Vocabulary::Save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (size_t id = kNumReserved; id < tokens_.size(); ++id) {
    out << tokens_[id] << '\t' << frequencies_[id] << '\n';
  }
}

Vocabulary Vocabulary::Load(const std::string& path) {
  Vocabulary vocab;
  const auto lines = ReadLinesFromFile(path);
  for (size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const size_t tab = lines[i].find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw std::runtime_error("vocabulary line " + std::to_string(i + 1) +
                               ": expected `token<TAB>frequency`");
    }
    vocab.Add(lines[i].substr(0, tab), std::stoll(lines[i].substr(tab + 1)));
  }
  return vocab;
}

Vocabulary BuildVocab(const std::vector<const std::vector<Sentence>*>& sides,
                      const VocabOptions& options) {
  if (options.size_cap < Vocabulary::kNumReserved) {
    throw std::invalid_argument("vocabulary cap must cover the 4 reserved symbols");
  }
  std::unordered_map<std::string, size_t> position;
  std::vector<std::pair<std::string, int64_t>> counts;
  for (const auto* side : sides) {
    for (const auto& sentence : *side) {
      for (const auto& token : sentence) {
        auto [it, inserted] = position.try_emplace(token, counts.size());
        if (inserted) counts.emplace_back(token, 0);
        ++counts[it->second].second;
      }
    }
  }
  std::stable_sort(counts.begin(), counts.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary vocab;
  for (const auto& [token, count] : counts) {
    if (vocab.size() >= options.size_cap) break;
    if (count < options.min_count) break;
    vocab.Add(token, count);
  }
  return vocab;
}

}  // namespace dictattach
