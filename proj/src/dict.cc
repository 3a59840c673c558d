#include "dictattach/dict.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>
#include <unordered_set>

namespace dictattach {
namespace {

constexpr std::string_view kAbbrFor = "abbr. for";

// A source-language term inside a definition, e.g. `闪存盘`, `閃存盤|闪存盘`
// or `闪存盘[shan3 cun2 pan2]`.
struct TermMatch {
  size_t end = 0;   // one past the last consumed byte
  std::string key;  // simplified form when a trad|simp pair is given
};

bool IsTermChar(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') ||
           (cp >= 'A' && cp <= 'Z');
  }
  return !IsPunctuation(cp) && cp != 0xFFFD;
}

// Maximal run of term characters starting at `pos`, which must contain at
// least one non-ASCII character.
std::optional<size_t> ScanTermRun(std::string_view text, size_t pos) {
  size_t cursor = pos;
  bool has_non_ascii = false;
  while (cursor < text.size()) {
    size_t next = cursor;
    const char32_t cp = NextCodePoint(text, &next);
    if (!IsTermChar(cp)) break;
    has_non_ascii = has_non_ascii || cp >= 0x80;
    cursor = next;
  }
  if (cursor == pos || !has_non_ascii) return std::nullopt;
  return cursor;
}

std::optional<TermMatch> ScanTerm(std::string_view text, size_t pos) {
  const auto first = ScanTermRun(text, pos);
  if (!first) return std::nullopt;
  TermMatch match{*first, std::string(text.substr(pos, *first - pos))};
  if (match.end < text.size() && text[match.end] == '|') {
    if (const auto second = ScanTermRun(text, match.end + 1)) {
      match.key = std::string(text.substr(match.end + 1, *second - match.end - 1));
      match.end = *second;
    }
  }
  if (match.end < text.size() && text[match.end] == '[') {
    const size_t close = text.find(']', match.end);
    if (close != std::string_view::npos) match.end = close + 1;
  }
  return match;
}

size_t SkipSpaces(std::string_view text, size_t pos) {
  while (pos < text.size() && text[pos] == ' ') ++pos;
  return pos;
}

bool IsAsciiAlpha(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

std::string RemoveAbbreviations(std::string text) {
  size_t search = 0;
  while (true) {
    const size_t begin = text.find(kAbbrFor, search);
    if (begin == std::string::npos) return text;
    const size_t term_start = SkipSpaces(text, begin + kAbbrFor.size());
    const auto term = ScanTerm(text, term_start);
    if (!term) {
      search = begin + kAbbrFor.size();
      continue;
    }
    text.erase(begin, term->end - begin);
    search = begin;
  }
}

struct ReferenceMatch {
  size_t begin = 0;
  TermMatch term;
};

std::optional<ReferenceMatch> FindReference(std::string_view text,
                                            size_t search) {
  while (search < text.size()) {
    size_t begin = text.find("see", search);
    const size_t upper = text.find("See", search);
    begin = std::min(begin, upper);
    if (begin == std::string_view::npos) return std::nullopt;
    search = begin + 3;
    if (begin > 0 && IsAsciiAlpha(text[begin - 1])) continue;
    size_t cursor = begin + 3;
    if (cursor >= text.size() || text[cursor] != ' ') continue;
    cursor = SkipSpaces(text, cursor);
    if (text.substr(cursor, 4) == "also" &&
        (cursor + 4 == text.size() || text[cursor + 4] == ' ')) {
      const size_t after_also = SkipSpaces(text, cursor + 4);
      if (auto term = ScanTerm(text, after_also)) {
        return ReferenceMatch{begin, std::move(*term)};
      }
    }
    if (auto term = ScanTerm(text, cursor)) {
      return ReferenceMatch{begin, std::move(*term)};
    }
  }
  return std::nullopt;
}

bool IsTrimmablePunctuation(char32_t cp) {
  return cp == ',' || cp == ';' || cp == ':' || cp == 0xFF0C ||
         cp == 0x3001 || cp == 0xFF1B || cp == 0xFF1A;
}

// Collapses whitespace and strips separators left dangling at either end.
std::string NormalizeDefinition(std::string_view text) {
  std::string collapsed = CollapseWhitespace(text);
  std::string_view view = collapsed;
  bool changed = true;
  while (changed && !view.empty()) {
    changed = false;
    size_t pos = 0;
    if (IsTrimmablePunctuation(NextCodePoint(view, &pos))) {
      view.remove_prefix(pos);
      changed = true;
    }
    // Find the start of the last code point.
    size_t last = view.size();
    while (last > 0 && (static_cast<unsigned char>(view[last - 1]) & 0xC0) == 0x80) {
      --last;
    }
    if (last > 0) {
      --last;
      size_t probe = last;
      if (IsTrimmablePunctuation(NextCodePoint(view, &probe))) {
        view.remove_suffix(view.size() - last);
        changed = true;
      }
    }
    view = TrimWhitespace(view);
  }
  return std::string(view);
}

class CedictCleaner {
 public:
  CedictCleaner(const std::vector<RawCedictEntry>& raw,
                const CedictCleanOptions& options, CleanLog* log)
      : options_(options), log_(log) {
    for (const auto& entry : raw) {
      if (entry.simplified.empty()) continue;
      auto [it, inserted] = definitions_.try_emplace(entry.simplified);
      if (inserted) order_.push_back(entry.simplified);
      it->second.insert(it->second.end(), entry.definitions.begin(),
                        entry.definitions.end());
      if (!entry.traditional.empty()) {
        traditional_.try_emplace(entry.traditional, entry.simplified);
      }
    }
  }

  Dictionary Run() {
    Dictionary dictionary("cedict");
    for (const auto& headword : order_) {
      std::vector<std::string> cleaned;
      std::unordered_set<std::string> seen;
      for (const auto& definition : definitions_.at(headword)) {
        const auto resolved = Resolve(definition, 0, {headword});
        if (!resolved) {
          Drop(headword, definition, "unresolvable cross reference");
          continue;
        }
        for (const auto& text : *resolved) {
          std::string normalized = NormalizeDefinition(RemoveParenthesized(text));
          if (normalized.empty()) continue;
          if (seen.insert(normalized).second) cleaned.push_back(normalized);
        }
      }
      if (cleaned.empty()) {
        if (log_ != nullptr) log_->deleted_entries.push_back(headword);
        continue;
      }
      dictionary.Add(SplitWhitespace(headword), SplitWhitespace(Join(cleaned)));
    }
    return dictionary;
  }

 private:
  const std::vector<std::string>* Lookup(const std::string& key) const {
    auto it = definitions_.find(key);
    if (it != definitions_.end()) return &it->second;
    auto trad = traditional_.find(key);
    if (trad == traditional_.end()) return nullptr;
    it = definitions_.find(trad->second);
    return it == definitions_.end() ? nullptr : &it->second;
  }

  // Returns the definition strings that replace `definition`, or nullopt if
  // it must be dropped.
  std::optional<std::vector<std::string>> Resolve(
      const std::string& definition, int depth,
      std::set<std::string> visiting) const {
    std::string text = RemoveAbbreviations(definition);
    if (!options_.resolve_cross_references) return std::vector{text};
    size_t search = 0;
    while (auto ref = FindReference(text, search)) {
      if (depth >= options_.max_reference_depth) return std::nullopt;
      if (visiting.count(ref->term.key) > 0) return std::nullopt;
      const auto* target = Lookup(ref->term.key);
      if (target == nullptr) return std::nullopt;
      auto nested = visiting;
      nested.insert(ref->term.key);
      std::vector<std::string> replacement;
      for (const auto& target_definition : *target) {
        if (auto resolved = Resolve(target_definition, depth + 1, nested)) {
          replacement.insert(replacement.end(), resolved->begin(),
                             resolved->end());
        }
      }
      if (replacement.empty()) return std::nullopt;
      const std::string before = text.substr(0, ref->begin);
      const std::string after = text.substr(ref->term.end);
      if (NormalizeDefinition(before + " " + after).empty()) {
        return replacement;
      }
      const std::string inserted = Join(replacement);
      text = before + inserted + after;
      search = before.size() + inserted.size();
    }
    return std::vector{text};
  }

  void Drop(const std::string& headword, const std::string& definition,
            const std::string& reason) {
    if (log_ == nullptr) return;
    log_->dropped_definitions.push_back(headword + ": " + definition + " (" +
                                        reason + ")");
  }

  const CedictCleanOptions& options_;
  CleanLog* log_;
  std::vector<std::string> order_;
  std::unordered_map<std::string, std::vector<std::string>> definitions_;
  std::unordered_map<std::string, std::string> traditional_;
};

Sentence TokenizeField(std::string_view text, bool pretokenized) {
  return pretokenized ? SplitWhitespace(text) : TokenizePunctuation(text);
}

}  // namespace

CedictParseResult ParseCedict(const std::vector<std::string>& lines) {
  CedictParseResult result;
  for (size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = TrimWhitespace(lines[i]);
    if (line.empty() || line.front() == '#') continue;
    const auto skip = [&](std::string reason) {
      result.skipped.push_back({i + 1, std::move(reason), lines[i]});
    };
    const size_t trad_end = line.find(' ');
    if (trad_end == std::string_view::npos) {
      skip("missing simplified headword");
      continue;
    }
    const size_t simp_begin = SkipSpaces(line, trad_end);
    const size_t bracket = line.find('[', simp_begin);
    if (bracket == std::string_view::npos) {
      skip("missing pronunciation");
      continue;
    }
    const size_t close = line.find(']', bracket);
    if (close == std::string_view::npos) {
      skip("unterminated pronunciation");
      continue;
    }
    const std::string_view simplified =
        TrimWhitespace(line.substr(simp_begin, bracket - simp_begin));
    const std::string_view body = TrimWhitespace(line.substr(close + 1));
    if (simplified.empty()) {
      skip("missing simplified headword");
      continue;
    }
    if (body.size() < 2 || body.front() != '/' || body.back() != '/') {
      skip("definitions must be enclosed in '/'");
      continue;
    }
    RawCedictEntry entry;
    entry.traditional = std::string(line.substr(0, trad_end));
    entry.simplified = std::string(simplified);
    entry.pronunciation =
        std::string(line.substr(bracket + 1, close - bracket - 1));
    const std::string_view inner = body.substr(1, body.size() - 2);
    size_t start = 0;
    while (start <= inner.size()) {
      size_t slash = inner.find('/', start);
      if (slash == std::string_view::npos) slash = inner.size();
      const std::string_view piece =
          TrimWhitespace(inner.substr(start, slash - start));
      if (!piece.empty()) entry.definitions.emplace_back(piece);
      start = slash + 1;
    }
    if (entry.definitions.empty()) {
      skip("no definitions");
      continue;
    }
    result.entries.push_back(std::move(entry));
  }
  return result;
}

CedictParseResult ParseCedict(std::istream& in) {
  return ParseCedict(ReadLines(in));
}

std::string Dictionary::KeyOf(const Sentence& headword) {
  return Join(headword, kFuseSeparator);
}

bool Dictionary::Add(const Sentence& headword, const Sentence& definition) {
  if (headword.empty() || definition.empty()) return false;
  const std::string key = KeyOf(headword);
  auto it = index_.find(key);
  if (it != index_.end()) {
    auto& existing = entries_[it->second].definition;
    existing.insert(existing.end(), definition.begin(), definition.end());
    return true;
  }
  index_.emplace(key, entries_.size());
  entries_.push_back({headword, definition});
  max_headword_length_ = std::max(max_headword_length_, headword.size());
  return true;
}

const DictEntry* Dictionary::Find(const Sentence& headword) const {
  return FindKey(KeyOf(headword));
}

const DictEntry* Dictionary::FindKey(std::string_view key) const {
  auto it = index_.find(std::string(key));
  return it == index_.end() ? nullptr : &entries_[it->second];
}

bool Dictionary::SameEntries(const Dictionary& other) const {
  if (size() != other.size()) return false;
  for (const auto& entry : entries_) {
    const DictEntry* match = other.Find(entry.headword);
    if (match == nullptr || match->definition != entry.definition) return false;
  }
  return true;
}

Dictionary CleanCedict(const std::vector<RawCedictEntry>& raw,
                       const CedictCleanOptions& options, CleanLog* log) {
  return CedictCleaner(raw, options, log).Run();
}

std::string RemoveParenthesized(std::string_view text) {
  std::string out;
  int depth = 0;
  size_t pos = 0;
  while (pos < text.size()) {
    const size_t begin = pos;
    const char32_t cp = NextCodePoint(text, &pos);
    if (cp == '(' || cp == 0xFF08) {
      ++depth;
      if (depth == 1) out.push_back(' ');
    } else if (cp == ')' || cp == 0xFF09) {
      if (depth > 0) --depth;
    } else if (depth == 0) {
      out.append(text.substr(begin, pos - begin));
    }
  }
  return out;
}

Sentence TokenizePunctuation(std::string_view text) {
  static constexpr std::string_view kSplit = "()[]{},;:!?\"";
  std::string spaced;
  spaced.reserve(text.size() + 8);
  for (char c : text) {
    if (kSplit.find(c) != std::string_view::npos) {
      spaced.push_back(' ');
      spaced.push_back(c);
      spaced.push_back(' ');
    } else {
      spaced.push_back(c);
    }
  }
  return SplitWhitespace(spaced);
}

Dictionary CleanTsvDictionary(const std::vector<std::string>& lines,
                              const TsvCleanOptions& options,
                              std::vector<SkipRecord>* skipped,
                              CleanLog* log) {
  // Merge first so that entries emptied only on some lines survive.
  std::vector<std::string> order;
  std::unordered_map<std::string, std::pair<Sentence, Sentence>> merged;
  for (size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    if (TrimWhitespace(line).empty()) continue;
    const size_t tab = line.find('\t');
    if (tab == std::string_view::npos) {
      if (skipped != nullptr) skipped->push_back({i + 1, "missing tab", lines[i]});
      continue;
    }
    const Sentence headword = TokenizeField(
        RemoveParenthesized(line.substr(0, tab)), options.pretokenized);
    if (headword.empty()) {
      if (skipped != nullptr) {
        skipped->push_back({i + 1, "empty headword", lines[i]});
      }
      continue;
    }
    const Sentence definition =
        TokenizeField(line.substr(tab + 1), options.pretokenized);
    const std::string key = Dictionary::KeyOf(headword);
    auto [it, inserted] = merged.try_emplace(key, headword, Sentence{});
    if (inserted) order.push_back(key);
    it->second.second.insert(it->second.second.end(), definition.begin(),
                             definition.end());
  }
  Dictionary dictionary("tsv");
  for (const auto& key : order) {
    const auto& [headword, definition] = merged.at(key);
    if (definition.empty()) {
      if (log != nullptr) log->deleted_entries.push_back(Join(headword));
      continue;
    }
    dictionary.Add(headword, definition);
  }
  return dictionary;
}

DictStats ComputeDictStats(const Dictionary& dictionary) {
  DictStats stats;
  stats.entries = dictionary.size();
  size_t total = 0;
  for (const auto& entry : dictionary.entries()) {
    total += entry.definition.size();
    stats.max_definition_length =
        std::max(stats.max_definition_length, entry.definition.size());
  }
  if (stats.entries > 0) {
    stats.mean_definition_length =
        static_cast<double>(total) / static_cast<double>(stats.entries);
  }
  return stats;
}

void WriteDictionary(const Dictionary& dictionary, std::ostream& out) {
  for (const auto& entry : dictionary.entries()) {
    out << Join(entry.headword) << '\t' << Join(entry.definition) << '\n';
  }
}

void WriteDictionaryToFile(const Dictionary& dictionary,
                           const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  WriteDictionary(dictionary, out);
}

Dictionary ReadDictionary(const std::vector<std::string>& lines) {
  Dictionary dictionary;
  for (size_t i = 0; i < lines.size(); ++i) {
    if (TrimWhitespace(lines[i]).empty()) continue;
    const size_t tab = lines[i].find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error("dictionary line " + std::to_string(i + 1) +
                               ": missing tab");
    }
    const Sentence headword = SplitWhitespace(std::string_view(lines[i]).substr(0, tab));
    const Sentence definition =
        SplitWhitespace(std::string_view(lines[i]).substr(tab + 1));
    if (headword.empty() || definition.empty()) {
      throw std::runtime_error("dictionary line " + std::to_string(i + 1) +
                               ": empty headword or definition");
    }
    dictionary.Add(headword, definition);
  }
  return dictionary;
}

Dictionary ReadDictionaryFromFile(const std::string& path) {
  Dictionary dictionary = ReadDictionary(ReadLinesFromFile(path));
  dictionary.set_source_label(path);
  return dictionary;
}

}  // namespace dictattach
