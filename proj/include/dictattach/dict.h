// Dictionary parsing and cleaning.
//
// Two raw sources are supported: CC-CEDICT lines and `headword<TAB>definition`
// TSV files. Both are reduced to a Dictionary: a table from a token-sequence
// headword to a single token-sequence definition. The canonical on-disk form
// of a cleaned dictionary is a UTF-8 TSV with space-separated tokens on each
// side of the tab.

#ifndef DICTATTACH_DICT_H_
#define DICTATTACH_DICT_H_

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dictattach/text.h"

namespace dictattach {

// A line that could not be parsed. Line numbers are 1-based.
struct SkipRecord {
  size_t line_number = 0;
  std::string reason;
  std::string text;
};

struct RawCedictEntry {
  std::string traditional;
  std::string simplified;
  std::string pronunciation;
  std::vector<std::string> definitions;
};

struct CedictParseResult {
  std::vector<RawCedictEntry> entries;
  std::vector<SkipRecord> skipped;
};

// Parses `TRAD SIMP [pinyin] /def1/def2/.../` lines. Blank lines and lines
// starting with '#' are ignored; malformed lines land in `skipped`.
CedictParseResult ParseCedict(const std::vector<std::string>& lines);
CedictParseResult ParseCedict(std::istream& in);

struct DictEntry {
  Sentence headword;
  Sentence definition;

  bool operator==(const DictEntry&) const = default;
};

// Headword-keyed table. Iteration follows insertion order.
class Dictionary {
 public:
  Dictionary() = default;
  explicit Dictionary(std::string source_label)
      : source_label_(std::move(source_label)) {}

  // Key used for lookups: headword tokens joined with kFuseSeparator, which is
  // also the surface form of the fused token.
  static std::string KeyOf(const Sentence& headword);

  // Inserts a new entry or appends `definition` to an existing one. Empty
  // headwords or definitions are ignored. Returns true if the table changed.
  bool Add(const Sentence& headword, const Sentence& definition);

  const DictEntry* Find(const Sentence& headword) const;
  const DictEntry* FindKey(std::string_view key) const;

  const std::vector<DictEntry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  size_t max_headword_length() const { return max_headword_length_; }

  const std::string& source_label() const { return source_label_; }
  void set_source_label(std::string label) { source_label_ = std::move(label); }

  // Same set of (headword, definition) pairs, regardless of order.
  bool SameEntries(const Dictionary& other) const;

 private:
  std::vector<DictEntry> entries_;
  std::unordered_map<std::string, size_t> index_;
  size_t max_headword_length_ = 0;
  std::string source_label_;
};

// Everything the cleaners removed, for auditing.
struct CleanLog {
  std::vector<std::string> deleted_entries;
  // "<headword>: <definition> (<reason>)"
  std::vector<std::string> dropped_definitions;
};

struct CedictCleanOptions {
  // Replace `see c` / `see also c` with the definitions of c.
  bool resolve_cross_references = true;
  // Longest chain of references followed before a definition is dropped.
  int max_reference_depth = 5;
};

// Applies the CEDICT cleaning procedure: drop traditional headword and
// pronunciation, strip `abbr. for c`, resolve cross references, remove
// parenthesized material, remove duplicate definitions, delete empty entries,
// then concatenate the definitions and whitespace-tokenize them. Raw entries
// sharing a simplified headword are merged in input order.
Dictionary CleanCedict(const std::vector<RawCedictEntry>& raw,
                       const CedictCleanOptions& options = {},
                       CleanLog* log = nullptr);

struct TsvCleanOptions {
  // When false, headwords and definitions are split off punctuation with
  // TokenizePunctuation; when true they are only whitespace-split.
  bool pretokenized = false;
};

// Cleans `headword<TAB>definition` lines. Parenthesized notes are removed
// from headwords only; definitions are kept verbatim apart from tokenization.
// Lines sharing a headword are merged into one definition.
Dictionary CleanTsvDictionary(const std::vector<std::string>& lines,
                              const TsvCleanOptions& options = {},
                              std::vector<SkipRecord>* skipped = nullptr,
                              CleanLog* log = nullptr);

// Light punctuation-splitting tokenizer: brackets and , ; : ! ? " become
// separate tokens. Idempotent.
Sentence TokenizePunctuation(std::string_view text);

// Removes "(...)" spans (nested, ASCII and full-width) and stray parentheses.
std::string RemoveParenthesized(std::string_view text);

struct DictStats {
  size_t entries = 0;
  double mean_definition_length = 0.0;
  size_t max_definition_length = 0;
};

DictStats ComputeDictStats(const Dictionary& dictionary);

// Canonical cleaned-dictionary format.
void WriteDictionary(const Dictionary& dictionary, std::ostream& out);
void WriteDictionaryToFile(const Dictionary& dictionary,
                           const std::string& path);
Dictionary ReadDictionary(const std::vector<std::string>& lines);
Dictionary ReadDictionaryFromFile(const std::string& path);

}  // namespace dictattach

#endif  // DICTATTACH_DICT_H_
