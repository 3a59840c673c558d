// Small UTF-8 and whitespace helpers shared by the text-processing modules.

#ifndef DICTATTACH_TEXT_H_
#define DICTATTACH_TEXT_H_

#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace dictattach {

// Token sequence. Tokens are non-empty and contain no whitespace.
using Sentence = std::vector<std::string>;

// Separator used to build the surface form of a fused multi-token span
// (U+2581 LOWER ONE EIGHTH BLOCK).
inline constexpr std::string_view kFuseSeparator = "\xE2\x96\x81";

// Decodes the code point starting at `text[*pos]` and advances `*pos`.
// Invalid bytes decode as U+FFFD and consume one byte.
char32_t NextCodePoint(std::string_view text, size_t* pos);

// Splits a UTF-8 string into its code points, each as its own string.
std::vector<std::string> SplitCodePoints(std::string_view text);

std::string EncodeUtf8(char32_t cp);

bool IsAsciiSpace(char c);

// Unicode punctuation test covering ASCII punctuation plus the CJK and
// full-width punctuation blocks.
bool IsPunctuation(char32_t cp);

// Splits on runs of ASCII whitespace; never returns empty tokens.
Sentence SplitWhitespace(std::string_view text);

std::string Join(const std::vector<std::string>& tokens,
                 std::string_view separator = " ");

std::string_view TrimWhitespace(std::string_view text);

// Collapses internal whitespace runs to single spaces and trims the ends.
std::string CollapseWhitespace(std::string_view text);

// Lowercases ASCII letters only.
std::string AsciiLower(std::string_view text);

// Reads every line of `in`, stripping a trailing '\r'.
std::vector<std::string> ReadLines(std::istream& in);
std::vector<std::string> ReadLinesFromFile(const std::string& path);
void WriteLinesToFile(const std::string& path,
                      const std::vector<std::string>& lines);

// One whitespace-tokenized sentence per line.
std::vector<Sentence> ReadSentencesFromFile(const std::string& path);
void WriteSentencesToFile(const std::string& path,
                          const std::vector<Sentence>& sentences);

// 64-bit FNV-1a.
uint64_t Fnv1a64(std::string_view data, uint64_t seed = 14695981039346656037ULL);

}  // namespace dictattach

#endif  // DICTATTACH_TEXT_H_
