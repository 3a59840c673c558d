#include "dictattach/dict.h"

#include <sstream>

#include <gtest/gtest.h>

#include "test_util.h"

namespace dictattach {
namespace {

const std::vector<std::string> kCedictFixture = {
    "# CC-CEDICT sample",
    "三自 三自 [san1 zi4] /abbr. for 三自爱国教会, Three-Self Patriotic Movement/",
    "U盤 U盘 [U pan2] /USB flash drive/see also 闪存盘/",
    "閃存盤 闪存盘 [shan3 cun2 pan2] /USB flash drive/jump drive/thumb drive/memory stick/",
};

Dictionary CleanLines(const std::vector<std::string>& lines,
                      const CedictCleanOptions& options = {}) {
  return CleanCedict(ParseCedict(lines).entries, options);
}

std::string DefinitionOf(const Dictionary& d, const std::string& headword) {
  const DictEntry* entry = d.Find(SplitWhitespace(headword));
  return entry == nullptr ? "<missing>" : Join(entry->definition);
}

TEST(ParseCedictTest, ParsesWorkedExample) {
  const auto result = ParseCedict(kCedictFixture);
  ASSERT_EQ(result.entries.size(), 3u);
  EXPECT_TRUE(result.skipped.empty());
  const RawCedictEntry& first = result.entries[0];
  EXPECT_EQ(first.traditional, "三自");
  EXPECT_EQ(first.simplified, "三自");
  EXPECT_EQ(first.pronunciation, "san1 zi4");
  ASSERT_EQ(first.definitions.size(), 1u);
  EXPECT_EQ(first.definitions[0], "abbr. for 三自爱国教会, Three-Self Patriotic Movement");
}

TEST(ParseCedictTest, SkipsCommentsAndBlankLines) {
  const auto result = ParseCedict(std::vector<std::string>{"# comment", "", "   "});
  EXPECT_TRUE(result.entries.empty());
  EXPECT_TRUE(result.skipped.empty());
}

TEST(ParseCedictTest, MalformedLineGoesToSkipReport) {
  const auto result = ParseCedict(std::vector<std::string>{
      "# header", "三自 三自 [san1 zi4] /Three-Self Patriotic Movement"});
  EXPECT_TRUE(result.entries.empty());
  ASSERT_EQ(result.skipped.size(), 1u);
  EXPECT_EQ(result.skipped[0].line_number, 2u);
}

TEST(ParseCedictTest, ParsingContinuesAfterMalformedLine) {
  std::istringstream in("bad line\n好 好 [hao3] /good/\n");
  const auto result = ParseCedict(in);
  EXPECT_EQ(result.entries.size(), 1u);
  EXPECT_EQ(result.skipped.size(), 1u);
}

TEST(CleanCedictTest, WorkedExamples) {
  const Dictionary d = CleanLines(kCedictFixture);
  EXPECT_EQ(d.size(), 3u);
  EXPECT_EQ(DefinitionOf(d, "三自"), "Three-Self Patriotic Movement");
  EXPECT_EQ(DefinitionOf(d, "U盘"), "USB flash drive jump drive thumb drive memory stick");
  EXPECT_EQ(DefinitionOf(d, "闪存盘"), "USB flash drive jump drive thumb drive memory stick");
}

TEST(CleanCedictTest, ParenthesisOnlyEntryIsDeleted) {
  CleanLog log;
  const Dictionary d = CleanCedict(
      ParseCedict(std::vector<std::string>{"古 古 [gu3] /(archaic)/"}).entries, {}, &log);
  EXPECT_TRUE(d.empty());
  EXPECT_EQ(log.deleted_entries.size(), 1u);
}

TEST(CleanCedictTest, RemovesNestedParentheses) {
  const Dictionary d = CleanLines({"词 词 [ci2] /word (a (nested) note) here/"});
  EXPECT_EQ(DefinitionOf(d, "词"), "word here");
}

TEST(CleanCedictTest, DuplicateDefinitionsCollapse) {
  const Dictionary d = CleanLines({"好 好 [hao3] /good/good (adj.)/well/"});
  EXPECT_EQ(DefinitionOf(d, "好"), "good well");
}

TEST(CleanCedictTest, CrossReferenceCycleDropsOnlyThatDefinition) {
  const Dictionary d = CleanLines({
      "甲 甲 [jia3] /first/see 乙/",
      "乙 乙 [yi3] /see 甲/",
  });
  // 乙 -> 甲 -> (first, see 乙 [cycle, dropped]).
  EXPECT_EQ(DefinitionOf(d, "甲"), "first");
  EXPECT_EQ(DefinitionOf(d, "乙"), "first");
}

TEST(CleanCedictTest, ChainsDeeperThanLimitAreDropped) {
  std::vector<std::string> lines;
  const std::vector<std::string> words = {"一", "二", "三", "四", "五", "六", "七", "八"};
  for (size_t i = 0; i + 1 < words.size(); ++i) {
    lines.push_back(words[i] + " " + words[i] + " [x] /see " + words[i + 1] + "/");
  }
  lines.push_back("八 八 [ba1] /eight/");
  const Dictionary d = CleanLines(lines);
  // 七 is one hop from the definition; 一 needs seven hops.
  EXPECT_EQ(DefinitionOf(d, "七"), "eight");
  EXPECT_EQ(DefinitionOf(d, "三"), "eight");  // five hops
  EXPECT_EQ(d.Find({"一"}), nullptr);
}

TEST(CleanCedictTest, CrossReferencesCanBeKept) {
  CedictCleanOptions options;
  options.resolve_cross_references = false;
  const Dictionary d = CleanLines(kCedictFixture, options);
  EXPECT_EQ(DefinitionOf(d, "U盘"), "USB flash drive see also 闪存盘");
}

TEST(CleanCedictTest, TraditionalSimplifiedReferenceUsesSimplified) {
  const Dictionary d = CleanLines({
      "電腦 电脑 [dian4 nao3] /computer/",
      "計算機 计算机 [ji4 suan4 ji1] /see 電腦|电脑[dian4 nao3]/",
  });
  EXPECT_EQ(DefinitionOf(d, "计算机"), "computer");
}

TEST(CleanCedictTest, InvariantsHold) {
  const Dictionary d = CleanLines({
      "三自 三自 [san1 zi4] /abbr. for 三自爱国教会, Three-Self Patriotic Movement/",
      "某 某 [mou3] /some (person)/see also 无/abbr. for 某某/",
      "丝 丝 [si1] /silk/see also 丝绸/",
  });
  for (const auto& entry : d.entries()) {
    ASSERT_FALSE(entry.definition.empty());
    const std::string text = Join(entry.definition);
    EXPECT_EQ(text.find('('), std::string::npos) << text;
    EXPECT_EQ(text.find(')'), std::string::npos) << text;
    EXPECT_EQ(text.find("abbr. for"), std::string::npos) << text;
    EXPECT_EQ(text.find("see also"), std::string::npos) << text;
  }
}

// Re-expresses a cleaned dictionary as raw CEDICT input.
std::vector<RawCedictEntry> AsRaw(const Dictionary& d) {
  std::vector<RawCedictEntry> raw;
  for (const auto& entry : d.entries()) {
    raw.push_back({Join(entry.headword, ""), Join(entry.headword, ""), "x",
                   {Join(entry.definition)}});
  }
  return raw;
}

TEST(CleanCedictTest, CleaningIsIdempotent) {
  const Dictionary once = CleanLines({
      "三自 三自 [san1 zi4] /abbr. for 三自爱国教会, Three-Self Patriotic Movement/",
      "U盤 U盘 [U pan2] /USB flash drive/see also 闪存盘/",
      "閃存盤 闪存盘 [shan3 cun2 pan2] /USB flash drive/jump drive/thumb drive/memory stick/",
      "好 好 [hao3] /good; well/(literary) fine,/",
  });
  const Dictionary twice = CleanCedict(AsRaw(once));
  EXPECT_TRUE(once.SameEntries(twice));
}

TEST(CleanCedictTest, HeadwordsComeFromInput) {
  const auto parsed = ParseCedict(kCedictFixture);
  const Dictionary d = CleanCedict(parsed.entries);
  for (const auto& entry : d.entries()) {
    bool found = false;
    for (const auto& raw : parsed.entries) found |= raw.simplified == Join(entry.headword);
    EXPECT_TRUE(found) << Join(entry.headword);
  }
}

TEST(CleanTsvTest, StripsHeadwordNotesOnly) {
  const Dictionary d = CleanTsvDictionary({"(Aktien) zusammenlegen\tto merge (with)"});
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(Join(d.entries()[0].headword), "zusammenlegen");
  EXPECT_EQ(Join(d.entries()[0].definition), "to merge ( with )");
}

TEST(CleanTsvTest, EmptyDefinitionIsDeleted) {
  EXPECT_TRUE(CleanTsvDictionary({"foo\t"}).empty());
}

TEST(CleanTsvTest, SharedHeadwordsMerge) {
  const Dictionary d = CleanTsvDictionary({"bank\tshore", "bank\tbench"});
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(Join(d.entries()[0].definition), "shore bench");
}

TEST(CleanTsvTest, MissingTabIsReported) {
  std::vector<SkipRecord> skipped;
  const Dictionary d = CleanTsvDictionary({"ok\tfine", "no tab here"}, {}, &skipped);
  EXPECT_EQ(d.size(), 1u);
  ASSERT_EQ(skipped.size(), 1u);
  EXPECT_EQ(skipped[0].line_number, 2u);
}

TEST(CleanTsvTest, PretokenizedKeepsPunctuationAttached) {
  TsvCleanOptions options;
  options.pretokenized = true;
  const Dictionary d = CleanTsvDictionary({"a b\tx, y"}, options);
  EXPECT_EQ(d.entries()[0].headword, (Sentence{"a", "b"}));
  EXPECT_EQ(d.entries()[0].definition, (Sentence{"x,", "y"}));
}

TEST(CleanTsvTest, TokenizePunctuationIsIdempotent) {
  const Sentence once = TokenizePunctuation("to merge (with), \"x\"!");
  EXPECT_EQ(once, (Sentence{"to", "merge", "(", "with", ")", ",", "\"", "x", "\"", "!"}));
  EXPECT_EQ(TokenizePunctuation(Join(once)), once);
}

TEST(DictStatsTest, SingleEntry) {
  Dictionary d;
  d.Add({"a"}, {"x", "y", "z"});
  const DictStats stats = ComputeDictStats(d);
  EXPECT_EQ(stats.entries, 1u);
  EXPECT_DOUBLE_EQ(stats.mean_definition_length, 3.0);
  EXPECT_EQ(stats.max_definition_length, 3u);
}

TEST(DictStatsTest, EmptyDictionary) {
  const DictStats stats = ComputeDictStats(Dictionary());
  EXPECT_EQ(stats.entries, 0u);
  EXPECT_EQ(stats.mean_definition_length, 0.0);
  EXPECT_EQ(stats.max_definition_length, 0u);
}

TEST(DictionaryTest, CanonicalFileRoundTrip) {
  Dictionary d;
  d.Add({"U盘"}, {"USB", "flash", "drive"});
  d.Add({"flash", "drive"}, {"闪存盘"});
  const auto path = (testing::TempDir() / "dict.tsv").string();
  WriteDictionaryToFile(d, path);
  const Dictionary back = ReadDictionaryFromFile(path);
  EXPECT_TRUE(d.SameEntries(back));
  EXPECT_EQ(back.max_headword_length(), 2u);
}

TEST(DictionaryTest, MalformedCanonicalLineThrows) {
  EXPECT_THROW(ReadDictionary({"no tab"}), std::exception);
}

TEST(DictionaryTest, AddMergesDefinitions) {
  Dictionary d;
  EXPECT_TRUE(d.Add({"a"}, {"x"}));
  EXPECT_TRUE(d.Add({"a"}, {"y"}));
  EXPECT_FALSE(d.Add({"b"}, {}));
  EXPECT_EQ(d.size(), 1u);
  EXPECT_EQ(d.Find({"a"})->definition, (Sentence{"x", "y"}));
}

}  // namespace
}  // namespace dictattach
