// Experiment configuration and the four system conditions.
//
//   baseline  plain corpus
//   append    training corpus plus one pair per dictionary entry
//   fuse      dictionary matches fused into single tokens, no definitions
//   attach    fused matches with their definitions attached

#ifndef DICTATTACH_EXPERIMENT_H_
#define DICTATTACH_EXPERIMENT_H_

#include <optional>
#include <string>
#include <vector>

#include "dictattach/attach.h"
#include "dictattach/bleu.h"
#include "dictattach/trainer.h"
#include "dictattach/transformer.h"

namespace dictattach {

enum class Condition { kBaseline, kAppend, kFuse, kAttach };
enum class DictionaryKind { kBilingual, kMonolingual };

std::string ToString(Condition condition);
Condition ParseCondition(const std::string& text);

struct ExperimentConfig {
  Condition condition = Condition::kAttach;
  Segmentation segmentation = Segmentation::kBpe;
  FrequencyThreshold threshold;  // infinity
  AttachTarget attach_target = AttachTarget::kUnknownOnly;
  bool single_word_only = false;
  std::string dictionary;
  DictionaryKind dictionary_kind = DictionaryKind::kBilingual;

  // Either the six split files or one corpus plus split fractions.
  std::string train_source, train_target;
  std::string dev_source, dev_target;
  std::string test_source, test_target;
  std::string corpus_source, corpus_target;
  SplitFractions split;

  size_t bpe_merges = 8000;
  size_t vocab_size = 32000;
  int64_t vocab_min_count = 1;

  ModelConfig model;
  TrainConfig train;
  size_t dev_beam = 1;   // per-epoch dev scoring
  size_t test_beam = 4;  // final dev/test translation

  std::string lexicon;  // optional source word -> translation, for rare-word accuracy
  std::string output_dir;
  uint64_t seed = 1;
  bool save_epoch_checkpoints = false;

  // Field names accepted by Set and written by ToText, in order.
  static const std::vector<std::string>& Keys();
  // Throws std::invalid_argument for an unknown key or a malformed value.
  void Set(const std::string& key, const std::string& value);
  std::string Get(const std::string& key) const;

  // Flat `key = value` lines; '#' starts a comment.
  void ApplyText(const std::string& text);
  static ExperimentConfig FromFile(const std::string& path);
  std::string ToText() const;

  bool uses_dictionary() const { return condition != Condition::kBaseline; }
  bool uses_split_files() const { return corpus_source.empty() && corpus_target.empty(); }

  // Rejects invalid combinations. Does not touch the filesystem.
  void Validate() const;
  // Throws std::invalid_argument naming the first input path that is missing.
  void CheckPaths() const;
};

// Everything a condition feeds to the model.
struct PreparedData {
  Vocabulary vocab;
  std::optional<BpeModel> bpe;
  std::vector<AttachedSentence> train_source;
  std::vector<Sentence> train_target;  // segmented
  std::vector<AttachedSentence> dev_source;
  std::vector<AttachedSentence> test_source;
  ParallelCorpus dev;   // word-level originals
  ParallelCorpus test;
  size_t base_train_pairs = 0;
};

PreparedData PrepareCondition(const ExperimentConfig& config);

// Writes vocab.txt, bpe.codes (BPE mode), {train,dev,test}.src.jsonl and
// train.tgt into `dir`.
void WritePrepared(const PreparedData& data, const std::string& dir);

std::vector<TrainingExample> MakeTrainingExamples(const PreparedData& data,
                                                  size_t max_length,
                                                  size_t* skipped = nullptr);

// Decodes and detokenizes (BPE markers undone) each source sentence.
template <typename T>
std::vector<std::string> Translate(const Transformer<T>& model, const Vocabulary& vocab,
                                   const std::vector<AttachedSentence>& sources,
                                   size_t beam, bool undo_bpe);

struct ExperimentResult {
  std::string condition;
  std::string threshold;
  std::vector<EpochReport> epochs;
  std::optional<size_t> best_epoch;
  std::optional<double> best_dev_bleu;  // per-epoch scorer at the best epoch
  BleuReport dev;                        // final translation with test_beam
  BleuReport test;
  std::optional<double> dev_rare_accuracy;
  size_t train_pairs = 0;
  size_t skipped_pairs = 0;
  size_t train_attachments = 0;
  size_t vocab_size = 0;

  std::string ToJson() const;
};

// Runs prepare, train, decode and scoring; writes every artifact into
// config.output_dir. Configuration errors are raised before any work. With
// `translate` false the run stops after training and saving the model.
ExperimentResult RunExperiment(const ExperimentConfig& config, bool translate = true);

struct SweepSpec {
  std::vector<FrequencyThreshold> thresholds;
  ExperimentConfig base;  // output_dir is the sweep root

  // Parses "0,5,10,inf".
  static std::vector<FrequencyThreshold> ParseThresholds(const std::string& text);
  void Validate() const;
};

struct SweepRow {
  FrequencyThreshold k;
  std::optional<double> dev_bleu;
  std::string status;  // "ok" or "failed: <reason>"
};

// One attach run per threshold in `<root>/k_<k>`; writes sweep.csv
// (`k,dev_bleu,status`, input order) and sweep.svg into the root. A failing
// run is recorded and the sweep continues.
std::vector<SweepRow> RunSweep(const SweepSpec& spec);

std::string SweepCsv(const std::vector<SweepRow>& rows);

// Vertical bar chart with one labeled bar per value.
std::string BarChartSvg(const std::vector<std::string>& labels,
                        const std::vector<double>& values, const std::string& title,
                        const std::string& y_label);

}  // namespace dictattach

#endif  // DICTATTACH_EXPERIMENT_H_
