#include "dictattach/experiment.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "dictattach/checkpoint.h"
#include "dictattach/decode.h"
#include "dictattach/synthetic.h"
#include "json.hpp"

namespace dictattach {

namespace fs = std::filesystem;

std::string ToString(Condition condition) {
  switch (condition) {
    case Condition::kBaseline: return "baseline";
    case Condition::kAppend: return "append";
    case Condition::kFuse: return "fuse";
    case Condition::kAttach: return "attach";
  }
  return "unknown";
}

Condition ParseCondition(const std::string& text) {
  if (text == "baseline") return Condition::kBaseline;
  if (text == "append") return Condition::kAppend;
  if (text == "fuse") return Condition::kFuse;
  if (text == "attach") return Condition::kAttach;
  throw std::invalid_argument("condition must be baseline, append, fuse or attach: " + text);
}

namespace {

template <typename N>
N ParseNumber(const std::string& key, const std::string& text) {
  N value{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, error] = std::from_chars(begin, end, value);
  if (error != std::errc() || ptr != end || text.empty()) {
    throw std::invalid_argument(fmt::format("{}: not a valid number: '{}'", key, text));
  }
  return value;
}

bool ParseBool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw std::invalid_argument(fmt::format("{}: expected true or false: '{}'", key, text));
}

std::string FormatDouble(double value) { return fmt::format("{}", value); }

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define DA_STRING_FIELD(name)                                                        \
  Field {                                                                             \
    #name, [](ExperimentConfig& c, const std::string& v) { c.name = v; },             \
        [](const ExperimentConfig& c) { return c.name; }                             \
  }
#define DA_NUMBER_FIELD(key, member, type)                                            \
  Field {                                                                             \
    key,                                                                              \
        [](ExperimentConfig& c, const std::string& v) {                               \
          c.member = ParseNumber<type>(key, v);                                       \
        },                                                                            \
        [](const ExperimentConfig& c) { return fmt::format("{}", c.member); }         \
  }

const std::vector<Field>& Fields() {
  static const std::vector<Field> fields = {
      {"condition", [](ExperimentConfig& c, const std::string& v) { c.condition = ParseCondition(v); },
       [](const ExperimentConfig& c) { return ToString(c.condition); }},
      {"segmentation",
       [](ExperimentConfig& c, const std::string& v) { c.segmentation = ParseSegmentation(v); },
       [](const ExperimentConfig& c) { return ToString(c.segmentation); }},
      {"k", [](ExperimentConfig& c, const std::string& v) { c.threshold = FrequencyThreshold::Parse(v); },
       [](const ExperimentConfig& c) { return c.threshold.ToString(); }},
      {"attach_target",
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "unk") {
           c.attach_target = AttachTarget::kUnknownOnly;
         } else if (v == "all") {
           c.attach_target = AttachTarget::kAllMatched;
         } else {
           throw std::invalid_argument("attach_target must be `unk` or `all`: " + v);
         }
       },
       [](const ExperimentConfig& c) {
         return std::string(c.attach_target == AttachTarget::kUnknownOnly ? "unk" : "all");
       }},
      {"single_word_only",
       [](ExperimentConfig& c, const std::string& v) { c.single_word_only = ParseBool("single_word_only", v); },
       [](const ExperimentConfig& c) { return std::string(c.single_word_only ? "true" : "false"); }},
      DA_STRING_FIELD(dictionary),
      {"dictionary_kind",
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "bilingual") {
           c.dictionary_kind = DictionaryKind::kBilingual;
         } else if (v == "monolingual") {
           c.dictionary_kind = DictionaryKind::kMonolingual;
         } else {
           throw std::invalid_argument("dictionary_kind must be bilingual or monolingual: " + v);
         }
       },
       [](const ExperimentConfig& c) {
         return std::string(c.dictionary_kind == DictionaryKind::kBilingual ? "bilingual"
                                                                            : "monolingual");
       }},
      DA_STRING_FIELD(train_source),
      DA_STRING_FIELD(train_target),
      DA_STRING_FIELD(dev_source),
      DA_STRING_FIELD(dev_target),
      DA_STRING_FIELD(test_source),
      DA_STRING_FIELD(test_target),
      DA_STRING_FIELD(corpus_source),
      DA_STRING_FIELD(corpus_target),
      DA_NUMBER_FIELD("split_train", split.train, double),
      DA_NUMBER_FIELD("split_dev", split.dev, double),
      DA_NUMBER_FIELD("split_test", split.test, double),
      DA_NUMBER_FIELD("bpe_merges", bpe_merges, size_t),
      DA_NUMBER_FIELD("vocab_size", vocab_size, size_t),
      DA_NUMBER_FIELD("vocab_min_count", vocab_min_count, int64_t),
      DA_NUMBER_FIELD("d_model", model.d_model, size_t),
      DA_NUMBER_FIELD("encoder_layers", model.encoder_layers, size_t),
      DA_NUMBER_FIELD("decoder_layers", model.decoder_layers, size_t),
      DA_NUMBER_FIELD("heads", model.heads, size_t),
      DA_NUMBER_FIELD("ffn_dim", model.ffn_dim, size_t),
      DA_NUMBER_FIELD("dropout", model.dropout, double),
      DA_NUMBER_FIELD("max_length", model.max_length, size_t),
      DA_NUMBER_FIELD("label_smoothing", model.label_smoothing, double),
      DA_NUMBER_FIELD("epochs", train.epochs, size_t),
      DA_NUMBER_FIELD("batch_tokens", train.batch_tokens, size_t),
      DA_NUMBER_FIELD("learning_rate", train.learning_rate, double),
      DA_NUMBER_FIELD("warmup_steps", train.warmup_steps, size_t),
      DA_NUMBER_FIELD("adam_beta1", train.beta1, double),
      DA_NUMBER_FIELD("adam_beta2", train.beta2, double),
      DA_NUMBER_FIELD("adam_epsilon", train.epsilon, double),
      DA_NUMBER_FIELD("clip_norm", train.clip_norm, double),
      DA_NUMBER_FIELD("dev_beam", dev_beam, size_t),
      DA_NUMBER_FIELD("test_beam", test_beam, size_t),
      DA_STRING_FIELD(lexicon),
      DA_STRING_FIELD(output_dir),
      DA_NUMBER_FIELD("seed", seed, uint64_t),
      {"save_epoch_checkpoints",
       [](ExperimentConfig& c, const std::string& v) {
         c.save_epoch_checkpoints = ParseBool("save_epoch_checkpoints", v);
       },
       [](const ExperimentConfig& c) {
         return std::string(c.save_epoch_checkpoints ? "true" : "false");
       }},
  };
  return fields;
}

#undef DA_STRING_FIELD
#undef DA_NUMBER_FIELD

const Field& FindField(const std::string& key) {
  for (const auto& field : Fields()) {
    if (field.key == key) return field;
  }
  throw std::invalid_argument("unknown config key: " + key);
}

}  // namespace

const std::vector<std::string>& ExperimentConfig::Keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& field : Fields()) out.push_back(field.key);
    return out;
  }();
  return keys;
}

void ExperimentConfig::Set(const std::string& key, const std::string& value) {
  FindField(key).set(*this, value);
}

std::string ExperimentConfig::Get(const std::string& key) const {
  return FindField(key).get(*this);
}

void ExperimentConfig::ApplyText(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string_view trimmed = TrimWhitespace(line);
    if (trimmed.empty()) continue;
    const size_t eq = trimmed.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument(fmt::format("config line {}: expected key = value", number));
    }
    const std::string key(TrimWhitespace(trimmed.substr(0, eq)));
    const std::string value(TrimWhitespace(trimmed.substr(eq + 1)));
    try {
      Set(key, value);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(fmt::format("config line {}: {}", number, e.what()));
    }
  }
}

ExperimentConfig ExperimentConfig::FromFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  ExperimentConfig config;
  config.ApplyText(buffer.str());
  return config;
}

std::string ExperimentConfig::ToText() const {
  std::string out;
  for (const auto& field : Fields()) out += field.key + " = " + field.get(*this) + "\n";
  return out;
}

void ExperimentConfig::Validate() const {
  if (uses_dictionary() && dictionary.empty()) {
    throw std::invalid_argument("condition " + ToString(condition) + " requires a dictionary");
  }
  if (condition == Condition::kAppend && dictionary_kind == DictionaryKind::kMonolingual) {
    throw std::invalid_argument("append requires a bilingual dictionary");
  }
  if (uses_split_files()) {
    if (train_source.empty() || train_target.empty() || dev_source.empty() ||
        dev_target.empty() || test_source.empty() || test_target.empty()) {
      throw std::invalid_argument(
          "give train/dev/test source and target files, or corpus_source and corpus_target");
    }
  } else {
    if (corpus_source.empty() || corpus_target.empty()) {
      throw std::invalid_argument("corpus_source and corpus_target go together");
    }
    ComputeSplitSizes(10, split);  // validates the fractions
  }
  if (segmentation == Segmentation::kBpe && bpe_merges == 0) {
    throw std::invalid_argument("bpe mode needs bpe_merges > 0");
  }
  if (vocab_size < Vocabulary::kNumReserved + 1) {
    throw std::invalid_argument("vocab_size too small");
  }
  if (dev_beam == 0 || test_beam == 0) throw std::invalid_argument("beam must be at least 1");
  if (output_dir.empty()) throw std::invalid_argument("output_dir is required");
  ModelConfig m = model;
  m.seed = seed;
  m.Validate();
  train.Validate();
}

void ExperimentConfig::CheckPaths() const {
  std::vector<std::string> paths;
  if (uses_dictionary()) paths.push_back(dictionary);
  if (uses_split_files()) {
    paths.insert(paths.end(), {train_source, train_target, dev_source, dev_target,
                               test_source, test_target});
  } else {
    paths.insert(paths.end(), {corpus_source, corpus_target});
  }
  if (!lexicon.empty()) paths.push_back(lexicon);
  for (const auto& path : paths) {
    if (!fs::exists(path)) throw std::invalid_argument("missing input file: " + path);
  }
}

namespace {

CorpusSplit LoadSplit(const ExperimentConfig& config) {
  if (!config.uses_split_files()) {
    return SplitCorpus(ReadParallelCorpus(config.corpus_source, config.corpus_target),
                       config.split);
  }
  CorpusSplit split;
  split.train = ReadParallelCorpus(config.train_source, config.train_target);
  split.dev = ReadParallelCorpus(config.dev_source, config.dev_target);
  split.test = ReadParallelCorpus(config.test_source, config.test_target);
  return split;
}

}  // namespace

PreparedData PrepareCondition(const ExperimentConfig& config) {
  config.Validate();
  config.CheckPaths();
  CorpusSplit split = LoadSplit(config);
  if (split.train.size() == 0) throw std::invalid_argument("empty training corpus");
  ValidateNoFuseSeparator(split.train.source);
  ValidateNoFuseSeparator(split.dev.source);
  ValidateNoFuseSeparator(split.test.source);

  const Dictionary dictionary =
      config.uses_dictionary() ? ReadDictionaryFromFile(config.dictionary) : Dictionary();
  const FrequencyTable frequencies = FrequencyTable::Build(split.train.source, dictionary);
  AttachOptions options;
  options.segmentation = config.segmentation;
  options.threshold = config.threshold;
  options.single_word_only = config.single_word_only;
  options.target = config.attach_target;

  PreparedData data;
  data.base_train_pairs = split.train.size();
  const bool bpe_mode = config.segmentation == Segmentation::kBpe;
  if (bpe_mode) {
    // Learned on the base training corpus for every condition.
    data.bpe = LearnJointBpe(split.train.source, split.train.target, config.bpe_merges);
  }
  std::optional<BpeApplier> applier;
  if (bpe_mode) applier.emplace(*data.bpe);
  BpeApplier* bpe = applier ? &*applier : nullptr;
  const auto plain = [&](const Sentence& s) { return bpe ? bpe->Apply(s) : s; };

  const bool fused = config.condition == Condition::kFuse ||
                     config.condition == Condition::kAttach;
  const auto segment = [&](const std::vector<Sentence>& sentences) {
    std::vector<SegmentedSource> out;
    out.reserve(sentences.size());
    for (const auto& s : sentences) {
      if (fused) {
        out.push_back(SegmentFused(FuseSentence(s, dictionary, frequencies, options),
                                   config.segmentation, bpe));
      } else {
        out.push_back({plain(s), {}});
      }
    }
    return out;
  };

  ParallelCorpus train = split.train;
  if (config.condition == Condition::kAppend) train.Append(MakeAppendCorpus(dictionary));
  std::vector<SegmentedSource> train_seg = segment(train.source);
  const std::vector<SegmentedSource> dev_seg = segment(split.dev.source);
  const std::vector<SegmentedSource> test_seg = segment(split.test.source);
  for (const auto& t : train.target) data.train_target.push_back(plain(t));

  std::vector<Sentence> source_tokens;
  source_tokens.reserve(train_seg.size());
  for (const auto& s : train_seg) source_tokens.push_back(s.tokens);
  data.vocab = BuildVocab({&source_tokens, &data.train_target},
                          {config.vocab_size, config.vocab_min_count});

  const auto finish = [&](const std::vector<SegmentedSource>& segmented) {
    std::vector<AttachedSentence> out;
    out.reserve(segmented.size());
    for (const auto& s : segmented) {
      AttachedSentence attached = AttachSegmented(s, dictionary, data.vocab, options, bpe);
      if (config.condition != Condition::kAttach) attached.attachments.clear();
      out.push_back(std::move(attached));
    }
    return out;
  };
  data.train_source = finish(train_seg);
  data.dev_source = finish(dev_seg);
  data.test_source = finish(test_seg);
  data.dev = std::move(split.dev);
  data.test = std::move(split.test);
  return data;
}

void WritePrepared(const PreparedData& data, const std::string& dir) {
  fs::create_directories(dir);
  const fs::path root(dir);
  data.vocab.Save(root / "vocab.txt");
  if (data.bpe) data.bpe->Save(root / "bpe.codes");
  WriteAttachedCorpus(root / "train.src.jsonl", data.train_source);
  WriteSentencesToFile(root / "train.tgt", data.train_target);
  WriteAttachedCorpus(root / "dev.src.jsonl", data.dev_source);
  WriteAttachedCorpus(root / "test.src.jsonl", data.test_source);
}

std::vector<TrainingExample> MakeTrainingExamples(const PreparedData& data,
                                                  size_t max_length, size_t* skipped) {
  std::vector<TrainingExample> examples;
  size_t dropped = 0;
  for (size_t i = 0; i < data.train_source.size(); ++i) {
    TrainingExample example{ToIds(data.train_source[i], data.vocab),
                            data.vocab.Encode(data.train_target[i])};
    if (example.source.tokens.empty() || example.source.tokens.size() > max_length ||
        example.target.size() + 1 > max_length) {
      ++dropped;
      continue;
    }
    examples.push_back(std::move(example));
  }
  if (dropped > 0) spdlog::warn("skipped {} training pairs (empty or too long)", dropped);
  if (skipped != nullptr) *skipped = dropped;
  return examples;
}

template <typename T>
std::vector<std::string> Translate(const Transformer<T>& model, const Vocabulary& vocab,
                                   const std::vector<AttachedSentence>& sources,
                                   size_t beam, bool undo_bpe) {
  std::vector<std::string> out;
  out.reserve(sources.size());
  DecodeOptions options;
  options.beam = beam;
  for (const auto& source : sources) {
    EncodedSource ids = ToIds(source, vocab);
    if (ids.tokens.empty()) {
      out.emplace_back();
      continue;
    }
    const size_t limit = model.config().max_length;
    if (ids.tokens.size() > limit) {
      spdlog::warn("translate: truncating a {}-token source to {}", ids.tokens.size(), limit);
      ids.tokens.resize(limit);
      std::erase_if(ids.attachments, [&](const auto& a) { return a.pos >= limit; });
    }
    const DecodeResult result = Decode(model, model.Encode(ids), options);
    Sentence words = vocab.Decode(result.tokens);
    if (undo_bpe) words = UndoBpe(words);
    out.push_back(Join(words));
  }
  return out;
}

template std::vector<std::string> Translate<float>(const Transformer<float>&,
                                                   const Vocabulary&,
                                                   const std::vector<AttachedSentence>&,
                                                   size_t, bool);
template std::vector<std::string> Translate<double>(const Transformer<double>&,
                                                    const Vocabulary&,
                                                    const std::vector<AttachedSentence>&,
                                                    size_t, bool);

namespace {

std::vector<std::string> JoinAll(const std::vector<Sentence>& sentences) {
  std::vector<std::string> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(Join(s));
  return out;
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

nlohmann::ordered_json BleuJson(const BleuReport& report) {
  return nlohmann::ordered_json::parse(report.ToJson());
}

}  // namespace

std::string ExperimentResult::ToJson() const {
  nlohmann::ordered_json out;
  out["condition"] = condition;
  out["k"] = threshold;
  auto epochs_json = nlohmann::ordered_json::array();
  for (const auto& e : epochs) {
    nlohmann::ordered_json item;
    item["epoch"] = e.epoch;
    item["train_loss"] = e.train_loss;
    item["train_nll"] = e.train_nll;
    item["dev_bleu"] = e.dev_score ? nlohmann::ordered_json(*e.dev_score) : nullptr;
    item["updates"] = e.updates;
    epochs_json.push_back(std::move(item));
  }
  out["epochs"] = std::move(epochs_json);
  out["best_epoch"] = best_epoch ? nlohmann::ordered_json(*best_epoch) : nullptr;
  out["best_dev_bleu"] = best_dev_bleu ? nlohmann::ordered_json(*best_dev_bleu) : nullptr;
  out["dev"] = BleuJson(dev);
  out["test"] = BleuJson(test);
  out["dev_rare_accuracy"] =
      dev_rare_accuracy ? nlohmann::ordered_json(*dev_rare_accuracy) : nullptr;
  out["train_pairs"] = train_pairs;
  out["skipped_pairs"] = skipped_pairs;
  out["train_attachments"] = train_attachments;
  out["vocab_size"] = vocab_size;
  return out.dump(2);
}

ExperimentResult RunExperiment(const ExperimentConfig& config, bool translate) {
  config.Validate();
  config.CheckPaths();
  const fs::path root(config.output_dir);
  fs::create_directories(root);
  WriteText(root / "config.txt", config.ToText());

  const PreparedData data = PrepareCondition(config);
  WritePrepared(data, root);
  const bool undo_bpe = data.bpe.has_value();

  ModelConfig model_config = config.model;
  model_config.seed = config.seed;
  ExperimentResult result;
  result.condition = ToString(config.condition);
  result.threshold = config.threshold.ToString();
  result.vocab_size = data.vocab.size();
  const std::vector<TrainingExample> examples =
      MakeTrainingExamples(data, model_config.max_length, &result.skipped_pairs);
  result.train_pairs = examples.size();
  for (const auto& s : data.train_source) result.train_attachments += s.attachments.size();
  spdlog::info("{} (k={}): {} training pairs, {} attachments, vocabulary {}",
               result.condition, result.threshold, result.train_pairs,
               result.train_attachments, result.vocab_size);

  const std::vector<std::string> dev_refs = JoinAll(data.dev.target);
  const std::vector<std::string> test_refs = JoinAll(data.test.target);
  Transformer<float> model(model_config, data.vocab.size());
  const DevScorer<float> scorer = [&](const Transformer<float>& m) {
    return ComputeBleu(Translate(m, data.vocab, data.dev_source, config.dev_beam, undo_bpe),
                       dev_refs)
        .bleu;
  };
  const EpochCallback<float> on_epoch = [&](const EpochReport& report,
                                            const Transformer<float>& m) {
    if (config.save_epoch_checkpoints) {
      SaveCheckpoint(root / fmt::format("epoch{}.ckpt", report.epoch), m, data.vocab.Hash(),
                     {{"epoch", std::to_string(report.epoch)}});
    }
  };
  const TrainResult trained = Train(&model, examples, config.train, scorer, on_epoch);
  result.epochs = trained.epochs;
  result.best_epoch = trained.best_epoch;
  if (trained.best_epoch) {
    result.best_dev_bleu = trained.epochs[*trained.best_epoch - 1].dev_score;
  }
  SaveCheckpoint(root / "model.ckpt", model, data.vocab.Hash(),
                 {{"condition", result.condition},
                  {"k", result.threshold},
                  {"best_epoch", trained.best_epoch ? std::to_string(*trained.best_epoch)
                                                    : std::string("none")}});

  if (!translate) {
    WriteText(root / "result.json", result.ToJson() + "\n");
    return result;
  }
  const auto dev_hyps = Translate(model, data.vocab, data.dev_source, config.test_beam, undo_bpe);
  const auto test_hyps =
      Translate(model, data.vocab, data.test_source, config.test_beam, undo_bpe);
  WriteLinesToFile(root / "dev.hyp", dev_hyps);
  WriteLinesToFile(root / "test.hyp", test_hyps);
  result.dev = ComputeBleu(dev_hyps, dev_refs);
  result.test = ComputeBleu(test_hyps, test_refs);
  WriteText(root / "dev_bleu.json", result.dev.ToJson() + "\n");
  WriteText(root / "test_bleu.json", result.test.ToJson() + "\n");
  if (!config.lexicon.empty()) {
    result.dev_rare_accuracy =
        RareWordAccuracy(dev_hyps, data.dev.source, ReadLexicon(config.lexicon)).accuracy();
  }
  WriteText(root / "result.json", result.ToJson() + "\n");
  spdlog::info("{}: dev {:.2f} test {:.2f}{}", result.condition, result.dev.bleu,
               result.test.bleu,
               result.dev_rare_accuracy
                   ? fmt::format(" rare-word accuracy {:.3f}", *result.dev_rare_accuracy)
                   : "");
  return result;
}

std::vector<FrequencyThreshold> SweepSpec::ParseThresholds(const std::string& text) {
  std::vector<FrequencyThreshold> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    out.push_back(FrequencyThreshold::Parse(std::string(TrimWhitespace(item))));
  }
  return out;
}

void SweepSpec::Validate() const {
  if (thresholds.empty()) throw std::invalid_argument("sweep needs at least one threshold");
  std::set<std::string> seen;
  for (const auto& k : thresholds) {
    if (!seen.insert(k.ToString()).second) {
      throw std::invalid_argument("duplicate threshold " + k.ToString());
    }
  }
  ExperimentConfig probe = base;
  probe.condition = Condition::kAttach;
  probe.Validate();
}

std::string SweepCsv(const std::vector<SweepRow>& rows) {
  std::string out = "k,dev_bleu,status\n";
  for (const auto& row : rows) {
    std::string status = row.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    out += fmt::format("{},{},{}\n", row.k.ToString(),
                       row.dev_bleu ? fmt::format("{:.2f}", *row.dev_bleu) : "", status);
  }
  return out;
}

std::vector<SweepRow> RunSweep(const SweepSpec& spec) {
  spec.Validate();
  const fs::path root(spec.base.output_dir);
  fs::create_directories(root);
  std::vector<SweepRow> rows;
  for (const auto& k : spec.thresholds) {
    ExperimentConfig config = spec.base;
    config.condition = Condition::kAttach;
    config.threshold = k;
    config.output_dir = (root / ("k_" + k.ToString())).string();
    SweepRow row{k, std::nullopt, "ok"};
    try {
      const ExperimentResult result = RunExperiment(config);
      row.dev_bleu = result.best_dev_bleu ? *result.best_dev_bleu : result.dev.bleu;
    } catch (const std::exception& e) {
      spdlog::error("sweep k={} failed: {}", k.ToString(), e.what());
      row.status = std::string("failed: ") + e.what();
    }
    rows.push_back(std::move(row));
  }
  WriteText(root / "sweep.csv", SweepCsv(rows));
  std::vector<std::string> labels;
  std::vector<double> values;
  for (const auto& row : rows) {
    labels.push_back(row.k.is_infinite() ? "∞" : row.k.ToString());
    values.push_back(row.dev_bleu.value_or(0.0));
  }
  WriteText(root / "sweep.svg",
            BarChartSvg(labels, values, "Dev BLEU by frequency threshold k", "dev BLEU"));
  return rows;
}

std::string BarChartSvg(const std::vector<std::string>& labels,
                        const std::vector<double>& values, const std::string& title,
                        const std::string& y_label) {
  if (labels.size() != values.size()) {
    throw std::invalid_argument("one label per bar is required");
  }
  constexpr double kWidth = 480, kHeight = 320, kLeft = 60, kRight = 20, kTop = 40,
                   kBottom = 50;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  double top = 0.0;
  for (double v : values) top = std::max(top, v);
  top = top <= 0.0 ? 1.0 : std::ceil(top * 1.1);
  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
      kWidth, kHeight, kWidth / 2, title);
  svg += fmt::format(
      "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n"
      "<line x1=\"{0}\" y1=\"{2}\" x2=\"{3}\" y2=\"{2}\" stroke=\"black\"/>\n",
      kLeft, kTop, kTop + plot_h, kLeft + plot_w);
  for (int tick = 0; tick <= 4; ++tick) {
    const double value = top * tick / 4.0;
    const double y = kTop + plot_h - plot_h * tick / 4.0;
    svg += fmt::format(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.1f}</text>\n"
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#ddd\"/>\n",
        kLeft - 6, y + 4, value, kLeft, y, kLeft + plot_w, y);
  }
  svg += fmt::format(
      "<text x=\"16\" y=\"{0}\" transform=\"rotate(-90 16 {0})\" "
      "text-anchor=\"middle\">{1}</text>\n",
      kTop + plot_h / 2, y_label);
  const double slot = values.empty() ? plot_w : plot_w / static_cast<double>(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    const double h = plot_h * std::max(values[i], 0.0) / top;
    const double x = kLeft + slot * static_cast<double>(i) + slot * 0.15;
    svg += fmt::format(
        "<rect class=\"bar\" x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" "
        "fill=\"#4a78b0\"/>\n"
        "<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n"
        "<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\" "
        "font-size=\"10\">{:.2f}</text>\n",
        x, kTop + plot_h - h, slot * 0.7, h, x + slot * 0.35, kTop + plot_h + 18,
        labels[i], x + slot * 0.35, kTop + plot_h - h - 4, values[i]);
  }
  svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">k</text>\n",
                     kLeft + plot_w / 2, kHeight - 10);
  svg += "</svg>\n";
  return svg;
}

}  // namespace dictattach
