// Command-line front end for the dictionary-attachment toolkit.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "dictattach/bleu.h"
#include "dictattach/bpe.h"
#include "dictattach/checkpoint.h"
#include "dictattach/decode.h"
#include "dictattach/dict.h"
#include "dictattach/experiment.h"
#include "dictattach/synthetic.h"

namespace fs = std::filesystem;
using namespace dictattach;

namespace {

// Exit status of `significance` when the difference is not significant.
constexpr int kNotSignificant = 2;

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

// `--config FILE` plus one `--<key>` flag per ExperimentConfig field. Flags
// override the file, which overrides the defaults.
struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> values;

  void Register(CLI::App* app) {
    app->add_option("--config", config_path, "flat key = value config file")
        ->check(CLI::ExistingFile);
    for (const auto& key : ExperimentConfig::Keys()) {
      app->add_option("--" + key, values[key], "config field `" + key + "`");
    }
  }

  ExperimentConfig Build() const {
    ExperimentConfig config =
        config_path.empty() ? ExperimentConfig() : ExperimentConfig::FromFile(config_path);
    for (const auto& [key, value] : values) {
      if (!value.empty()) config.Set(key, value);
    }
    return config;
  }
};

int CleanDict(const std::string& format, const std::string& input, const std::string& output,
              bool no_cross_references, bool pretokenized, const std::string& skip_report) {
  const std::vector<std::string> lines = ReadLinesFromFile(input);
  std::vector<SkipRecord> skipped;
  CleanLog log;
  Dictionary dictionary;
  if (format == "cedict") {
    CedictParseResult parsed = ParseCedict(lines);
    skipped = std::move(parsed.skipped);
    CedictCleanOptions options;
    options.resolve_cross_references = !no_cross_references;
    dictionary = CleanCedict(parsed.entries, options, &log);
  } else {
    TsvCleanOptions options;
    options.pretokenized = pretokenized;
    dictionary = CleanTsvDictionary(lines, options, &skipped, &log);
  }
  WriteDictionaryToFile(dictionary, output);
  if (!skip_report.empty()) {
    std::vector<std::string> report;
    for (const auto& s : skipped) {
      report.push_back(std::to_string(s.line_number) + "\t" + s.reason + "\t" + s.text);
    }
    for (const auto& d : log.deleted_entries) report.push_back("deleted\t" + d);
    for (const auto& d : log.dropped_definitions) report.push_back("dropped\t" + d);
    WriteLinesToFile(skip_report, report);
  }
  const DictStats stats = ComputeDictStats(dictionary);
  std::cout << "entries " << stats.entries << "\nmean_definition_length "
            << stats.mean_definition_length << "\nmax_definition_length "
            << stats.max_definition_length << "\nskipped_lines " << skipped.size() << "\n";
  return 0;
}

int TranslateCommand(const std::string& checkpoint, const std::string& vocab_path,
                     const std::string& input, const std::string& output, size_t beam,
                     bool plain, bool undo_bpe, const std::string& attention_dir,
                     size_t attention_limit) {
  const Vocabulary vocab = Vocabulary::Load(vocab_path);
  const Transformer<float> model = LoadCheckpoint<float>(checkpoint, vocab.Hash());
  const std::vector<AttachedSentence> sources =
      plain ? WrapPlain(ReadSentencesFromFile(input)) : ReadAttachedCorpus(input);
  WriteLinesToFile(output, Translate(model, vocab, sources, beam, undo_bpe));
  if (!attention_dir.empty()) {
    fs::create_directories(attention_dir);
    DecodeOptions options;
    options.beam = beam;
    options.record_attention = true;
    for (size_t i = 0; i < std::min(attention_limit, sources.size()); ++i) {
      const EncodedSequence<float> encoded = model.Encode(ToIds(sources[i], vocab));
      DecodeResult result = Decode(model, encoded, options);
      AttentionRecord& record = *result.attention;
      record.source_labels = SourceRowLabels(encoded.provenance, vocab);
      record.target_labels = vocab.Decode(result.tokens);
      if (result.finished) record.target_labels.push_back(Vocabulary::EosToken());
      const fs::path stem = fs::path(attention_dir) / ("sentence" + std::to_string(i));
      WriteText(stem.string() + ".json", AttentionToJson(record) + "\n");
      WriteText(stem.string() + ".svg", AttentionToSvg(record, 0));
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dictionary definition attachment for neural machine translation"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");

  // clean-dict
  auto* clean = app.add_subcommand("clean-dict", "clean a CEDICT or TSV dictionary");
  std::string dict_format = "cedict", dict_input, dict_output, skip_report;
  bool no_xref = false, pretokenized = false;
  clean->add_option("--format", dict_format)->check(CLI::IsMember({"cedict", "tsv"}));
  clean->add_option("--input", dict_input)->required()->check(CLI::ExistingFile);
  clean->add_option("--output", dict_output)->required();
  clean->add_flag("--no-cross-references", no_xref, "keep `see c` definitions unresolved");
  clean->add_flag("--pretokenized", pretokenized, "TSV input is already tokenized");
  clean->add_option("--skip-report", skip_report, "write skipped lines and deletions here");

  // learn-bpe
  auto* learn = app.add_subcommand("learn-bpe", "learn joint BPE merges");
  std::string bpe_source, bpe_target, bpe_codes;
  size_t merges = 8000;
  learn->add_option("--source", bpe_source)->required()->check(CLI::ExistingFile);
  learn->add_option("--target", bpe_target)->required()->check(CLI::ExistingFile);
  learn->add_option("--merges", merges);
  learn->add_option("--output", bpe_codes)->required();

  // apply-bpe
  auto* apply = app.add_subcommand("apply-bpe", "segment text with learned merges");
  std::string apply_codes, apply_input, apply_output;
  bool undo = false;
  apply->add_option("--codes", apply_codes)->check(CLI::ExistingFile);
  apply->add_option("--input", apply_input)->required()->check(CLI::ExistingFile);
  apply->add_option("--output", apply_output)->required();
  apply->add_flag("--undo", undo, "join `@@` subwords instead");

  ConfigFlags prepare_flags, train_flags, run_flags, sweep_flags;
  auto* prepare = app.add_subcommand("prepare", "write the prepared corpora of one condition");
  prepare_flags.Register(prepare);
  auto* train = app.add_subcommand("train", "prepare and train, saving model.ckpt");
  train_flags.Register(train);
  auto* run = app.add_subcommand("run", "prepare, train, translate and score");
  run_flags.Register(run);
  auto* sweep = app.add_subcommand("sweep", "attach runs over frequency thresholds");
  sweep_flags.Register(sweep);
  std::string thresholds = "0,5,10,15,20,50,100,inf";
  sweep->add_option("--thresholds", thresholds, "comma-separated, `inf` allowed");

  // translate
  auto* translate = app.add_subcommand("translate", "decode sentences with a checkpoint");
  std::string ckpt, vocab_path, tr_input, tr_output, attention_dir;
  size_t beam = 4, attention_limit = 10;
  bool plain = false, undo_output_bpe = false;
  translate->add_option("--checkpoint", ckpt)->required()->check(CLI::ExistingFile);
  translate->add_option("--vocab", vocab_path)->required()->check(CLI::ExistingFile);
  translate->add_option("--input", tr_input, "prepared .jsonl (or text with --plain)")
      ->required()
      ->check(CLI::ExistingFile);
  translate->add_option("--output", tr_output)->required();
  translate->add_option("--beam", beam)->check(CLI::PositiveNumber);
  translate->add_flag("--plain", plain, "input is whitespace-tokenized text");
  translate->add_flag("--undo-bpe", undo_output_bpe, "join `@@` subwords in the output");
  translate->add_option("--attention", attention_dir,
                        "write cross-attention JSON and SVG heatmaps here");
  translate->add_option("--attention-limit", attention_limit);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "corpus BLEU");
  std::string hyp, ref, json_out;
  bool case_sensitive = false;
  evaluate->add_option("--hyp", hyp)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--ref", ref)->required()->check(CLI::ExistingFile);
  evaluate->add_flag("--case-sensitive", case_sensitive);
  evaluate->add_option("--json", json_out, "also write the report as JSON");

  // significance
  auto* significance = app.add_subcommand(
      "significance", "paired bootstrap test; exit 0 if significant, 2 if not");
  std::string hyp_a, hyp_b, sig_ref, sig_json;
  SignificanceOptions sig_options;
  bool sig_case_sensitive = false;
  significance->add_option("--hyp-a", hyp_a)->required()->check(CLI::ExistingFile);
  significance->add_option("--hyp-b", hyp_b)->required()->check(CLI::ExistingFile);
  significance->add_option("--ref", sig_ref)->required()->check(CLI::ExistingFile);
  significance->add_option("--samples", sig_options.samples)->check(CLI::PositiveNumber);
  significance->add_option("--level", sig_options.level);
  significance->add_option("--seed", sig_options.seed);
  significance->add_flag("--case-sensitive", sig_case_sensitive);
  significance->add_option("--json", sig_json);

  // gen-synthetic
  auto* synthetic = app.add_subcommand("gen-synthetic", "write a synthetic rare-word task");
  SyntheticSpec spec;
  std::string synthetic_dir;
  synthetic->add_option("--output", synthetic_dir)->required();
  synthetic->add_option("--train-pairs", spec.train_pairs);
  synthetic->add_option("--dev-pairs", spec.dev_pairs);
  synthetic->add_option("--test-pairs", spec.test_pairs);
  synthetic->add_option("--common-types", spec.common_types);
  synthetic->add_option("--function-types", spec.function_types);
  synthetic->add_option("--rare-fraction", spec.rare_fraction);
  synthetic->add_option("--rare-train-occurrences", spec.rare_train_occurrences);
  synthetic->add_option("--eval-rare-types", spec.eval_rare_types);
  synthetic->add_option("--seed", spec.seed);

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*clean) {
      return CleanDict(dict_format, dict_input, dict_output, no_xref, pretokenized,
                       skip_report);
    }
    if (*learn) {
      LearnJointBpe(ReadSentencesFromFile(bpe_source), ReadSentencesFromFile(bpe_target),
                    merges)
          .Save(bpe_codes);
      return 0;
    }
    if (*apply) {
      std::vector<Sentence> sentences = ReadSentencesFromFile(apply_input);
      if (undo) {
        for (auto& s : sentences) s = UndoBpe(s);
      } else {
        if (apply_codes.empty()) throw std::invalid_argument("--codes is required");
        const BpeModel model = BpeModel::Load(apply_codes);
        BpeApplier applier(model);
        for (auto& s : sentences) s = applier.Apply(s);
      }
      WriteSentencesToFile(apply_output, sentences);
      return 0;
    }
    if (*prepare) {
      const ExperimentConfig config = prepare_flags.Build();
      WritePrepared(PrepareCondition(config), config.output_dir);
      WriteText((fs::path(config.output_dir) / "config.txt").string(), config.ToText());
      return 0;
    }
    if (*train) {
      RunExperiment(train_flags.Build(), /*translate=*/false);
      return 0;
    }
    if (*run) {
      std::cout << RunExperiment(run_flags.Build()).ToJson() << "\n";
      return 0;
    }
    if (*sweep) {
      SweepSpec sweep_spec;
      sweep_spec.base = sweep_flags.Build();
      sweep_spec.thresholds = SweepSpec::ParseThresholds(thresholds);
      std::cout << SweepCsv(RunSweep(sweep_spec));
      return 0;
    }
    if (*translate) {
      return TranslateCommand(ckpt, vocab_path, tr_input, tr_output, beam, plain,
                              undo_output_bpe, attention_dir, attention_limit);
    }
    if (*evaluate) {
      const BleuReport report =
          ComputeBleu(ReadLinesFromFile(hyp), ReadLinesFromFile(ref),
                      case_sensitive ? Casing::kSensitive : Casing::kInsensitive);
      std::cout << report.ToText() << "\n";
      if (!json_out.empty()) WriteText(json_out, report.ToJson() + "\n");
      return 0;
    }
    if (*significance) {
      sig_options.casing = sig_case_sensitive ? Casing::kSensitive : Casing::kInsensitive;
      const SignificanceResult result =
          BootstrapSignificance(ReadLinesFromFile(hyp_a), ReadLinesFromFile(hyp_b),
                                ReadLinesFromFile(sig_ref), sig_options);
      std::cout << result.ToText() << "\n";
      if (!sig_json.empty()) WriteText(sig_json, result.ToJson() + "\n");
      return result.significant ? 0 : kNotSignificant;
    }
    if (*synthetic) {
      WriteSyntheticTask(GenerateSyntheticTask(spec), synthetic_dir);
      return 0;
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 1;
}
