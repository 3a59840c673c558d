// Greedy and beam-search decoding plus cross-attention export.

#ifndef DICTATTACH_DECODE_H_
#define DICTATTACH_DECODE_H_

#include <optional>
#include <string>
#include <vector>

#include "dictattach/transformer.h"

namespace dictattach {

struct DecodeOptions {
  size_t beam = 4;
  // Maximum number of generated tokens including EOS; 0 uses the model limit.
  size_t max_length = 0;
  bool record_attention = false;
};

// Cross-attention weights for one decoded sentence, indexed
// [layer][head](target step, source row).
struct AttentionRecord {
  std::vector<std::vector<Matrix<double>>> weights;
  std::vector<std::string> source_labels;
  std::vector<std::string> target_labels;
};

struct DecodeResult {
  std::vector<TokenId> tokens;  // without BOS/EOS
  double log_prob = 0.0;        // sum over generated tokens, EOS included
  size_t length = 0;            // generated tokens, EOS included when emitted
  bool finished = false;        // EOS emitted before the length limit
  std::optional<AttentionRecord> attention;

  // Length-normalized log-probability used to rank hypotheses.
  double score() const { return length == 0 ? 0.0 : log_prob / static_cast<double>(length); }
};

// beam = 1 is greedy stepwise argmax. Throws std::invalid_argument for
// beam = 0.
template <typename T>
DecodeResult Decode(const Transformer<T>& model, const EncodedSequence<T>& source,
                    const DecodeOptions& options = {});

// Teacher-forced log-probability and cross-attention of a given output.
template <typename T>
DecodeResult ScoreOutput(const Transformer<T>& model, const EncodedSequence<T>& source,
                         const std::vector<TokenId>& tokens, bool finished,
                         bool record_attention);

// Labels for attention export: base tokens as-is, definition rows as
// "anchor/q:token".
std::vector<std::string> SourceRowLabels(const std::vector<RowProvenance>& provenance,
                                         const Vocabulary& vocab);

// {"source":[..],"target":[..],"layers":[[[[w..]..]..]..]}
std::string AttentionToJson(const AttentionRecord& record);
AttentionRecord AttentionFromJson(const std::string& json);

// Heatmap of one layer/head (head < 0 averages the heads) as standalone SVG.
std::string AttentionToSvg(const AttentionRecord& record, size_t layer, int head = -1);

}  // namespace dictattach

#endif  // DICTATTACH_DECODE_H_
