// Minimal pre-norm Transformer encoder-decoder with hand-written backward
// passes.
//
// The word embedding table is shared by the encoder input, the decoder input
// and the output projection (joint vocabulary). Source rows come from
// EncodeSentence, so all position information of the source, including the
// definition attachment structure, lives inside the row vectors; the encoder
// itself is permutation-equivariant over its input rows.
//
// Batches are processed as stacked rows: every sentence contributes a
// contiguous block and attention is computed block by block.

#ifndef DICTATTACH_TRANSFORMER_H_
#define DICTATTACH_TRANSFORMER_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dictattach/encoding.h"
#include "dictattach/tensor.h"
#include "dictattach/vocab.h"

namespace dictattach {

struct ModelConfig {
  size_t d_model = 64;
  size_t encoder_layers = 2;
  size_t decoder_layers = 2;
  size_t heads = 4;
  size_t ffn_dim = 256;
  double dropout = 0.1;
  size_t max_length = 256;
  double label_smoothing = 0.1;
  uint64_t seed = 1;

  // Throws std::invalid_argument on inconsistent settings.
  void Validate() const;
  bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct LinearParams {
  Matrix<T> weight;  // in x out
  RowVector<T> bias;
};

template <typename T>
struct LayerNormParams {
  RowVector<T> gain;
  RowVector<T> bias;
};

template <typename T>
struct AttentionParams {
  LinearParams<T> query, key, value, output;
};

template <typename T>
struct FeedForwardParams {
  LinearParams<T> inner, outer;
};

template <typename T>
struct EncoderLayerParams {
  LayerNormParams<T> self_attn_norm;
  AttentionParams<T> self_attn;
  LayerNormParams<T> ffn_norm;
  FeedForwardParams<T> ffn;
};

template <typename T>
struct DecoderLayerParams {
  LayerNormParams<T> self_attn_norm;
  AttentionParams<T> self_attn;
  LayerNormParams<T> cross_attn_norm;
  AttentionParams<T> cross_attn;
  LayerNormParams<T> ffn_norm;
  FeedForwardParams<T> ffn;
};

template <typename T>
struct TransformerParams {
  Matrix<T> embedding;             // WE, vocab x d; also the output projection
  Matrix<T> definition_positions;  // DPE, 50 x d
  std::vector<EncoderLayerParams<T>> encoder;
  LayerNormParams<T> encoder_norm;
  std::vector<DecoderLayerParams<T>> decoder;
  LayerNormParams<T> decoder_norm;

  // Every tensor in a fixed order with dotted names.
  std::vector<TensorSlot<T>> Slots();
  void SetZero();
  size_t NumValues();
};

// Allocates zero tensors with the shapes implied by `config`.
template <typename T>
TransformerParams<T> ZeroParams(const ModelConfig& config, size_t vocab_size);

struct TrainingExample {
  EncodedSource source;
  std::vector<TokenId> target;  // without BOS/EOS
};

struct LossStats {
  double loss = 0.0;  // label-smoothed cross entropy, summed over tokens
  double nll = 0.0;   // plain negative log likelihood, summed over tokens
  size_t tokens = 0;

  void Add(const LossStats& other) {
    loss += other.loss;
    nll += other.nll;
    tokens += other.tokens;
  }
};

template <typename T>
class Transformer {
 public:
  // Random initialization driven by config.seed.
  Transformer(const ModelConfig& config, size_t vocab_size);
  Transformer(const ModelConfig& config, TransformerParams<T> params);

  const ModelConfig& config() const { return config_; }
  size_t vocab_size() const { return static_cast<size_t>(params_.embedding.rows()); }
  TransformerParams<T>& params() { return params_; }
  const TransformerParams<T>& params() const { return params_; }
  T embedding_scale() const { return embedding_scale_; }
  const Matrix<T>& sinusoid() const { return sinusoid_; }

  EmbeddingTables<T> tables() const;
  EncodedSequence<T> Encode(const EncodedSource& source) const;

  // Next-token distributions (prefix length x vocab) for every prefix
  // position. `prefix` normally starts with BOS. No dropout.
  Matrix<T> Forward(const Eigen::Ref<const Matrix<T>>& source_rows,
                    const std::vector<TokenId>& prefix) const;
  Matrix<T> Forward(const EncodedSequence<T>& source,
                    const std::vector<TokenId>& prefix) const {
    return Forward(source.rows, prefix);
  }

  // Loss over a batch. Targets are wrapped as BOS + target -> target + EOS.
  // Gradients of the per-token mean loss are added into `grads` when it is
  // non-null. Dropout is active when `dropout_rng` is non-null.
  LossStats ComputeGradients(std::span<const TrainingExample* const> batch,
                             TransformerParams<T>* grads,
                             Rng* dropout_rng) const;

  // Incremental decoder used for greedy and beam search.
  class DecodeSession;

 private:
  ModelConfig config_;
  TransformerParams<T> params_;
  Matrix<T> sinusoid_;
  T embedding_scale_;
};

template <typename T>
class Transformer<T>::DecodeSession {
 public:
  // Cached decoder self-attention keys and values for one hypothesis.
  struct State {
    std::vector<Matrix<T>> keys;
    std::vector<Matrix<T>> values;
    size_t steps = 0;
  };

  DecodeSession(const Transformer<T>& model, const EncodedSequence<T>& source);

  State Start() const;
  size_t max_steps() const;
  size_t source_rows() const { return static_cast<size_t>(memory_.rows()); }

  // Feeds `token` as the next decoder input and returns log-probabilities of
  // the following token. When `cross_attention` is non-null it receives the
  // cross-attention weights of this step, indexed [layer][head].
  RowVector<T> Step(State* state, TokenId token,
                    std::vector<std::vector<RowVector<T>>>* cross_attention =
                        nullptr) const;

 private:
  const Transformer<T>& model_;
  Matrix<T> memory_;
  std::vector<Matrix<T>> cross_keys_;
  std::vector<Matrix<T>> cross_values_;
};

}  // namespace dictattach

#endif  // DICTATTACH_TRANSFORMER_H_
